#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "skex/field.hpp"
#include "skex/model.hpp"

namespace skex {

enum class GradientMode { Analytic, FiniteDifference };

// Multiplies eta by `factor` every `every` iterations; disabled when
// every == 0.
struct EtaSchedule {
    double factor = 2.0;
    int every = 0;
    bool enabled() const { return every > 0 && factor != 1.0; }
};

struct FitConfig {
    double learning_rate = 1e-2;
    int iterations = 2000;
    double lambda_p = 0.01;
    double lambda_w = 0.001;
    double eta = 100.0;
    EtaSchedule eta_schedule;
    int samples_per_curve = 100;
    GradientMode gradient_mode = GradientMode::Analytic;
    double fd_step = 1e-5;
    std::uint64_t seed = 0;
    int restarts = 3;
    int threads = 0;  // 0: resolve from environment/hardware
    bool use_accelerator = false;
    bool optimize_weights = true;
    // 3D targets denser than this are subsampled by a uniform stride.
    int max_testing_points = 36000;

    void validate() const;
};

struct LossRecord {
    int iteration = 0;
    double recon = 0.0;
    double prim = 0.0;
    double weight_reg = 0.0;
    double total = 0.0;
};
using LossReport = std::vector<LossRecord>;

void save_loss_csv(const LossReport& report, const std::string& path);

// --- losses ---------------------------------------------------------------

// Mean squared error between occupancy vectors.
double loss_reconstruction(std::span<const double> pred, std::span<const double> target);

// (1/K) sum_k min_n SDF_k(p_n)^2: pulls every primitive's surface towards
// some testing point.
double loss_primitive(std::span<const ExtrusionParams> prims, std::span<const Vec3> points,
                      int samples_per_curve = 100, int threads = 1);

// Sum over curves of (w1-1)^2 + (w2-1)^2 on the realized polygon weights.
double loss_weight_reg(std::span<const SketchParams> sketches);

// --- optimization problems (flat variable vectors) --------------------------
//
// Free variables are unconstrained reals: radii, weights and heights enter
// through exp(), stump parameters through the logistic; quaternions are raw
// 4-vectors normalized inside the pose.

// Fits a sketch's unsigned distance field to a 2D target grid.
class Sketch2dProblem {
  public:
    Sketch2dProblem(ScalarField target, SketchParams reference, FitConfig config);

    int var_count() const;
    std::vector<double> pack(const SketchParams& params) const;
    SketchParams unpack(std::span<const double> vars) const;

    double loss(std::span<const double> vars, LossRecord* rec = nullptr) const;
    std::vector<double> gradient(std::span<const double> vars, LossRecord* rec = nullptr) const;

    const ScalarField& target() const { return target_; }
    const FitConfig& config() const { return config_; }

  private:
    std::vector<double> analytic_gradient(std::span<const double> vars, LossRecord* rec) const;

    ScalarField target_;
    std::vector<Vec2> points_;
    SketchParams reference_;
    FitConfig config_;
};

// Fits K posed extrusions plus a soft stump to target occupancies at a set
// of testing points.
class Model3dProblem {
  public:
    Model3dProblem(std::vector<Vec3> points, std::vector<double> target, int k_primitives,
                   int j_nodes, SketchParams sketch_template, FitConfig config);

    int var_count() const;
    std::vector<double> pack(const ShapeModel& model) const;
    ShapeModel unpack(std::span<const double> vars) const;

    double loss(std::span<const double> vars, LossRecord* rec = nullptr) const;
    std::vector<double> gradient(std::span<const double> vars, LossRecord* rec = nullptr) const;

    // eta in use (the schedule mutates it between iterations).
    double eta = 100.0;

    int k_primitives() const { return k_; }
    int j_nodes() const { return j_; }
    std::span<const Vec3> points() const { return points_; }
    const FitConfig& config() const { return config_; }

  private:
    std::vector<double> analytic_gradient(std::span<const double> vars, LossRecord* rec) const;

    std::vector<Vec3> points_;
    std::vector<double> target_;
    int k_ = 0, j_ = 0;
    SketchParams template_;
    FitConfig config_;
    int per_prim_ = 0;
};

// Central finite differences of an arbitrary scalar function; the oracle
// counterpart of the analytic gradients.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> vars,
    double step);

// --- fitting entry points ---------------------------------------------------

struct Fit2dResult {
    SketchParams params;
    LossReport report;
    double best_loss = 0.0;
};

// Gradient descent (Adam) on the sketch parameters from `init`; returns the
// best-loss parameters seen. The target is an unsigned distance grid.
Fit2dResult fit_sketch_2d(const ScalarField& target, const SketchParams& init,
                          const FitConfig& config);

struct Fit3dResult {
    ShapeModel soft;
    ShapeModel hard;
    LossReport report;
    double best_loss = 0.0;
    int best_restart = 0;
};

// Jointly optimizes all primitive and stump parameters against a 3D
// occupancy grid; `config.restarts` random restarts (1 when `init` is
// given), best final loss wins. Returns the soft model and its binarization.
Fit3dResult fit_shapes_3d(const ScalarField& target, int k_primitives, int j_nodes,
                          const FitConfig& config, const ShapeModel* init = nullptr);

// Seeded random model initialization inside the target's occupied region.
ShapeModel random_model_init(const ScalarField& target, int k_primitives, int j_nodes,
                             const SketchParams& sketch_template, double eta, std::uint64_t seed);

}  // namespace skex
