#pragma once

#include <span>
#include <vector>

#include "skex/extrude.hpp"
#include "skex/field.hpp"
#include "skex/stump.hpp"

namespace skex {

// A complete fitted object: K posed extrusions composed by a CSG stump.
struct ShapeModel {
    std::vector<ExtrusionParams> primitives;
    StumpParams stump;
    double eta = 100.0;

    void validate() const;
    bool is_hard() const { return stump.mode == StumpMode::Hard; }
};

// Final occupancy of the model at the given points. Hard models use binary
// primitive occupancies (sdf > 0) and boolean stump semantics; soft models
// use the logistic occupancy at the model's eta.
std::vector<double> model_occupancy(const ShapeModel& model, std::span<const Vec3> points,
                                    int samples_per_curve = 100, int threads = 1);

ScalarField model_occupancy_grid(const ShapeModel& model, Vec3 lo, Vec3 hi, int resolution,
                                 int samples_per_curve = 100, int threads = 1);

// World-space bounding box of the model's primitives (via their local
// cylinders' corner frames, sampled); used for export checks and metrics.
Aabb3 model_bounds(const ShapeModel& model, int samples_per_curve = 32);

}  // namespace skex
