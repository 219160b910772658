#pragma once

#include <span>
#include <vector>

#include "skex/vec.hpp"

namespace skex {

enum class Continuity { C0, C1 };

// Closed profile curve made of N rational cubic Bezier segments around the
// origin. Control points sit on fixed polar angles (evenly distributed
// central angles); only radial coordinates and inner-point weights vary.
//
// Storage holds exactly the free parameters:
//   C0: radii[3k+i] = rho_i of curve k (i = 0,1,2), weights[2k+i] = w_{i+1};
//       curve k reuses radii[3((k+1) mod N)] as its rho_3.
//   C1: radii[2k+i] = rho_{i+1} of curve k (i = 0,1), weights[k] = w_2;
//       joint points and w_1 are derived from the C1 conditions.
struct SketchParams {
    int n_curves = 4;
    Continuity mode = Continuity::C0;
    double start_angle = 0.0;
    std::vector<double> radii;
    std::vector<double> weights;

    int radius_count() const { return mode == Continuity::C0 ? 3 * n_curves : 2 * n_curves; }
    int weight_count() const { return mode == Continuity::C0 ? 2 * n_curves : n_curves; }
    int free_parameter_count() const { return radius_count() + weight_count(); }

    // Throws InvalidParameter on N < 2, wrong array sizes, or non-positive
    // radii/weights.
    void validate() const;

    // All radii/weights 1: the default fitting start.
    static SketchParams unit_defaults(int n_curves, Continuity mode = Continuity::C0,
                                      double start_angle = 0.0);
    // Exact circle of the given radius (rho_1 = rho_2 = rho_0/cos(theta),
    // w_1 = w_2 = (1 + 2cos(pi/N))/3).
    static SketchParams circle(int n_curves, double radius, Continuity mode = Continuity::C0,
                               double start_angle = 0.0);
    // Axis-aligned square with side 2*half_extent: N = 4 with all control
    // points of each segment collinear along one edge.
    static SketchParams square(double half_extent);
};

struct CurveAngles {
    double a0, a1, a2, a3;
};

// theta = 2pi/(4N) + atan(tan(2pi/(4N))/3); the inner-point angle offset that
// makes exact circular arcs representable.
double angle_offset(int n_curves);

// Per-curve polar angles: a0 = start + k*2pi/N, a1 = a0 + theta,
// a3 = a0 + 2pi/N, a2 = a3 - theta.
std::vector<CurveAngles> derive_angles(int n_curves, double start_angle);

// Realized control polygon: the 3N distinct points P0,P1,P2 per curve
// (P3 of curve k is P0 of curve k+1) plus per-curve weights, with C1-mode
// joints/weights already derived. Immutable after construction.
struct ControlPolygon {
    int n_curves = 0;
    double start_angle = 0.0;
    std::vector<Vec2> points;  // 3N: [P0^k, P1^k, P2^k] per curve
    std::vector<double> w1;    // N
    std::vector<double> w2;    // N

    const Vec2& p0(int k) const { return points[3 * k]; }
    const Vec2& p1(int k) const { return points[3 * k + 1]; }
    const Vec2& p2(int k) const { return points[3 * k + 2]; }
    const Vec2& p3(int k) const { return points[3 * ((k + 1) % n_curves)]; }
};

ControlPolygon build_polygon(const SketchParams& params);

// C_k(t) of the rational cubic form; t in [0,1] (domain error otherwise).
Vec2 eval_curve(const ControlPolygon& poly, int k, double t);
Vec2 eval_curve(const SketchParams& params, int k, double t);

// Exact derivative dC_k/dt (quotient rule).
Vec2 eval_derivative(const ControlPolygon& poly, int k, double t);
Vec2 eval_derivative(const SketchParams& params, int k, double t);

// dC_k(t)/d(control data): C depends on each control point through a scalar
// basis coefficient (rational Bernstein), and on the two inner weights.
struct CurvePointJacobian {
    double b[4];  // dC/dP_i = b[i] * Identity
    Vec2 dw1, dw2;
};
CurvePointJacobian curve_point_jacobian(const ControlPolygon& poly, int k, double t);

// Reverse-mode helpers. Cotangents accumulated on the realized polygon are
// pushed back to the free parameters (radii then weights, storage order).
struct PolygonCotangents {
    std::vector<Vec2> d_points;  // 3N
    std::vector<double> d_w1;    // N
    std::vector<double> d_w2;    // N

    explicit PolygonCotangents(int n_curves)
        : d_points(3 * n_curves), d_w1(n_curves, 0.0), d_w2(n_curves, 0.0) {}
};

void polygon_backward(const SketchParams& params, const PolygonCotangents& cot,
                      std::span<double> d_radii, std::span<double> d_weights);

}  // namespace skex
