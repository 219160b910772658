#pragma once

#include <memory>
#include <span>
#include <vector>

#include "skex/field.hpp"
#include "skex/sketch.hpp"
#include "skex/vec.hpp"

namespace skex {

// Discretization of a closed sketch: N*n points sampled at t = i/n on each
// curve (the shared endpoints appear once, as the next curve's t=0 sample)
// plus unit outward normals. Segment i joins sample i to sample (i+1) mod M;
// distance queries measure against this closed polyline. Immutable.
struct SampledSketch {
    int n_curves = 0;
    int samples_per_curve = 0;
    std::vector<Vec2> samples;
    std::vector<Vec2> normals;

    int count() const { return static_cast<int>(samples.size()); }
    int curve_of(int sample) const { return sample / samples_per_curve; }
    double t_of(int sample) const {
        return static_cast<double>(sample % samples_per_curve) / samples_per_curve;
    }
    Aabb2 bounds() const;
};

// n >= 4 samples per curve. Junction normals average the two one-sided
// normals; a zero tangent falls back to the neighboring samples' average.
SampledSketch sample_sketch(const ControlPolygon& poly, int n);
SampledSketch sample_sketch(const SketchParams& params, int n);

struct SdfQueryResult {
    double sdf = 0.0;          // sign_factor * distance (positive inside)
    double distance = 0.0;     // unsigned distance to the polyline
    double sign_factor = 0.0;  // soft sign in (-1, 1)
    Vec2 closest_point;
    int curve = 0;      // curve index of the nearest sample
    double t = 0.0;     // parameter of the nearest sample
    int segment = 0;    // argmin segment (ties: lowest index)
    double lambda = 0;  // closest point = (1-lambda)*A + lambda*B on segment
};

// Exact nearest-segment scan over the whole polyline.
SdfQueryResult signed_distance(const SampledSketch& sketch, Vec2 p);

// Uniform-grid accelerator. Queries return results bit-identical to the
// brute-force scan (same distances, same tie-breaking).
class SegmentGrid {
  public:
    explicit SegmentGrid(const SampledSketch& sketch);
    SdfQueryResult query(const SampledSketch& sketch, Vec2 p) const;

  private:
    int nx_ = 0, ny_ = 0;
    double x0_ = 0, y0_ = 0, cell_ = 0;
    std::vector<std::vector<int>> cells_;
};

std::vector<double> signed_distance_batch(const SampledSketch& sketch, std::span<const Vec2> pts,
                                          int threads = 1);
ScalarField signed_distance_grid(const SampledSketch& sketch, Vec2 lo, Vec2 hi, int nx, int ny,
                                 int threads = 1);

// d(sdf)/d(query point), holding the argmin segment and the sign factor
// fixed. Valid a.e.; zero at distance 0.
Vec2 sdf_query_gradient(const SdfQueryResult& r, Vec2 p);

// Reverse mode through the distance term: scatters d_sdf onto the two
// endpoint samples of the hit segment (sign factor frozen).
struct SampleCotangents {
    std::vector<Vec2> d_samples;
    explicit SampleCotangents(int count) : d_samples(count) {}
};
void sdf_backward(const SdfQueryResult& r, Vec2 p, double d_sdf, int sample_count,
                  SampleCotangents& cot);

// Same for the unsigned distance (no sign factor).
void distance_backward(const SdfQueryResult& r, Vec2 p, double d_distance, int sample_count,
                       SampleCotangents& cot);

// Maps sample cotangents onto the control polygon (points and weights).
void samples_to_polygon(const ControlPolygon& poly, const SampleCotangents& cot,
                        PolygonCotangents& pc);

// Pushes accumulated sample cotangents back to the sketch's free parameters
// (d_radii, d_weights in SketchParams storage order).
void samples_backward(const SketchParams& params, const ControlPolygon& poly,
                      const SampleCotangents& cot, std::span<double> d_radii,
                      std::span<double> d_weights);

// Convenience: all partials of sdf at p w.r.t. [radii..., weights...].
std::vector<double> sdf_parameter_gradient(const SketchParams& params, int n, Vec2 p);

}  // namespace skex
