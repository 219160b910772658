#include "skex/model.hpp"

#include "skex/error.hpp"
#include "skex/parallel.hpp"

namespace skex {

void ShapeModel::validate() const {
    for (const ExtrusionParams& p : primitives) p.validate();
    stump.validate();
    if (stump.k_primitives != static_cast<int>(primitives.size()))
        throw InvalidParameter("stump K does not match primitive count");
    if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
}

std::vector<double> model_occupancy(const ShapeModel& model, std::span<const Vec3> points,
                                    int samples_per_curve, int threads) {
    model.validate();
    int K = static_cast<int>(model.primitives.size());
    std::vector<SampledSketch> sketches;
    std::vector<SegmentGrid> accels;
    sketches.reserve(K);
    accels.reserve(K);
    for (const ExtrusionParams& prim : model.primitives) {
        sketches.push_back(sample_sketch(prim.sketch, samples_per_curve));
        accels.emplace_back(sketches.back());
    }

    bool hard = model.is_hard();
    std::vector<double> out(points.size());
    parallel_for(static_cast<std::int64_t>(points.size()), threads,
                 [&](std::int64_t b, std::int64_t e) {
                     std::vector<double> row(K);
                     for (std::int64_t i = b; i < e; ++i) {
                         for (int k = 0; k < K; ++k) {
                             double sdf = extrusion_sdf_detail(model.primitives[k].pose,
                                                               model.primitives[k].height,
                                                               sketches[k], &accels[k], points[i])
                                              .sdf;
                             row[k] = hard ? (sdf > 0.0 ? 1.0 : 0.0) : occupancy(sdf, model.eta);
                         }
                         out[i] = stump_evaluate_point(model.stump, row).value;
                     }
                 });
    return out;
}

ScalarField model_occupancy_grid(const ShapeModel& model, Vec3 lo, Vec3 hi, int resolution,
                                 int samples_per_curve, int threads) {
    ScalarField f = ScalarField::make_grid3(lo, hi, resolution, resolution, resolution);
    f.values = model_occupancy(model, f.grid_points3(), samples_per_curve, threads);
    return f;
}

Aabb3 model_bounds(const ShapeModel& model, int samples_per_curve) {
    Aabb3 box;
    for (const ExtrusionParams& prim : model.primitives) {
        SampledSketch s = sample_sketch(prim.sketch, samples_per_curve);
        for (const Vec2& q : s.samples) {
            box.expand(to_world(prim.pose, {q.x, q.y, 0.0}));
            box.expand(to_world(prim.pose, {q.x, q.y, prim.height}));
        }
    }
    return box;
}

}  // namespace skex
