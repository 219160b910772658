#include "skex/extrude.hpp"

#include <cmath>

#include "skex/error.hpp"
#include "skex/parallel.hpp"

namespace skex {

RigidPose::RigidPose(const Quat& q, const Vec3& t) : translation(t) {
    double n2 = q.norm2();
    if (!(n2 > 1e-24)) throw InvalidParameter("pose quaternion is (near) zero");
    if (std::abs(n2 - 1.0) <= 1e-12) {
        rotation = q;  // already unit: keep the exact stored bits
    } else {
        double n = std::sqrt(n2);
        rotation = {q.w / n, q.x / n, q.y / n, q.z / n};
    }
}

void ExtrusionParams::validate() const {
    sketch.validate();
    if (!(height > 0.0)) throw InvalidParameter("extrusion height must be positive");
}

Vec3 to_local(const RigidPose& pose, const Vec3& p) {
    return pose.rotation.rotate_inverse(p - pose.translation);
}

Vec3 to_world(const RigidPose& pose, const Vec3& p) {
    return pose.rotation.rotate(p) + pose.translation;
}

ExtrusionSdfDetail extrusion_sdf_detail(const RigidPose& pose, double height,
                                        const SampledSketch& sketch, const SegmentGrid* accel,
                                        const Vec3& p) {
    ExtrusionSdfDetail d;
    d.local = to_local(pose, p);
    Vec2 foot{d.local.x, d.local.y};
    d.hit = accel ? accel->query(sketch, foot) : signed_distance(sketch, foot);
    d.top = height - d.local.z;
    d.bot = d.local.z;

    double g = d.hit.sdf;
    double inner = std::max(std::min(std::min(g, d.top), d.bot), 0.0);
    double mg = std::min(g, 0.0), mt = std::min(d.top, 0.0), mb = std::min(d.bot, 0.0);
    double outer = -std::sqrt(mg * mg + mt * mt + mb * mb);
    d.sdf = inner + outer;
    return d;
}

double extrusion_sdf(const ExtrusionParams& prim, const SampledSketch& sketch, const Vec3& p) {
    return extrusion_sdf_detail(prim.pose, prim.height, sketch, nullptr, p).sdf;
}

double occupancy(double sdf, double eta) {
    if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
    double a = eta * sdf;
    if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
    double e = std::exp(a);
    return e / (1.0 + e);
}

double occupancy_derivative(double sdf, double eta) {
    double o = occupancy(sdf, eta);
    return eta * o * (1.0 - o);
}

OccupancyMatrix primitive_occupancy_batch(std::span<const ExtrusionParams> prims,
                                          std::span<const Vec3> points, double eta,
                                          int samples_per_curve, int threads) {
    int K = static_cast<int>(prims.size());
    OccupancyMatrix O;
    O.points = static_cast<int>(points.size());
    O.prims = K;
    O.v.assign(static_cast<std::size_t>(O.points) * K, 0.0);

    std::vector<SampledSketch> sketches;
    sketches.reserve(K);
    for (const ExtrusionParams& prim : prims) {
        prim.validate();
        sketches.push_back(sample_sketch(prim.sketch, samples_per_curve));
    }

    parallel_for(O.points, threads, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i)
            for (int k = 0; k < K; ++k)
                O.at(static_cast<int>(i), k) = occupancy(
                    extrusion_sdf(prims[k], sketches[k], points[i]), eta);
    });
    return O;
}

ExtrusionBranchGrads extrusion_sdf_backward(const ExtrusionSdfDetail& d, double d_sdf) {
    ExtrusionBranchGrads g;
    double sdf2d = d.hit.sdf;
    double inner = std::min(std::min(sdf2d, d.top), d.bot);
    if (inner > 0.0) {
        // Inside: gradient follows the unique smallest term.
        if (sdf2d <= d.top && sdf2d <= d.bot) {
            g.d_g = d_sdf;
        } else if (d.top <= d.bot) {
            g.d_h += d_sdf;
            g.d_z -= d_sdf;
        } else {
            g.d_z += d_sdf;
        }
        return g;
    }
    double mg = std::min(sdf2d, 0.0), mt = std::min(d.top, 0.0), mb = std::min(d.bot, 0.0);
    double s = std::sqrt(mg * mg + mt * mt + mb * mb);
    if (s <= 0.0) return g;  // exactly on the surface: measure-zero, no gradient
    if (mg < 0.0) g.d_g = d_sdf * (-mg / s);
    if (mt < 0.0) {
        double d_top = d_sdf * (-mt / s);
        g.d_h += d_top;
        g.d_z -= d_top;
    }
    if (mb < 0.0) g.d_z += d_sdf * (-mb / s);
    return g;
}

void to_local_backward(const Quat& raw, const Vec3& translation, const Vec3& p,
                       const Vec3& d_local, double d_raw[4], Vec3& d_translation, Vec3& d_point) {
    double n = raw.norm();
    Quat q = raw.normalized();
    Vec3 diff = p - translation;

    // d_point / d_translation through local = R^T (p - t).
    Vec3 rotated = q.rotate(d_local);
    d_point += rotated;
    d_translation -= rotated;

    // dL/dq_hat_c = diff . (dR/dq_hat_c . d_local).
    double w = q.w, x = q.x, y = q.y, z = q.z;
    auto apply = [&](double m00, double m01, double m02, double m10, double m11, double m12,
                     double m20, double m21, double m22) {
        Vec3 v{m00 * d_local.x + m01 * d_local.y + m02 * d_local.z,
               m10 * d_local.x + m11 * d_local.y + m12 * d_local.z,
               m20 * d_local.x + m21 * d_local.y + m22 * d_local.z};
        return diff.dot(v);
    };
    double gh[4];
    gh[0] = 2.0 * apply(0, -z, y, z, 0, -x, -y, x, 0);
    gh[1] = 2.0 * apply(0, y, z, y, -2 * x, -w, z, w, -2 * x);
    gh[2] = 2.0 * apply(-2 * y, x, w, x, 0, z, -w, z, -2 * y);
    gh[3] = 2.0 * apply(-2 * z, -w, x, w, -2 * z, y, x, y, 0);

    // Through normalization: dL/dq = (I - q_hat q_hat^T) gh / |q|.
    double qh[4] = {w, x, y, z};
    double proj = gh[0] * qh[0] + gh[1] * qh[1] + gh[2] * qh[2] + gh[3] * qh[3];
    for (int c = 0; c < 4; ++c) d_raw[c] += (gh[c] - proj * qh[c]) / n;
}

}  // namespace skex
