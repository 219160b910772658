#pragma once

#include <span>
#include <vector>

#include "skex/sdf2d.hpp"
#include "skex/sketch.hpp"
#include "skex/vec.hpp"

namespace skex {

// Rigid placement of an upright extrusion. The rotation is normalized on
// construction; a (near-)zero quaternion is rejected.
struct RigidPose {
    Quat rotation;     // unit
    Vec3 translation;

    RigidPose() = default;
    RigidPose(const Quat& q, const Vec3& t);
};

// One primitive: a sketch extruded from z=0 to z=height in its local frame,
// then posed in world space.
struct ExtrusionParams {
    SketchParams sketch;
    RigidPose pose;
    double height = 1.0;

    void validate() const;
};

Vec3 to_local(const RigidPose& pose, const Vec3& p);
Vec3 to_world(const RigidPose& pose, const Vec3& p);

// Signed distance of the posed extrusion solid, positive inside:
//   inner = max(min(g, h - z, z), 0)
//   outer = -sqrt(min(h-z,0)^2 + min(z,0)^2 + min(g,0)^2)
// where g is the 2D sketch SDF at the local footprint. Exactly one term is
// nonzero away from the surface.
struct ExtrusionSdfDetail {
    double sdf = 0.0;
    Vec3 local;
    SdfQueryResult hit;  // 2D query at (local.x, local.y)
    double top = 0.0;    // h - local.z
    double bot = 0.0;    // local.z
};

ExtrusionSdfDetail extrusion_sdf_detail(const RigidPose& pose, double height,
                                        const SampledSketch& sketch, const SegmentGrid* accel,
                                        const Vec3& p);
double extrusion_sdf(const ExtrusionParams& prim, const SampledSketch& sketch, const Vec3& p);

// Logistic squashing of an SDF into (0,1); eta controls the sharpness.
double occupancy(double sdf, double eta);
double occupancy_derivative(double sdf, double eta);

// |points| x K occupancy matrix, point-major rows.
struct OccupancyMatrix {
    int points = 0;
    int prims = 0;
    std::vector<double> v;

    double& at(int i, int k) { return v[static_cast<std::size_t>(i) * prims + k]; }
    double at(int i, int k) const { return v[static_cast<std::size_t>(i) * prims + k]; }
};

OccupancyMatrix primitive_occupancy_batch(std::span<const ExtrusionParams> prims,
                                          std::span<const Vec3> points, double eta,
                                          int samples_per_curve = 100, int threads = 1);

// --- reverse-mode pieces -------------------------------------------------

// Splits d_sdf across the active min/max branch: cotangents for the 2D sdf
// value, the height, and the local z coordinate.
struct ExtrusionBranchGrads {
    double d_g = 0.0;
    double d_h = 0.0;
    double d_z = 0.0;
};
ExtrusionBranchGrads extrusion_sdf_backward(const ExtrusionSdfDetail& d, double d_sdf);

// Backward of local = R(q/|q|)^T (p - t) w.r.t. the raw quaternion, the
// translation and the world point.
void to_local_backward(const Quat& raw, const Vec3& translation, const Vec3& p,
                       const Vec3& d_local, double d_raw[4], Vec3& d_translation, Vec3& d_point);

}  // namespace skex
