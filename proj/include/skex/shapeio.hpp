#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "skex/mesh.hpp"
#include "skex/model.hpp"

namespace skex {

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty or same size as points
};

// ASCII XYZ (3 or 6 columns) or ASCII PLY (positions, optional normals).
PointCloud load_pointcloud(const std::string& path);

// bbox expanded by padding_fraction of its extent on each side.
Aabb3 pad_bbox(const Aabb3& bbox, double padding_fraction);

// Regular resolution^3 grid over the padded bbox (inclusive corners).
std::vector<Vec3> sample_testing_grid(const Aabb3& bbox, int resolution,
                                      double padding_fraction);

// --- model / sketch documents (JSON) ---------------------------------------

std::string model_to_json(const ShapeModel& model);
ShapeModel model_from_json(const std::string& text, const std::string& origin = "<string>");
void save_model(const ShapeModel& model, const std::string& path);
ShapeModel load_model(const std::string& path);

std::string sketch_to_json(const SketchParams& params);
SketchParams sketch_from_json(const std::string& text, const std::string& origin = "<string>");
void save_sketch(const SketchParams& params, const std::string& path);
SketchParams load_sketch(const std::string& path);

// --- CAD export -------------------------------------------------------------

// OpenSCAD script: per primitive a multmatrix-posed linear_extrude of the
// sketch polygon sampled at polyline_samples points per curve, combined by
// the CSG structure of the hard stump. Requires a hard model.
std::string export_scad(const ShapeModel& model, int polyline_samples = 64);
void save_scad(const ShapeModel& model, int polyline_samples, const std::string& path);

// Occupancy of the exported geometry, computed internally: point-in-polygon
// against the same sampled polygons, extruded over [0, h] and combined via
// extract_csg. Used to validate export fidelity without external tools.
std::vector<double> polygonized_occupancy(const ShapeModel& model, int polyline_samples,
                                          std::span<const Vec3> points, int threads = 1);

// --- metrics ----------------------------------------------------------------

struct Metrics {
    double cd = 0.0;         // symmetric mean squared surface distance
    double cd_scaled = 0.0;  // cd * 1e3 (reporting convention)
    double iou = 0.0;        // volumetric IoU of binarized grids
    double f1 = 0.0;         // surface F1 in percent
};

// pred/gt each contribute a surface mesh and an occupancy grid (matching
// layouts). f1_threshold <= 0 selects 2% of the gt bbox diagonal.
Metrics compute_metrics(const TriMesh& pred_mesh, const ScalarField& pred_grid,
                        const TriMesh& gt_mesh, const ScalarField& gt_grid,
                        int n_surface_samples = 10000, double f1_threshold = -1.0,
                        std::uint64_t seed = 0, int threads = 1);

// Area-weighted uniform surface samples (seeded, deterministic).
std::vector<Vec3> sample_mesh_surface(const TriMesh& mesh, int n, std::uint64_t seed);

// Exact distance from a point to the closest triangle of a mesh.
double point_mesh_distance(const Vec3& p, const TriMesh& mesh);

}  // namespace skex
