#include <cstdio>
#include <fstream>
#include <sstream>

#include "skex/error.hpp"
#include "skex/parallel.hpp"
#include "skex/shapeio.hpp"

namespace skex {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One closed polyline per primitive: polyline_samples points per curve,
// shared endpoints emitted once. Matches the exported polygon() exactly.
std::vector<Vec2> sketch_polygon(const SketchParams& params, int polyline_samples) {
    ControlPolygon poly = build_polygon(params);
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(params.n_curves) * polyline_samples);
    for (int k = 0; k < params.n_curves; ++k)
        for (int i = 0; i < polyline_samples; ++i)
            pts.push_back(eval_curve(poly, k, static_cast<double>(i) / polyline_samples));
    return pts;
}

void write_csg(std::ostringstream& out, const CsgNode& node, const Aabb3& bounds, int indent) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    switch (node.kind) {
        case CsgNode::Kind::Empty:
            out << pad << "union() { }\n";
            return;
        case CsgNode::Kind::Universe: {
            // Stand-in for the unbounded complement base: a cube well beyond
            // the model.
            Vec3 c = (bounds.lo + bounds.hi) * 0.5;
            double size = 4.0 * std::max(bounds.diagonal(), 1.0);
            out << pad << "translate([" << num(c.x) << ", " << num(c.y) << ", " << num(c.z)
                << "]) cube(size = " << num(size) << ", center = true);\n";
            return;
        }
        case CsgNode::Kind::Primitive:
            out << pad << "skex_prim_" << node.primitive << "();\n";
            return;
        case CsgNode::Kind::Union:
        case CsgNode::Kind::Intersection:
        case CsgNode::Kind::Difference: {
            const char* name = node.kind == CsgNode::Kind::Union ? "union"
                               : node.kind == CsgNode::Kind::Intersection ? "intersection"
                                                                          : "difference";
            out << pad << name << "() {\n";
            for (const CsgNode& c : node.children) write_csg(out, c, bounds, indent + 1);
            out << pad << "}\n";
            return;
        }
    }
}

}  // namespace

std::string export_scad(const ShapeModel& model, int polyline_samples) {
    model.validate();
    if (!model.is_hard())
        throw InvalidParameter("export needs a hard model; binarize the stump first");
    if (polyline_samples < 4) throw InvalidParameter("polyline_samples must be >= 4");

    std::ostringstream out;
    out << "// exported sketch-and-extrude model (" << model.primitives.size()
        << " primitives)\n";
    out << "$fn = 32;\n\n";

    for (std::size_t k = 0; k < model.primitives.size(); ++k) {
        const ExtrusionParams& prim = model.primitives[k];
        double r[9];
        prim.pose.rotation.to_matrix(r);
        const Vec3& t = prim.pose.translation;
        out << "module skex_prim_" << k << "() {\n";
        out << "  multmatrix(m = [[" << num(r[0]) << ", " << num(r[1]) << ", " << num(r[2])
            << ", " << num(t.x) << "], [" << num(r[3]) << ", " << num(r[4]) << ", " << num(r[5])
            << ", " << num(t.y) << "], [" << num(r[6]) << ", " << num(r[7]) << ", " << num(r[8])
            << ", " << num(t.z) << "], [0, 0, 0, 1]])\n";
        out << "    linear_extrude(height = " << num(prim.height) << ")\n";
        out << "      polygon(points = [";
        std::vector<Vec2> pts = sketch_polygon(prim.sketch, polyline_samples);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (i) out << ", ";
            out << "[" << num(pts[i].x) << ", " << num(pts[i].y) << "]";
        }
        out << "]);\n}\n\n";
    }

    CsgNode tree = extract_csg(model.stump);
    Aabb3 bounds = model.primitives.empty() ? Aabb3{{-1, -1, -1}, {1, 1, 1}}
                                            : model_bounds(model);
    write_csg(out, tree, bounds, 0);
    return out.str();
}

void save_scad(const ShapeModel& model, int polyline_samples, const std::string& path) {
    std::string text = export_scad(model, polyline_samples);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

std::vector<double> polygonized_occupancy(const ShapeModel& model, int polyline_samples,
                                          std::span<const Vec3> points, int threads) {
    model.validate();
    if (!model.is_hard())
        throw InvalidParameter("polygonized occupancy needs a hard model");
    int K = static_cast<int>(model.primitives.size());
    std::vector<std::vector<Vec2>> polygons;
    polygons.reserve(K);
    for (const ExtrusionParams& prim : model.primitives)
        polygons.push_back(sketch_polygon(prim.sketch, polyline_samples));
    CsgNode tree = extract_csg(model.stump);

    auto inside_polygon = [](const std::vector<Vec2>& poly, Vec2 p) {
        bool inside = false;
        std::size_t n = poly.size();
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = poly[j];
            const Vec2& b = poly[i];
            if ((b.y > p.y) != (a.y > p.y)) {
                double x = b.x + (p.y - b.y) / (a.y - b.y) * (a.x - b.x);
                if (p.x < x) inside = !inside;
            }
        }
        return inside;
    };

    std::vector<double> out(points.size());
    parallel_for(static_cast<std::int64_t>(points.size()), threads,
                 [&](std::int64_t b, std::int64_t e) {
                     std::vector<unsigned char> flags(K);
                     for (std::int64_t i = b; i < e; ++i) {
                         for (int k = 0; k < K; ++k) {
                             Vec3 local = to_local(model.primitives[k].pose, points[i]);
                             flags[k] = local.z >= 0.0 && local.z <= model.primitives[k].height &&
                                        inside_polygon(polygons[k], {local.x, local.y});
                         }
                         out[i] = csg_evaluate(tree, flags) ? 1.0 : 0.0;
                     }
                 });
    return out;
}

}  // namespace skex
