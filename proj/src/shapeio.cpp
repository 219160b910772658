#include "skex/shapeio.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "skex/error.hpp"

namespace skex {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

int line_of_byte(const std::string& text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin, line_of_byte(text, e.byte), e.what());
    }
}

json sketch_json(const SketchParams& p) {
    return json{{"n_curves", p.n_curves},
                {"continuity", p.mode == Continuity::C0 ? "c0" : "c1"},
                {"start_angle", p.start_angle},
                {"radii", p.radii},
                {"weights", p.weights}};
}

SketchParams sketch_from(const json& j, const std::string& origin) {
    try {
        SketchParams p;
        p.n_curves = j.at("n_curves").get<int>();
        std::string mode = j.at("continuity").get<std::string>();
        if (mode == "c0")
            p.mode = Continuity::C0;
        else if (mode == "c1")
            p.mode = Continuity::C1;
        else
            throw ParseError(origin, 0, "continuity must be 'c0' or 'c1'");
        p.start_angle = j.at("start_angle").get<double>();
        p.radii = j.at("radii").get<std::vector<double>>();
        p.weights = j.at("weights").get<std::vector<double>>();
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw ParseError(origin, 0, std::string("bad sketch object: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ParseError(origin, 0, std::string("bad sketch object: ") + e.what());
    }
}

}  // namespace

PointCloud load_pointcloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    PointCloud pc;
    std::string line;
    int lineno = 0;

    bool ply = path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0;
    if (ply) {
        int n_vertices = -1;
        bool has_normals = false;
        int property_count = 0;
        if (!std::getline(in, line) || line.substr(0, 3) != "ply")
            throw ParseError(path, 1, "missing 'ply' magic");
        lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            std::istringstream ls(line);
            std::string tag;
            ls >> tag;
            if (tag == "format") {
                std::string fmt;
                ls >> fmt;
                if (fmt != "ascii") throw ParseError(path, lineno, "only ascii PLY is supported");
            } else if (tag == "element") {
                std::string what;
                int n;
                ls >> what >> n;
                if (what == "vertex") n_vertices = n;
                else if (n > 0) throw ParseError(path, lineno, "only vertex elements supported");
            } else if (tag == "property") {
                std::string type, name;
                ls >> type >> name;
                ++property_count;
                if (name == "nx") has_normals = true;
            } else if (tag == "end_header") {
                break;
            }
        }
        if (n_vertices < 0) throw ParseError(path, lineno, "no vertex element");
        if (property_count < 3) throw ParseError(path, lineno, "need at least x y z properties");
        for (int i = 0; i < n_vertices; ++i) {
            if (!std::getline(in, line)) throw ParseError(path, lineno, "truncated vertex list");
            ++lineno;
            std::istringstream ls(line);
            Vec3 v, n;
            if (!(ls >> v.x >> v.y >> v.z)) throw ParseError(path, lineno, "malformed vertex");
            pc.points.push_back(v);
            if (has_normals) {
                if (!(ls >> n.x >> n.y >> n.z))
                    throw ParseError(path, lineno, "malformed vertex normal");
                pc.normals.push_back(n);
            }
        }
        return pc;
    }

    // ASCII XYZ: "x y z" or "x y z nx ny nz" per non-empty line.
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Vec3 v, n;
        if (!(ls >> v.x >> v.y >> v.z)) throw ParseError(path, lineno, "expected 3 coordinates");
        pc.points.push_back(v);
        if (ls >> n.x >> n.y >> n.z) pc.normals.push_back(n);
    }
    if (!pc.normals.empty() && pc.normals.size() != pc.points.size())
        throw ParseError(path, lineno, "normals present on only some lines");
    for (const Vec3& p : pc.points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
            throw ParseError(path, 0, "non-finite coordinates");
    return pc;
}

Aabb3 pad_bbox(const Aabb3& bbox, double padding_fraction) {
    if (padding_fraction < 0.0) throw InvalidParameter("padding must be non-negative");
    Vec3 pad = bbox.extent() * padding_fraction;
    Aabb3 out;
    out.lo = bbox.lo - pad;
    out.hi = bbox.hi + pad;
    return out;
}

std::vector<Vec3> sample_testing_grid(const Aabb3& bbox, int resolution,
                                      double padding_fraction) {
    if (resolution < 2) throw InvalidParameter("grid resolution must be >= 2");
    Vec3 ext = bbox.extent();
    if (!(ext.x > 0.0 && ext.y > 0.0 && ext.z > 0.0))
        throw InvalidParameter("degenerate bounding box");
    Aabb3 padded = pad_bbox(bbox, padding_fraction);
    return ScalarField::make_grid3(padded.lo, padded.hi, resolution, resolution, resolution)
        .grid_points3();
}

std::string model_to_json(const ShapeModel& model) {
    json prims = json::array();
    for (const ExtrusionParams& p : model.primitives) {
        prims.push_back(json{{"sketch", sketch_json(p.sketch)},
                             {"rotation",
                              {p.pose.rotation.w, p.pose.rotation.x, p.pose.rotation.y,
                               p.pose.rotation.z}},
                             {"translation",
                              {p.pose.translation.x, p.pose.translation.y, p.pose.translation.z}},
                             {"height", p.height}});
    }
    json sel = json::array();
    for (int k = 0; k < model.stump.k_primitives; ++k) {
        json row = json::array();
        for (int j = 0; j < model.stump.j_nodes; ++j) row.push_back(model.stump.select(k, j));
        sel.push_back(row);
    }
    json doc{{"type", "shape_model"},
             {"version", 1},
             {"eta", model.eta},
             {"primitives", prims},
             {"stump",
              {{"mode", model.stump.mode == StumpMode::Soft ? "soft" : "hard"},
               {"complement", model.stump.complement},
               {"intersect_select", sel},
               {"union_select", model.stump.union_select}}}};
    return doc.dump(2) + "\n";
}

ShapeModel model_from_json(const std::string& text, const std::string& origin) {
    json doc = parse_json(text, origin);
    try {
        if (doc.at("type").get<std::string>() != "shape_model")
            throw ParseError(origin, 0, "not a shape_model document");
        ShapeModel model;
        model.eta = doc.at("eta").get<double>();
        for (const json& jp : doc.at("primitives")) {
            ExtrusionParams prim;
            prim.sketch = sketch_from(jp.at("sketch"), origin);
            auto q = jp.at("rotation").get<std::vector<double>>();
            auto t = jp.at("translation").get<std::vector<double>>();
            if (q.size() != 4 || t.size() != 3)
                throw ParseError(origin, 0, "rotation needs 4 and translation 3 entries");
            prim.pose = RigidPose(Quat{q[0], q[1], q[2], q[3]}, Vec3{t[0], t[1], t[2]});
            prim.height = jp.at("height").get<double>();
            model.primitives.push_back(std::move(prim));
        }
        const json& js = doc.at("stump");
        StumpParams stump;
        std::string mode = js.at("mode").get<std::string>();
        if (mode == "soft")
            stump.mode = StumpMode::Soft;
        else if (mode == "hard")
            stump.mode = StumpMode::Hard;
        else
            throw ParseError(origin, 0, "stump mode must be 'soft' or 'hard'");
        stump.complement = js.at("complement").get<std::vector<double>>();
        stump.union_select = js.at("union_select").get<std::vector<double>>();
        stump.k_primitives = static_cast<int>(stump.complement.size());
        stump.j_nodes = static_cast<int>(stump.union_select.size());
        const json& sel = js.at("intersect_select");
        if (static_cast<int>(sel.size()) != stump.k_primitives)
            throw ParseError(origin, 0, "intersect_select needs one row per primitive");
        stump.inter_select.resize(static_cast<std::size_t>(stump.k_primitives) * stump.j_nodes);
        for (int k = 0; k < stump.k_primitives; ++k) {
            auto row = sel[k].get<std::vector<double>>();
            if (static_cast<int>(row.size()) != stump.j_nodes)
                throw ParseError(origin, 0, "intersect_select row has wrong length");
            for (int j = 0; j < stump.j_nodes; ++j) stump.select(k, j) = row[j];
        }
        model.stump = std::move(stump);
        model.validate();
        return model;
    } catch (const json::exception& e) {
        throw ParseError(origin, 0, std::string("bad shape_model document: ") + e.what());
    } catch (const InvalidParameter& e) {
        throw ParseError(origin, 0, std::string("bad shape_model document: ") + e.what());
    }
}

void save_model(const ShapeModel& model, const std::string& path) {
    write_file(path, model_to_json(model));
}

ShapeModel load_model(const std::string& path) {
    return model_from_json(read_file(path), path);
}

std::string sketch_to_json(const SketchParams& params) {
    json doc = sketch_json(params);
    doc["type"] = "sketch";
    doc["version"] = 1;
    return doc.dump(2) + "\n";
}

SketchParams sketch_from_json(const std::string& text, const std::string& origin) {
    json doc = parse_json(text, origin);
    try {
        if (doc.at("type").get<std::string>() != "sketch")
            throw ParseError(origin, 0, "not a sketch document");
    } catch (const json::exception& e) {
        throw ParseError(origin, 0, std::string("bad sketch document: ") + e.what());
    }
    return sketch_from(doc, origin);
}

void save_sketch(const SketchParams& params, const std::string& path) {
    write_file(path, sketch_to_json(params));
}

SketchParams load_sketch(const std::string& path) {
    return sketch_from_json(read_file(path), path);
}

}  // namespace skex
