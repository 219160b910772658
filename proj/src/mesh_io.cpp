#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "skex/error.hpp"
#include "skex/mesh.hpp"

namespace skex {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces)
        out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
    if (!out) throw IoError("write failed for " + path);
}

TriMesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    TriMesh mesh;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            if (!(ls >> v.x >> v.y >> v.z)) throw ParseError(path, lineno, "malformed vertex");
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<int, 3> f{};
            for (int i = 0; i < 3; ++i) {
                std::string item;
                if (!(ls >> item)) throw ParseError(path, lineno, "face needs 3 indices");
                f[i] = std::atoi(item.c_str()) - 1;  // ignore /vt/vn suffixes
                if (f[i] < 0) throw ParseError(path, lineno, "bad face index");
            }
            mesh.faces.push_back(f);
        }
    }
    for (const auto& f : mesh.faces)
        for (int idx : f)
            if (idx >= static_cast<int>(mesh.vertices.size()))
                throw ParseError(path, 0, "face index out of range");
    return mesh;
}

void put_f32(std::ofstream& out, float f) { out.write(reinterpret_cast<const char*>(&f), 4); }

void save_stl(const TriMesh& mesh, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    char header[80] = {0};
    std::strncpy(header, "skex binary stl", sizeof(header) - 1);
    out.write(header, 80);
    std::uint32_t n = static_cast<std::uint32_t>(mesh.faces.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (const auto& f : mesh.faces) {
        Vec3 a = mesh.vertices[f[0]], b = mesh.vertices[f[1]], c = mesh.vertices[f[2]];
        Vec3 nrm = (b - a).cross(c - a).normalized();
        put_f32(out, static_cast<float>(nrm.x));
        put_f32(out, static_cast<float>(nrm.y));
        put_f32(out, static_cast<float>(nrm.z));
        for (const Vec3& v : {a, b, c}) {
            put_f32(out, static_cast<float>(v.x));
            put_f32(out, static_cast<float>(v.y));
            put_f32(out, static_cast<float>(v.z));
        }
        std::uint16_t attr = 0;
        out.write(reinterpret_cast<const char*>(&attr), 2);
    }
    if (!out) throw IoError("write failed for " + path);
}

TriMesh load_stl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char header[80];
    in.read(header, 80);
    std::uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    if (!in) throw ParseError(path, 0, "truncated STL header");

    TriMesh mesh;
    // Weld exactly-equal vertices back together (floats are stored bit-exact,
    // so a mesh we wrote round-trips to the same counts).
    struct Key {
        float x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint32_t a, b, c;
            std::memcpy(&a, &k.x, 4);
            std::memcpy(&b, &k.y, 4);
            std::memcpy(&c, &k.z, 4);
            return (static_cast<std::size_t>(a) * 73856093u) ^
                   (static_cast<std::size_t>(b) * 19349663u) ^
                   (static_cast<std::size_t>(c) * 83492791u);
        }
    };
    std::unordered_map<Key, int, KeyHash> seen;
    auto vertex = [&](const float* v) {
        Key k{v[0], v[1], v[2]};
        auto it = seen.find(k);
        if (it != seen.end()) return it->second;
        int idx = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back({v[0], v[1], v[2]});
        seen.emplace(k, idx);
        return idx;
    };

    for (std::uint32_t t = 0; t < n; ++t) {
        float data[12];
        std::uint16_t attr;
        in.read(reinterpret_cast<char*>(data), 48);
        in.read(reinterpret_cast<char*>(&attr), 2);
        if (!in) throw ParseError(path, 0, "truncated STL triangle record");
        mesh.faces.push_back({vertex(data + 3), vertex(data + 6), vertex(data + 9)});
    }
    return mesh;
}

}  // namespace

void save_mesh(const TriMesh& mesh, const std::string& path) {
    if (ends_with(path, ".stl"))
        save_stl(mesh, path);
    else if (ends_with(path, ".obj"))
        save_obj(mesh, path);
    else
        throw InvalidParameter("unsupported mesh extension (want .stl or .obj): " + path);
}

TriMesh load_mesh(const std::string& path) {
    if (ends_with(path, ".stl")) return load_stl(path);
    if (ends_with(path, ".obj")) return load_obj(path);
    throw InvalidParameter("unsupported mesh extension (want .stl or .obj): " + path);
}

}  // namespace skex
