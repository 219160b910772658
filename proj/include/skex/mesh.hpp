#pragma once

#include <array>
#include <string>
#include <vector>

#include "skex/field.hpp"
#include "skex/vec.hpp"

namespace skex {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    bool empty() const { return faces.empty(); }
    Aabb3 bounds() const;
    double area() const;
};

// Isosurface of a 3D grid at the given level (0.5 for occupancy grids, 0 for
// SDFs). Shared cell edges reuse the same interpolated vertex, so the
// triangulation is watertight on the grid. A field with no crossings (e.g. a
// constant field) yields an empty mesh.
TriMesh marching_cubes(const ScalarField& field, double iso);

// Binary STL or ASCII OBJ, chosen by file extension (.stl / .obj).
void save_mesh(const TriMesh& mesh, const std::string& path);
TriMesh load_mesh(const std::string& path);

}  // namespace skex
