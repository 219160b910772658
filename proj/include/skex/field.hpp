#pragma once

#include <string>
#include <vector>

#include "skex/vec.hpp"

namespace skex {

// Scalar samples on a regular grid (2D when nz == 1) or an unstructured list.
// Grid positions include both bounds endpoints: x_i = lo + i*(hi-lo)/(n-1).
// Storage is x-fastest: index = (iz*ny + iy)*nx + ix.
struct ScalarField {
    int nx = 0, ny = 0, nz = 1;
    double lo[3] = {0, 0, 0};
    double hi[3] = {0, 0, 0};
    std::vector<double> values;

    bool is_2d() const { return nz == 1; }
    std::size_t size() const { return values.size(); }

    int index(int ix, int iy, int iz = 0) const { return (iz * ny + iy) * nx + ix; }
    double coord(int axis, int i) const {
        int n = axis == 0 ? nx : axis == 1 ? ny : nz;
        if (n == 1) return lo[axis];
        return lo[axis] + (hi[axis] - lo[axis]) * i / (n - 1);
    }
    Vec2 point2(int ix, int iy) const { return {coord(0, ix), coord(1, iy)}; }
    Vec3 point3(int ix, int iy, int iz) const {
        return {coord(0, ix), coord(1, iy), coord(2, iz)};
    }

    static ScalarField make_grid2(Vec2 lo, Vec2 hi, int nx, int ny);
    static ScalarField make_grid3(Vec3 lo, Vec3 hi, int nx, int ny, int nz);

    std::vector<Vec2> grid_points2() const;
    std::vector<Vec3> grid_points3() const;

    // Plain-text serialization (see docs/formats.md). Throws IoError /
    // ParseError.
    void save(const std::string& path) const;
    static ScalarField load(const std::string& path);
};

}  // namespace skex
