#include "skex/field.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "skex/error.hpp"

namespace skex {

namespace {

ScalarField make_grid(int dim, Vec3 lo, Vec3 hi, int nx, int ny, int nz) {
    if (nx < 2 || ny < 2 || (dim == 3 && nz < 2))
        throw InvalidParameter("grid needs at least 2 points per axis");
    for (int a = 0; a < dim; ++a) {
        double l = a == 0 ? lo.x : a == 1 ? lo.y : lo.z;
        double h = a == 0 ? hi.x : a == 1 ? hi.y : hi.z;
        if (!(h > l)) throw InvalidParameter("degenerate grid bounds");
    }
    ScalarField f;
    f.nx = nx;
    f.ny = ny;
    f.nz = dim == 3 ? nz : 1;
    f.lo[0] = lo.x;
    f.lo[1] = lo.y;
    f.lo[2] = dim == 3 ? lo.z : 0.0;
    f.hi[0] = hi.x;
    f.hi[1] = hi.y;
    f.hi[2] = dim == 3 ? hi.z : 0.0;
    f.values.assign(static_cast<std::size_t>(nx) * ny * f.nz, 0.0);
    return f;
}

}  // namespace

ScalarField ScalarField::make_grid2(Vec2 lo, Vec2 hi, int nx, int ny) {
    return make_grid(2, {lo.x, lo.y, 0}, {hi.x, hi.y, 0}, nx, ny, 1);
}

ScalarField ScalarField::make_grid3(Vec3 lo, Vec3 hi, int nx, int ny, int nz) {
    return make_grid(3, lo, hi, nx, ny, nz);
}

std::vector<Vec2> ScalarField::grid_points2() const {
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(nx) * ny);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) pts.push_back(point2(ix, iy));
    return pts;
}

std::vector<Vec3> ScalarField::grid_points3() const {
    std::vector<Vec3> pts;
    pts.reserve(size());
    for (int iz = 0; iz < nz; ++iz)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) pts.push_back(point3(ix, iy, iz));
    return pts;
}

void ScalarField::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    int dim = is_2d() ? 2 : 3;
    char buf[64];
    out << "skexfield " << dim << "\n";
    out << "dims " << nx << " " << ny;
    if (dim == 3) out << " " << nz;
    out << "\n";
    out << "bounds";
    for (int a = 0; a < dim; ++a) {
        std::snprintf(buf, sizeof buf, " %.17g %.17g", lo[a], hi[a]);
        out << buf;
    }
    out << "\nvalues\n";
    std::size_t per_line = static_cast<std::size_t>(nx);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", values[i]);
        out << buf;
        out << (((i + 1) % per_line == 0) ? '\n' : ' ');
    }
    if (!out) throw IoError("write failed for " + path);
}

ScalarField ScalarField::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line, tok;
    int lineno = 0;
    auto next_line = [&]() {
        if (!std::getline(in, line)) throw ParseError(path, lineno, "unexpected end of file");
        ++lineno;
    };

    next_line();
    std::istringstream h(line);
    int dim = 0;
    if (!(h >> tok >> dim) || tok != "skexfield" || (dim != 2 && dim != 3))
        throw ParseError(path, lineno, "expected 'skexfield 2|3' header");

    ScalarField f;
    next_line();
    std::istringstream d(line);
    if (!(d >> tok >> f.nx >> f.ny) || tok != "dims")
        throw ParseError(path, lineno, "expected 'dims nx ny [nz]'");
    if (dim == 3 && !(d >> f.nz)) throw ParseError(path, lineno, "expected 3 dims");
    if (f.nx < 1 || f.ny < 1 || f.nz < 1) throw ParseError(path, lineno, "non-positive dims");

    next_line();
    std::istringstream b(line);
    if (!(b >> tok) || tok != "bounds") throw ParseError(path, lineno, "expected 'bounds'");
    for (int a = 0; a < dim; ++a)
        if (!(b >> f.lo[a] >> f.hi[a])) throw ParseError(path, lineno, "incomplete bounds");

    next_line();
    if (line != "values") throw ParseError(path, lineno, "expected 'values'");

    std::size_t total = static_cast<std::size_t>(f.nx) * f.ny * f.nz;
    f.values.reserve(total);
    while (f.values.size() < total) {
        next_line();
        std::istringstream v(line);
        double x;
        while (v >> x) f.values.push_back(x);
        if (!v.eof()) throw ParseError(path, lineno, "malformed value");
    }
    if (f.values.size() != total)
        throw ParseError(path, lineno, "value count mismatch");
    return f;
}

}  // namespace skex
