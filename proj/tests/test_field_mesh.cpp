#include <doctest.h>

#include <cstdio>
#include <map>
#include <random>
#include <string>

#include "oracles.hpp"
#include "skex/error.hpp"
#include "skex/field.hpp"
#include "skex/mesh.hpp"

using namespace skex;

namespace {

std::string tmp_path(const char* name) {
    return std::string("skex_test_") + name;
}

}  // namespace

TEST_CASE("ScalarField: grid coordinates and layout") {
    ScalarField f = ScalarField::make_grid2({-1, -2}, {1, 2}, 3, 5);
    CHECK(f.is_2d());
    CHECK(f.point2(0, 0).x == -1.0);
    CHECK(f.point2(2, 4).x == 1.0);
    CHECK(f.point2(1, 2).x == doctest::Approx(0.0));
    CHECK(f.point2(1, 2).y == doctest::Approx(0.0));
    CHECK(f.index(1, 0) == 1);
    CHECK(f.index(0, 1) == 3);

    CHECK_THROWS_AS(ScalarField::make_grid2({0, 0}, {0, 1}, 4, 4), InvalidParameter);
    CHECK_THROWS_AS(ScalarField::make_grid3({0, 0, 0}, {1, 1, 1}, 1, 4, 4), InvalidParameter);
}

TEST_CASE("ScalarField: text round trip") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    ScalarField f = ScalarField::make_grid3({-1, -1, -1}, {1, 1, 1}, 4, 3, 2);
    for (double& v : f.values) v = u(rng);
    std::string path = tmp_path("field.grid");
    f.save(path);
    ScalarField g = ScalarField::load(path);
    CHECK(g.nx == f.nx);
    CHECK(g.ny == f.ny);
    CHECK(g.nz == f.nz);
    for (int a = 0; a < 3; ++a) {
        CHECK(g.lo[a] == f.lo[a]);
        CHECK(g.hi[a] == f.hi[a]);
    }
    REQUIRE(g.values.size() == f.values.size());
    for (std::size_t i = 0; i < f.values.size(); ++i) CHECK(g.values[i] == f.values[i]);
    std::remove(path.c_str());
}

TEST_CASE("ScalarField: malformed files report the line") {
    std::string path = tmp_path("bad.grid");
    {
        std::FILE* fp = std::fopen(path.c_str(), "w");
        std::fputs("skexfield 2\ndims 2 oops\n", fp);
        std::fclose(fp);
    }
    try {
        ScalarField::load(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    std::remove(path.c_str());
}

TEST_CASE("marching_cubes: sphere vertices sit on the sphere") {
    int n = 64;
    ScalarField f = ScalarField::make_grid3({-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}, n, n, n);
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                f.values[f.index(ix, iy, iz)] =
                    oracle::sdf_sphere(f.point3(ix, iy, iz), {0, 0, 0}, 1.0);
    TriMesh mesh = marching_cubes(f, 0.0);
    REQUIRE(!mesh.empty());
    double cell = 3.0 / (n - 1);
    double worst = 0.0;
    for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 1.0));
    CHECK(worst <= 1.5 * cell);
}

TEST_CASE("marching_cubes: watertight on grid (every edge shared twice)") {
    int n = 16;
    ScalarField f = ScalarField::make_grid3({-1, -1, -1}, {1, 1, 1}, n, n, n);
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                f.values[f.index(ix, iy, iz)] =
                    oracle::sdf_sphere(f.point3(ix, iy, iz), {0.05, -0.02, 0.01}, 0.7);
    TriMesh mesh = marching_cubes(f, 0.0);
    REQUIRE(!mesh.empty());
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& face : mesh.faces)
        for (int e = 0; e < 3; ++e) {
            int a = face[e], b = face[(e + 1) % 3];
            edge_count[{std::min(a, b), std::max(a, b)}] += 1;
        }
    for (const auto& [edge, count] : edge_count) CHECK(count == 2);
}

TEST_CASE("marching_cubes: constant fields give empty meshes") {
    ScalarField f = ScalarField::make_grid3({0, 0, 0}, {1, 1, 1}, 4, 4, 4);
    for (double& v : f.values) v = 1.0;  // all inside
    CHECK(marching_cubes(f, 0.5).empty());
    for (double& v : f.values) v = 0.0;
    CHECK(marching_cubes(f, 0.5).empty());
    CHECK_THROWS_AS(marching_cubes(ScalarField::make_grid2({0, 0}, {1, 1}, 4, 4), 0.5),
                    InvalidParameter);
}

TEST_CASE("marching_cubes: iso shift invariance on binary fields") {
    int n = 12;
    ScalarField f = ScalarField::make_grid3({-1, -1, -1}, {1, 1, 1}, n, n, n);
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                f.values[f.index(ix, iy, iz)] =
                    oracle::sdf_box(f.point3(ix, iy, iz), {0, 0, 0}, {0.5, 0.4, 0.6}) > 0 ? 1.0
                                                                                          : 0.0;
    ScalarField shifted = f;
    for (double& v : shifted.values) v -= 0.5;
    TriMesh a = marching_cubes(f, 0.5);
    TriMesh b = marching_cubes(shifted, 0.0);
    REQUIRE(a.vertices.size() == b.vertices.size());
    REQUIRE(a.faces.size() == b.faces.size());
    for (std::size_t i = 0; i < a.vertices.size(); ++i)
        CHECK((a.vertices[i] - b.vertices[i]).norm() <= 1e-12);
}

TEST_CASE("mesh io: obj and stl round trips") {
    int n = 10;
    ScalarField f = ScalarField::make_grid3({-1, -1, -1}, {1, 1, 1}, n, n, n);
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
                f.values[f.index(ix, iy, iz)] =
                    oracle::sdf_sphere(f.point3(ix, iy, iz), {0, 0, 0}, 0.8);
    TriMesh mesh = marching_cubes(f, 0.0);
    REQUIRE(!mesh.empty());

    std::string obj = tmp_path("mesh.obj");
    save_mesh(mesh, obj);
    TriMesh back = load_mesh(obj);
    CHECK(back.vertices.size() == mesh.vertices.size());
    CHECK(back.faces.size() == mesh.faces.size());
    std::remove(obj.c_str());

    std::string stl = tmp_path("mesh.stl");
    save_mesh(mesh, stl);
    TriMesh back2 = load_mesh(stl);
    CHECK(back2.vertices.size() == mesh.vertices.size());
    CHECK(back2.faces.size() == mesh.faces.size());
    std::remove(stl.c_str());

    CHECK_THROWS_AS(save_mesh(mesh, "mesh.ply"), InvalidParameter);
}
