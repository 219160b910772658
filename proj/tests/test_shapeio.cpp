#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "skex/error.hpp"
#include "skex/shapeio.hpp"

using namespace skex;

namespace {

ShapeModel demo_model(std::uint64_t seed, int K = 2, int J = 2, bool hard = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    ShapeModel m;
    m.eta = 100.0;
    for (int k = 0; k < K; ++k) {
        ExtrusionParams prim;
        prim.sketch = oracle::random_sketch(rng, 4);
        prim.pose = oracle::random_pose(rng, 0.4);
        prim.height = 0.5 + u(rng);
        m.primitives.push_back(prim);
    }
    m.stump = StumpParams::make(K, J, hard ? StumpMode::Hard : StumpMode::Soft);
    for (double& v : m.stump.complement) v = hard ? 0.0 : u(rng);
    for (double& v : m.stump.inter_select) v = hard ? 1.0 : u(rng);
    for (double& v : m.stump.union_select) v = hard ? 1.0 : u(rng);
    return m;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("sample_testing_grid: padding arithmetic and corner counts") {
    Aabb3 box{{-1, -1, -1}, {1, 1, 1}};
    auto pts = sample_testing_grid(box, 2, 0.15);
    REQUIRE(pts.size() == 8);
    // 15% of the extent (2.0) on each side: [-1.3, 1.3].
    CHECK(pts.front().x == doctest::Approx(-1.3).epsilon(1e-15));
    CHECK(pts.back().x == doctest::Approx(1.3).epsilon(1e-15));

    auto unpadded = sample_testing_grid(box, 2, 0.0);
    CHECK(unpadded.front().x == -1.0);
    CHECK(unpadded.back().x == 1.0);

    CHECK_THROWS_AS(sample_testing_grid(box, 1, 0.1), InvalidParameter);
    Aabb3 flat{{0, 0, 0}, {1, 1, 0}};
    CHECK_THROWS_AS(sample_testing_grid(flat, 4, 0.1), InvalidParameter);
}

TEST_CASE("model json round trip is bit-identical") {
    ShapeModel m = demo_model(5);
    std::string path = "skex_test_model.json";
    save_model(m, path);
    ShapeModel loaded = load_model(path);
    std::string again = "skex_test_model2.json";
    save_model(loaded, again);
    CHECK(slurp(path) == slurp(again));
    CHECK(loaded.primitives.size() == m.primitives.size());
    CHECK(loaded.stump.mode == m.stump.mode);
    for (std::size_t k = 0; k < m.primitives.size(); ++k) {
        CHECK(loaded.primitives[k].height == m.primitives[k].height);
        CHECK(loaded.primitives[k].pose.rotation.w == m.primitives[k].pose.rotation.w);
        for (int i = 0; i < m.primitives[k].sketch.radius_count(); ++i)
            CHECK(loaded.primitives[k].sketch.radii[i] == m.primitives[k].sketch.radii[i]);
    }
    std::remove(path.c_str());
    std::remove(again.c_str());
}

TEST_CASE("sketch json round trip") {
    std::mt19937_64 rng(9);
    SketchParams p = oracle::random_sketch(rng, 6, Continuity::C1);
    std::string text = sketch_to_json(p);
    SketchParams q = sketch_from_json(text);
    CHECK(q.n_curves == 6);
    CHECK(q.mode == Continuity::C1);
    for (int i = 0; i < p.radius_count(); ++i) CHECK(q.radii[i] == p.radii[i]);
    CHECK(sketch_to_json(q) == text);
}

TEST_CASE("malformed json reports a line number") {
    std::string path = "skex_test_bad.json";
    {
        std::ofstream out(path);
        out << "{\n  \"type\": \"shape_model\",\n  oops\n}\n";
    }
    try {
        load_model(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }
    std::remove(path.c_str());
}

TEST_CASE("pointcloud: xyz and ply parsing") {
    std::string xyz = "skex_test_cloud.xyz";
    {
        std::ofstream out(xyz);
        out << "# comment\n0 0 0\n1.5 2.5 -3\n0.1 0.2 0.3\n";
    }
    PointCloud pc = load_pointcloud(xyz);
    CHECK(pc.points.size() == 3);
    CHECK(pc.normals.empty());
    CHECK(pc.points[1].y == 2.5);
    std::remove(xyz.c_str());

    std::string bad = "skex_test_cloud_bad.xyz";
    {
        std::ofstream out(bad);
        out << "0 0 0\n1 2\n";
    }
    try {
        load_pointcloud(bad);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
    std::remove(bad.c_str());

    std::string ply = "skex_test_cloud.ply";
    {
        std::ofstream out(ply);
        out << "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
               "property float z\nend_header\n0 1 2\n3 4 5\n";
    }
    PointCloud pc2 = load_pointcloud(ply);
    CHECK(pc2.points.size() == 2);
    CHECK(pc2.points[1].z == 5.0);
    std::remove(ply.c_str());
}

TEST_CASE("export_scad: single cylinder polygon lies on the unit circle") {
    ShapeModel m;
    m.eta = 100.0;
    ExtrusionParams prim;
    prim.sketch = SketchParams::circle(4, 1.0);
    prim.height = 2.0;
    m.primitives.push_back(prim);
    m.stump = StumpParams::make(1, 1, StumpMode::Hard);
    m.stump.inter_select = {1.0};
    m.stump.union_select = {1.0};

    std::string script = export_scad(m, 64);
    CHECK(script.find("linear_extrude(height = 2") != std::string::npos);
    CHECK(script.find("polygon(points = [") != std::string::npos);
    CHECK(script.find("skex_prim_0();") != std::string::npos);
    // one extrusion only
    CHECK(script.find("module skex_prim_1") == std::string::npos);

    // Parse the polygon vertices back out and check them against the circle.
    std::size_t a = script.find("polygon(points = [");
    std::size_t b = script.find("]);", a);
    std::string pts = script.substr(a + 18, b - a - 18);
    int count = 0;
    double worst = 0.0;
    const char* s = pts.c_str();
    while (*s) {
        double x, y;
        int consumed;
        if (std::sscanf(s, " [%lf, %lf]%n", &x, &y, &consumed) == 2) {
            worst = std::max(worst, std::abs(std::hypot(x, y) - 1.0));
            ++count;
            s += consumed;
            if (*s == ',') ++s;
        } else {
            break;
        }
    }
    CHECK(count == 4 * 64);
    CHECK(worst <= 1e-3);

    // soft model is rejected
    ShapeModel soft = m;
    soft.stump.mode = StumpMode::Soft;
    CHECK_THROWS_AS(export_scad(soft, 64), InvalidParameter);
}

TEST_CASE("export_scad: empty model yields an empty union") {
    ShapeModel m;
    m.eta = 100.0;
    m.stump = StumpParams::make(0, 0, StumpMode::Hard);
    std::string script = export_scad(m, 16);
    CHECK(script.find("union() { }") != std::string::npos);
}

TEST_CASE("polygonized occupancy matches hard model occupancy") {
    ShapeModel m = demo_model(21, 2, 2, true);
    m.stump.complement = {0.0, 1.0};  // difference of two extrusions
    std::vector<Vec3> pts = sample_testing_grid(model_bounds(m), 24, 0.05);
    std::vector<double> internal = model_occupancy(m, pts, 64, 2);
    std::vector<double> poly = polygonized_occupancy(m, 64, pts, 2);
    int disagree = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        disagree += (internal[i] >= 0.5) != (poly[i] >= 0.5);
    // boundary cells only
    CHECK(disagree <= static_cast<int>(pts.size() / 100));
}

TEST_CASE("metrics: identical shapes, disjoint boxes, sphere oracle") {
    // A sphere mesh + grid by marching cubes.
    int n = 32;
    ScalarField grid = ScalarField::make_grid3({-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}, n, n, n);
    ScalarField grid2 = grid;
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                Vec3 p = grid.point3(ix, iy, iz);
                grid.values[grid.index(ix, iy, iz)] =
                    oracle::sdf_sphere(p, {0, 0, 0}, 1.0) > 0 ? 1.0 : 0.0;
                grid2.values[grid.index(ix, iy, iz)] =
                    oracle::sdf_box(p, {0, 0, 0}, {0.4, 0.4, 0.4}) > 0 ? 1.0 : 0.0;
            }
    TriMesh sphere = marching_cubes(grid, 0.5);

    Metrics same = compute_metrics(sphere, grid, sphere, grid, 2000, -1.0, 7, 2);
    CHECK(same.cd <= 1e-20);  // samples lie on the mesh itself
    CHECK(same.iou == 1.0);
    CHECK(same.f1 == 100.0);

    TriMesh box = marching_cubes(grid2, 0.5);
    Metrics diff = compute_metrics(box, grid2, sphere, grid, 2000, -1.0, 7, 2);
    CHECK(diff.iou < 1.0);
    CHECK(diff.cd > 0.0);
    CHECK(diff.cd_scaled == doctest::Approx(diff.cd * 1e3));

    // Disjoint occupancy grids give IoU 0.
    ScalarField left = grid, right = grid;
    for (int iz = 0; iz < n; ++iz)
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                Vec3 p = left.point3(ix, iy, iz);
                left.values[left.index(ix, iy, iz)] =
                    oracle::sdf_box(p, {-0.8, 0, 0}, {0.3, 0.3, 0.3}) > 0 ? 1.0 : 0.0;
                right.values[right.index(ix, iy, iz)] =
                    oracle::sdf_box(p, {0.8, 0, 0}, {0.3, 0.3, 0.3}) > 0 ? 1.0 : 0.0;
            }
    TriMesh lm = marching_cubes(left, 0.5), rm = marching_cubes(right, 0.5);
    CHECK(compute_metrics(lm, left, rm, right, 1000, -1.0, 7, 2).iou == 0.0);

    ScalarField other = ScalarField::make_grid3({-1, -1, -1}, {1, 1, 1}, n, n, n);
    CHECK_THROWS_AS(compute_metrics(sphere, grid, sphere, other, 100, -1.0, 7, 1),
                    InvalidParameter);
}

TEST_CASE("metrics: two offset unit spheres match the semi-analytic CD oracle") {
    // Fine analytic triangulations of both spheres.
    auto make_sphere = [](Vec3 c, int nu, int nv) {
        TriMesh m;
        for (int i = 0; i <= nu; ++i) {
            double phi = oracle::kPi * i / nu;
            for (int j = 0; j < nv; ++j) {
                double lam = 2 * oracle::kPi * j / nv;
                m.vertices.push_back(c + Vec3{std::sin(phi) * std::cos(lam),
                                              std::sin(phi) * std::sin(lam), std::cos(phi)});
            }
        }
        auto idx = [&](int i, int j) { return i * nv + (j % nv); };
        for (int i = 0; i < nu; ++i)
            for (int j = 0; j < nv; ++j) {
                m.faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
                m.faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
            }
        return m;
    };
    TriMesh a = make_sphere({0, 0, 0}, 48, 96);
    TriMesh b = make_sphere({0.1, 0, 0}, 48, 96);

    // Monte-Carlo oracle with exact point-to-sphere distances.
    std::mt19937_64 rng(123);
    std::normal_distribution<double> g(0.0, 1.0);
    auto sphere_point = [&](Vec3 c) {
        Vec3 d{g(rng), g(rng), g(rng)};
        return c + d.normalized();
    };
    double oracle_cd = 0.0;
    int n_mc = 1000000;
    for (int i = 0; i < n_mc; ++i) {
        Vec3 pa = sphere_point({0, 0, 0});
        double da = std::abs((pa - Vec3{0.1, 0, 0}).norm() - 1.0);
        Vec3 pb = sphere_point({0.1, 0, 0});
        double db = std::abs(pb.norm() - 1.0);
        oracle_cd += 0.5 * (da * da + db * db) / n_mc;
    }

    ScalarField ga = ScalarField::make_grid3({-2, -2, -2}, {2, 2, 2}, 8, 8, 8);
    Metrics m = compute_metrics(a, ga, b, ga, 10000, -1.0, 99, 2);
    CHECK(std::abs(m.cd - oracle_cd) / oracle_cd <= 0.05);
}

TEST_CASE("model bounds cover a posed primitive") {
    ShapeModel m = demo_model(33, 1, 1, true);
    Aabb3 box = model_bounds(m);
    CHECK(box.hi.x > box.lo.x);
    CHECK(box.diagonal() > 0.0);
}
