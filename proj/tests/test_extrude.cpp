#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skex/error.hpp"
#include "skex/extrude.hpp"
#include "skex/fit.hpp"

using namespace skex;

TEST_CASE("to_local: identity, translation, round trips") {
    RigidPose identity;
    Vec3 p{0.3, -0.7, 1.1};
    Vec3 q = to_local(identity, p);
    CHECK(q.x == p.x);
    CHECK(q.y == p.y);
    CHECK(q.z == p.z);

    RigidPose shift(Quat{1, 0, 0, 0}, Vec3{1, 0, 0});
    Vec3 r = to_local(shift, {1, 0, 0});
    CHECK(r.norm() == doctest::Approx(0.0));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    RigidPose pose(Quat::axis_angle({0, 0, 1}, std::numbers::pi / 2), Vec3{0.5, -1.0, 2.0});
    for (int i = 0; i < 100; ++i) {
        Vec3 x{u(rng), u(rng), u(rng)};
        Vec3 back = to_world(pose, to_local(pose, x));
        CHECK((back - x).norm() <= 1e-12);
    }
}

TEST_CASE("RigidPose rejects a zero quaternion and normalizes inputs") {
    CHECK_THROWS_AS(RigidPose(Quat{0, 0, 0, 0}, Vec3{}), InvalidParameter);
    RigidPose pose(Quat{2, 0, 0, 0}, Vec3{});
    CHECK(pose.rotation.norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("extrusion_sdf: capped cylinder oracle points") {
    ExtrusionParams prim;
    prim.sketch = SketchParams::circle(4, 1.0);
    prim.height = 2.0;
    SampledSketch s = sample_sketch(prim.sketch, 400);

    CHECK(extrusion_sdf(prim, s, {0, 0, 1}) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(extrusion_sdf(prim, s, {0, 0, 3}) == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(extrusion_sdf(prim, s, {2, 0, -1}) ==
          doctest::Approx(-std::numbers::sqrt2).epsilon(1e-4));
}

TEST_CASE("extrusion_sdf: grid agreement with the analytic cylinder") {
    ExtrusionParams prim;
    prim.sketch = SketchParams::circle(4, 1.0);
    prim.height = 2.0;
    SampledSketch s = sample_sketch(prim.sketch, 400);

    double worst = 0.0;
    for (int iz = 0; iz <= 20; ++iz)
        for (int iy = 0; iy <= 20; ++iy)
            for (int ix = 0; ix <= 20; ++ix) {
                Vec3 p{-1.5 + 3.0 * ix / 20, -1.5 + 3.0 * iy / 20, -1.0 + 4.0 * iz / 20};
                double got = extrusion_sdf(prim, s, p);
                double exact = oracle::sdf_cylinder(p, 1.0, 2.0);
                worst = std::max(worst, std::abs(got - exact));
            }
    CHECK(worst <= 2e-4);
}

TEST_CASE("extrusion_sdf: inner and outer terms are complementary") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    ExtrusionParams prim;
    prim.sketch = SketchParams::circle(4, 0.8);
    prim.height = 1.3;
    prim.pose = oracle::random_pose(rng, 0.5);
    SampledSketch s = sample_sketch(prim.sketch, 64);
    for (int i = 0; i < 500; ++i) {
        Vec3 p{u(rng), u(rng), u(rng)};
        ExtrusionSdfDetail d = extrusion_sdf_detail(prim.pose, prim.height, s, nullptr, p);
        double inner = std::max(std::min({d.hit.sdf, d.top, d.bot}), 0.0);
        double mg = std::min(d.hit.sdf, 0.0), mt = std::min(d.top, 0.0),
               mb = std::min(d.bot, 0.0);
        double outer = -std::sqrt(mg * mg + mt * mt + mb * mb);
        CHECK(inner * outer == 0.0);
        CHECK(d.sdf == doctest::Approx(inner + outer));
    }
}

TEST_CASE("extrusion_sdf: rigid invariance") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    ExtrusionParams upright;
    upright.sketch = SketchParams::circle(4, 0.9);
    upright.height = 1.1;
    SampledSketch s = sample_sketch(upright.sketch, 100);

    for (int trial = 0; trial < 5; ++trial) {
        ExtrusionParams posed = upright;
        posed.pose = oracle::random_pose(rng, 1.0);
        for (int i = 0; i < 100; ++i) {
            Vec3 p{u(rng), u(rng), u(rng)};
            double a = extrusion_sdf(upright, s, p);
            double b = extrusion_sdf(posed, s, to_world(posed.pose, p));
            CHECK(a == doctest::Approx(b).epsilon(1e-10));
        }
    }
}

TEST_CASE("occupancy: midpoint, saturation, symmetry, errors") {
    CHECK(occupancy(0.0, 100.0) == 0.5);
    CHECK(occupancy(1.0, 100.0) == doctest::Approx(1.0).epsilon(1e-6));
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        double s = u(rng);
        CHECK(occupancy(-s, 7.0) == doctest::Approx(1.0 - occupancy(s, 7.0)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(occupancy(0.5, 0.0), InvalidParameter);
    CHECK_THROWS_AS(occupancy(0.5, -2.0), InvalidParameter);
}

TEST_CASE("primitive_occupancy_batch: shape and purity") {
    ExtrusionParams prim;
    prim.sketch = SketchParams::circle(4, 1.0);
    prim.height = 2.0;
    std::vector<ExtrusionParams> prims{prim, prim};
    std::vector<Vec3> pts{{0, 0, 1}, {3, 0, 0}, {0, 0, 1}};
    OccupancyMatrix O = primitive_occupancy_batch(prims, pts, 100.0, 64, 1);
    CHECK(O.points == 3);
    CHECK(O.prims == 2);
    CHECK(O.at(0, 0) > 0.5);   // interior
    CHECK(O.at(1, 0) < 0.5);   // exterior
    CHECK(O.at(0, 0) == O.at(0, 1));  // duplicate primitive -> identical columns
    CHECK(O.at(0, 0) == O.at(2, 0));  // duplicate point -> identical rows

    std::vector<ExtrusionParams> none;
    OccupancyMatrix Z = primitive_occupancy_batch(none, pts, 100.0, 64, 1);
    CHECK(Z.prims == 0);
    CHECK(Z.v.empty());
}

TEST_CASE("to_local_backward matches finite differences") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Quat raw{1.0 + 0.3 * g(rng), 0.3 * g(rng), 0.3 * g(rng), 0.3 * g(rng)};
        Vec3 t{g(rng), g(rng), g(rng)};
        Vec3 p{g(rng), g(rng), g(rng)};
        Vec3 dl{g(rng), g(rng), g(rng)};  // upstream cotangent

        double d_raw[4] = {0, 0, 0, 0};
        Vec3 d_t{}, d_p{};
        to_local_backward(raw, t, p, dl, d_raw, d_t, d_p);

        auto f = [&](const Quat& q, const Vec3& tt, const Vec3& pp) {
            return dl.dot(RigidPose(q, tt).rotation.rotate_inverse(pp - tt));
        };
        double h = 1e-6;
        double qv[4] = {raw.w, raw.x, raw.y, raw.z};
        for (int c = 0; c < 4; ++c) {
            double qhi[4] = {qv[0], qv[1], qv[2], qv[3]};
            double qlo[4] = {qv[0], qv[1], qv[2], qv[3]};
            qhi[c] += h;
            qlo[c] -= h;
            double fd = (f(Quat{qhi[0], qhi[1], qhi[2], qhi[3]}, t, p) -
                         f(Quat{qlo[0], qlo[1], qlo[2], qlo[3]}, t, p)) /
                        (2 * h);
            CHECK(d_raw[c] == doctest::Approx(fd).epsilon(1e-5));
        }
        for (int c = 0; c < 3; ++c) {
            Vec3 thi = t, tlo = t;
            (c == 0 ? thi.x : c == 1 ? thi.y : thi.z) += h;
            (c == 0 ? tlo.x : c == 1 ? tlo.y : tlo.z) -= h;
            double fd = (f(raw, thi, p) - f(raw, tlo, p)) / (2 * h);
            double got = c == 0 ? d_t.x : c == 1 ? d_t.y : d_t.z;
            CHECK(got == doctest::Approx(fd).epsilon(1e-5));
        }
        for (int c = 0; c < 3; ++c) {
            Vec3 phi = p, plo = p;
            (c == 0 ? phi.x : c == 1 ? phi.y : phi.z) += h;
            (c == 0 ? plo.x : c == 1 ? plo.y : plo.z) -= h;
            double fd = (f(raw, t, phi) - f(raw, t, plo)) / (2 * h);
            double got = c == 0 ? d_p.x : c == 1 ? d_p.y : d_p.z;
            CHECK(got == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("RigidPose constructor skips renormalizing already-unit quaternions") {
    Quat q = Quat::axis_angle({1, 2, 3}, 0.7);
    RigidPose pose(q, Vec3{});
    RigidPose again(pose.rotation, Vec3{});
    CHECK(again.rotation.w == pose.rotation.w);
    CHECK(again.rotation.x == pose.rotation.x);
    CHECK(again.rotation.y == pose.rotation.y);
    CHECK(again.rotation.z == pose.rotation.z);
}
