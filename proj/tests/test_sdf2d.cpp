#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"
#include "skex/error.hpp"
#include "skex/fit.hpp"
#include "skex/sdf2d.hpp"

using namespace skex;

TEST_CASE("sample_sketch: counts, spacing and unit normals") {
    SketchParams p = SketchParams::circle(4, 1.0);
    SampledSketch s = sample_sketch(p, 100);
    CHECK(s.count() == 400);
    for (int i = 0; i < s.count(); ++i) {
        CHECK(s.normals[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.t_of(i) == doctest::Approx((i % 100) / 100.0));
    }
    // Circle normals point radially outward.
    for (int i = 0; i < s.count(); ++i)
        CHECK(s.normals[i].dot(s.samples[i].normalized()) >= 1.0 - 1e-6);

    CHECK_THROWS_AS(sample_sketch(p, 3), InvalidParameter);
}

TEST_CASE("sample_sketch: square corner normals are the averaged diagonals") {
    SampledSketch s = sample_sketch(SketchParams::square(0.5), 64);
    // Sample 0 is the corner at (0.5, 0.5); its normal is the 45 degree
    // average of the two edge normals.
    Vec2 corner = s.samples[0];
    CHECK(corner.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(corner.y == doctest::Approx(0.5).epsilon(1e-12));
    Vec2 diag = Vec2{1.0, 1.0}.normalized();
    CHECK(s.normals[0].dot(diag) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("signed_distance: circle oracle at interior/exterior points") {
    SketchParams p = SketchParams::circle(4, 1.0);
    SampledSketch s = sample_sketch(p, 400);
    CHECK(signed_distance(s, {0.0, 0.0}).sdf == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(signed_distance(s, {2.0, 0.0}).sdf == doctest::Approx(-1.0).epsilon(1e-4));
    // Exactly on a sample point: distance zero.
    CHECK(signed_distance(s, s.samples[17]).distance == 0.0);
    CHECK(signed_distance(s, s.samples[17]).sdf == 0.0);
}

TEST_CASE("signed_distance: result invariants") {
    std::mt19937_64 rng(3);
    SketchParams p = oracle::random_sketch(rng, 5);
    SampledSketch s = sample_sketch(p, 50);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        Vec2 q{u(rng), u(rng)};
        SdfQueryResult r = signed_distance(s, q);
        CHECK(std::abs(r.sdf) <= r.distance + 1e-15);
        CHECK(std::abs(std::abs(r.sdf) - r.distance) <= 1e-6 * std::max(r.distance, 1.0));
        CHECK((q - r.closest_point).norm() == doctest::Approx(r.distance).epsilon(1e-12));
        CHECK(r.curve >= 0);
        CHECK(r.curve < 5);
    }
    // the origin is always interior for a star-shaped sketch
    CHECK(signed_distance(s, {0.0, 0.0}).sdf > 0.0);
}

TEST_CASE("signed_distance_batch: grid vs analytic circle, empty, duplicates") {
    SketchParams p = SketchParams::circle(4, 1.0);
    SampledSketch s = sample_sketch(p, 400);

    ScalarField f = signed_distance_grid(s, {-1.5, -1.5}, {1.5, 1.5}, 201, 201, 2);
    double worst = 0.0;
    for (int iy = 0; iy < 201; ++iy)
        for (int ix = 0; ix < 201; ++ix) {
            double exact = oracle::sdf_circle(f.point2(ix, iy), 1.0);
            worst = std::max(worst, std::abs(f.values[f.index(ix, iy)] - exact));
        }
    CHECK(worst <= 1e-4);

    std::vector<Vec2> empty;
    CHECK(signed_distance_batch(s, empty).empty());

    std::vector<Vec2> dup{{0.3, 0.2}, {0.3, 0.2}};
    auto v = signed_distance_batch(s, dup);
    CHECK(v[0] == v[1]);
}

TEST_CASE("refinement: circle grid error decreases monotonically") {
    SketchParams p = SketchParams::circle(4, 1.0);
    double prev = 1e300;
    for (int n : {20, 40, 80, 160}) {
        SampledSketch s = sample_sketch(p, n);
        ScalarField f = signed_distance_grid(s, {-1.5, -1.5}, {1.5, 1.5}, 101, 101, 2);
        double worst = 0.0;
        for (int iy = 0; iy < 101; ++iy)
            for (int ix = 0; ix < 101; ++ix)
                worst = std::max(worst, std::abs(f.values[f.index(ix, iy)] -
                                                 oracle::sdf_circle(f.point2(ix, iy), 1.0)));
        CHECK(worst < prev);
        prev = worst;
    }
}

TEST_CASE("square oracle: polyline matches the exact square SDF") {
    SketchParams p = SketchParams::square(0.5);
    SampledSketch s = sample_sketch(p, 100);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (int i = 0; i < 500; ++i) {
        Vec2 q{u(rng), u(rng)};
        double exact = oracle::sdf_square(q, 0.5);
        // segments reproduce the edges exactly; the soft sign contributes an
        // epsilon-scale (1e-8) absolute bias
        CHECK(std::abs(signed_distance(s, q).sdf - exact) <= 3e-8);
    }
}

TEST_CASE("SegmentGrid accelerator is bit-identical to brute force") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        SketchParams p = oracle::random_sketch(rng, 2 + static_cast<int>(rng() % 6));
        SampledSketch s = sample_sketch(p, 40);
        SegmentGrid accel(s);
        std::uniform_real_distribution<double> u(-3.0, 3.0);
        for (int i = 0; i < 300; ++i) {
            Vec2 q{u(rng), u(rng)};
            SdfQueryResult a = signed_distance(s, q);
            SdfQueryResult b = accel.query(s, q);
            CHECK(a.segment == b.segment);
            CHECK(a.sdf == b.sdf);
            CHECK(a.distance == b.distance);
            CHECK(a.lambda == b.lambda);
            CHECK(a.closest_point.x == b.closest_point.x);
            CHECK(a.closest_point.y == b.closest_point.y);
        }
        // also probe sample points themselves and far-away points
        for (int i = 0; i < 40; ++i) {
            Vec2 q = s.samples[static_cast<int>(rng() % s.count())];
            CHECK(signed_distance(s, q).sdf == accel.query(s, q).sdf);
        }
        Vec2 far{57.0, -33.0};
        CHECK(signed_distance(s, far).sdf == accel.query(s, far).sdf);
    }
}

TEST_CASE("sdf_query_gradient: analytic circle gradient") {
    SketchParams p = SketchParams::circle(4, 1.0);
    SampledSketch s = sample_sketch(p, 400);
    Vec2 q{0.5, 0.0};
    SdfQueryResult r = signed_distance(s, q);
    Vec2 g = sdf_query_gradient(r, q);
    // -p/|p| up to the tangential quantization of the nearest segment
    CHECK((g - Vec2{-1.0, 0.0}).norm() <= 5e-3);
}

TEST_CASE("sdf gradient: eikonal property off the cut locus") {
    std::mt19937_64 rng(19);
    SketchParams p = oracle::random_sketch(rng, 4);
    SampledSketch s = sample_sketch(p, 64);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    int checked = 0;
    for (int i = 0; i < 400 && checked < 100; ++i) {
        Vec2 q{u(rng), u(rng)};
        SdfQueryResult r = signed_distance(s, q);
        if (r.distance < 1e-3) continue;
        ++checked;
        CHECK(sdf_query_gradient(r, q).norm() ==
              doctest::Approx(std::abs(r.sign_factor)).epsilon(1e-9));
    }
    CHECK(checked == 100);
}

TEST_CASE("sdf parameter gradient matches finite differences") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-1.8, 1.8);
    int checked = 0;
    while (checked < 100) {
        SketchParams p = oracle::random_sketch(rng, 2 + static_cast<int>(rng() % 4));
        Vec2 q{u(rng), u(rng)};
        SampledSketch s = sample_sketch(p, 24);
        SdfQueryResult r = signed_distance(s, q);
        // Skip near-degenerate queries: close to the curve or close to a
        // segment-Voronoi boundary (distance ties).
        if (r.distance < 1e-2) continue;
        double second = 1e300;
        for (int seg = 0; seg < s.count(); ++seg) {
            if (seg == r.segment || (seg + 1) % s.count() == r.segment ||
                (r.segment + 1) % s.count() == seg)
                continue;
            Vec2 a = s.samples[seg], b = s.samples[(seg + 1) % s.count()];
            Vec2 ab = b - a;
            double lam = std::clamp((q - a).dot(ab) / ab.norm2(), 0.0, 1.0);
            second = std::min(second, (q - (a + ab * lam)).norm());
        }
        if (second - r.distance < 1e-3) continue;
        ++checked;

        std::vector<double> analytic = sdf_parameter_gradient(p, 24, q);
        std::vector<double> vars;
        for (double v : p.radii) vars.push_back(v);
        for (double v : p.weights) vars.push_back(v);
        auto f = [&](std::span<const double> x) {
            SketchParams pp = p;
            for (int i = 0; i < pp.radius_count(); ++i) pp.radii[i] = x[i];
            for (int i = 0; i < pp.weight_count(); ++i)
                pp.weights[i] = x[pp.radius_count() + i];
            return signed_distance(sample_sketch(pp, 24), q).sdf;
        };
        std::vector<double> fd = finite_difference_gradient(f, vars, 1e-5);
        CHECK(oracle::gradient_rel_error(analytic, fd) <= 1e-4);
    }
}

TEST_CASE("joint radius scaling scales the sdf at the origin") {
    // All radii scaled jointly scales the whole sketch, so sdf(origin)
    // is linear in the scale: d sdf(0)/d log-scale = sdf(0).
    SketchParams p = SketchParams::circle(4, 1.0);
    std::vector<double> grad = sdf_parameter_gradient(p, 200, {0.0, 0.0});
    double joint = 0.0;
    for (int i = 0; i < p.radius_count(); ++i) joint += grad[i] * p.radii[i];
    double sdf0 = signed_distance(sample_sketch(p, 200), {0.0, 0.0}).sdf;
    CHECK(joint == doctest::Approx(sdf0).epsilon(1e-4));
}
