#include "skex/sketch.hpp"

#include <numbers>
#include <string>

#include "skex/error.hpp"

namespace skex {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void bernstein3(double t, double b[4]) {
    double u = 1.0 - t;
    b[0] = u * u * u;
    b[1] = 3.0 * u * u * t;
    b[2] = 3.0 * u * t * t;
    b[3] = t * t * t;
}

void bernstein3_derivative(double t, double db[4]) {
    double u = 1.0 - t;
    db[0] = -3.0 * u * u;
    db[1] = 3.0 * u * u - 6.0 * u * t;
    db[2] = 6.0 * u * t - 3.0 * t * t;
    db[3] = 3.0 * t * t;
}

void check_curve_index(const ControlPolygon& poly, int k) {
    if (k < 0 || k >= poly.n_curves)
        throw InvalidParameter("curve index " + std::to_string(k) + " out of range");
}

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw InvalidParameter("curve parameter t=" + std::to_string(t) + " outside [0,1]");
}

}  // namespace

void SketchParams::validate() const {
    if (n_curves < 2) throw InvalidParameter("a sketch needs at least 2 curves");
    if (static_cast<int>(radii.size()) != radius_count())
        throw InvalidParameter("expected " + std::to_string(radius_count()) + " radii, got " +
                               std::to_string(radii.size()));
    if (static_cast<int>(weights.size()) != weight_count())
        throw InvalidParameter("expected " + std::to_string(weight_count()) + " weights, got " +
                               std::to_string(weights.size()));
    for (double r : radii)
        if (!(r > 0.0)) throw InvalidParameter("radii must be positive");
    for (double w : weights)
        if (!(w > 0.0)) throw InvalidParameter("weights must be positive");
}

SketchParams SketchParams::unit_defaults(int n_curves, Continuity mode, double start_angle) {
    SketchParams p;
    p.n_curves = n_curves;
    p.mode = mode;
    p.start_angle = start_angle;
    p.radii.assign(p.radius_count(), 1.0);
    p.weights.assign(p.weight_count(), 1.0);
    p.validate();
    return p;
}

SketchParams SketchParams::circle(int n_curves, double radius, Continuity mode,
                                  double start_angle) {
    if (!(radius > 0.0)) throw InvalidParameter("circle radius must be positive");
    SketchParams p;
    p.n_curves = n_curves;
    p.mode = mode;
    p.start_angle = start_angle;
    double inner = radius / std::cos(angle_offset(n_curves));
    double w = (1.0 + 2.0 * std::cos(std::numbers::pi / n_curves)) / 3.0;
    if (mode == Continuity::C0) {
        p.radii.resize(3 * n_curves);
        p.weights.assign(2 * n_curves, w);
        for (int k = 0; k < n_curves; ++k) {
            p.radii[3 * k] = radius;
            p.radii[3 * k + 1] = inner;
            p.radii[3 * k + 2] = inner;
        }
    } else {
        // rho_1 = rho_2 and w_1 = w_2 satisfy the C1 joint conditions, and the
        // derived joint radius is inner*cos(theta) = radius.
        p.radii.assign(2 * n_curves, inner);
        p.weights.assign(n_curves, w);
    }
    p.validate();
    return p;
}

SketchParams SketchParams::square(double half_extent) {
    if (!(half_extent > 0.0)) throw InvalidParameter("square half_extent must be positive");
    SketchParams p;
    p.n_curves = 4;
    p.mode = Continuity::C0;
    p.start_angle = std::numbers::pi / 4.0;  // corners on the diagonals
    double theta = angle_offset(4);
    double corner = half_extent * std::numbers::sqrt2;
    // Inner points lie on the edge between consecutive corners: the edge seen
    // from the origin at offset angle +-theta from the corner directions.
    double inner = half_extent / std::sin(std::numbers::pi / 4.0 + theta);
    p.radii.resize(12);
    p.weights.assign(8, 1.0);
    for (int k = 0; k < 4; ++k) {
        p.radii[3 * k] = corner;
        p.radii[3 * k + 1] = inner;
        p.radii[3 * k + 2] = inner;
    }
    p.validate();
    return p;
}

double angle_offset(int n_curves) {
    if (n_curves < 2) throw InvalidParameter("a sketch needs at least 2 curves");
    double half = kTwoPi / (4.0 * n_curves);
    return half + std::atan(std::tan(half) / 3.0);
}

std::vector<CurveAngles> derive_angles(int n_curves, double start_angle) {
    double theta = angle_offset(n_curves);
    double span = kTwoPi / n_curves;
    std::vector<CurveAngles> out(n_curves);
    for (int k = 0; k < n_curves; ++k) {
        double a0 = start_angle + k * span;
        out[k] = {a0, a0 + theta, a0 + span - theta, a0 + span};
    }
    return out;
}

ControlPolygon build_polygon(const SketchParams& params) {
    params.validate();
    int n = params.n_curves;
    auto angles = derive_angles(n, params.start_angle);

    ControlPolygon poly;
    poly.n_curves = n;
    poly.start_angle = params.start_angle;
    poly.points.resize(3 * n);
    poly.w1.resize(n);
    poly.w2.resize(n);

    auto on_angle = [](double rho, double a) { return Vec2{rho * std::cos(a), rho * std::sin(a)}; };

    if (params.mode == Continuity::C0) {
        for (int k = 0; k < n; ++k) {
            poly.points[3 * k] = on_angle(params.radii[3 * k], angles[k].a0);
            poly.points[3 * k + 1] = on_angle(params.radii[3 * k + 1], angles[k].a1);
            poly.points[3 * k + 2] = on_angle(params.radii[3 * k + 2], angles[k].a2);
            poly.w1[k] = params.weights[2 * k];
            poly.w2[k] = params.weights[2 * k + 1];
        }
        return poly;
    }

    // C1 mode: place the free inner points first, then derive each joint
    // P0^{k+1} = (rho2^k P1^{k+1} + rho1^{k+1} P2^k) / (rho2^k + rho1^{k+1})
    // and w1^{k+1} = w2^k rho2^k / rho1^{k+1}.
    for (int k = 0; k < n; ++k) {
        poly.points[3 * k + 1] = on_angle(params.radii[2 * k], angles[k].a1);
        poly.points[3 * k + 2] = on_angle(params.radii[2 * k + 1], angles[k].a2);
        poly.w2[k] = params.weights[k];
    }
    for (int k = 0; k < n; ++k) {
        int kn = (k + 1) % n;
        double a = params.radii[2 * k + 1];  // rho2^k
        double b = params.radii[2 * kn];     // rho1^{k+1}
        poly.points[3 * kn] = (poly.points[3 * kn + 1] * a + poly.points[3 * k + 2] * b) / (a + b);
        poly.w1[kn] = poly.w2[k] * a / b;
    }
    return poly;
}

Vec2 eval_curve(const ControlPolygon& poly, int k, double t) {
    check_curve_index(poly, k);
    check_t(t);
    double b[4];
    bernstein3(t, b);
    double w1 = poly.w1[k], w2 = poly.w2[k];
    Vec2 num = poly.p0(k) * b[0] + poly.p1(k) * (w1 * b[1]) + poly.p2(k) * (w2 * b[2]) +
               poly.p3(k) * b[3];
    double den = b[0] + w1 * b[1] + w2 * b[2] + b[3];
    return num / den;
}

Vec2 eval_curve(const SketchParams& params, int k, double t) {
    return eval_curve(build_polygon(params), k, t);
}

Vec2 eval_derivative(const ControlPolygon& poly, int k, double t) {
    check_curve_index(poly, k);
    check_t(t);
    double b[4], db[4];
    bernstein3(t, b);
    bernstein3_derivative(t, db);
    double w[4] = {1.0, poly.w1[k], poly.w2[k], 1.0};
    Vec2 P[4] = {poly.p0(k), poly.p1(k), poly.p2(k), poly.p3(k)};

    Vec2 num{}, dnum{};
    double den = 0.0, dden = 0.0;
    for (int i = 0; i < 4; ++i) {
        num += P[i] * (w[i] * b[i]);
        dnum += P[i] * (w[i] * db[i]);
        den += w[i] * b[i];
        dden += w[i] * db[i];
    }
    return (dnum * den - num * dden) / (den * den);
}

Vec2 eval_derivative(const SketchParams& params, int k, double t) {
    return eval_derivative(build_polygon(params), k, t);
}

CurvePointJacobian curve_point_jacobian(const ControlPolygon& poly, int k, double t) {
    check_curve_index(poly, k);
    check_t(t);
    double b[4];
    bernstein3(t, b);
    double w1 = poly.w1[k], w2 = poly.w2[k];
    double den = b[0] + w1 * b[1] + w2 * b[2] + b[3];
    Vec2 C = (poly.p0(k) * b[0] + poly.p1(k) * (w1 * b[1]) + poly.p2(k) * (w2 * b[2]) +
              poly.p3(k) * b[3]) /
             den;

    CurvePointJacobian jac;
    jac.b[0] = b[0] / den;
    jac.b[1] = w1 * b[1] / den;
    jac.b[2] = w2 * b[2] / den;
    jac.b[3] = b[3] / den;
    // dC/dw_i = B_i (P_i - C) / den
    jac.dw1 = (poly.p1(k) - C) * (b[1] / den);
    jac.dw2 = (poly.p2(k) - C) * (b[2] / den);
    return jac;
}

void polygon_backward(const SketchParams& params, const PolygonCotangents& cot,
                      std::span<double> d_radii, std::span<double> d_weights) {
    int n = params.n_curves;
    auto angles = derive_angles(n, params.start_angle);
    auto dir = [](double a) { return Vec2{std::cos(a), std::sin(a)}; };

    if (params.mode == Continuity::C0) {
        for (int k = 0; k < n; ++k) {
            d_radii[3 * k] += dir(angles[k].a0).dot(cot.d_points[3 * k]);
            d_radii[3 * k + 1] += dir(angles[k].a1).dot(cot.d_points[3 * k + 1]);
            d_radii[3 * k + 2] += dir(angles[k].a2).dot(cot.d_points[3 * k + 2]);
            d_weights[2 * k] += cot.d_w1[k];
            d_weights[2 * k + 1] += cot.d_w2[k];
        }
        return;
    }

    // C1 mode: joints and w1 are functions of the free radii and w2. With
    // a = rho2^k, b = rho1^{k+1} and unit bisector m at the joint angle, the
    // joint is P0^{k+1} = 2ab cos(theta)/(a+b) * m.
    double theta = angle_offset(n);
    for (int k = 0; k < n; ++k) {
        d_radii[2 * k] += dir(angles[k].a1).dot(cot.d_points[3 * k + 1]);
        d_radii[2 * k + 1] += dir(angles[k].a2).dot(cot.d_points[3 * k + 2]);
        d_weights[k] += cot.d_w2[k];
    }
    for (int k = 0; k < n; ++k) {
        int kn = (k + 1) % n;
        double a = params.radii[2 * k + 1];
        double b = params.radii[2 * kn];
        double w2 = params.weights[k];
        double s = a + b;
        double c = 2.0 * std::cos(theta);

        double d_joint = dir(angles[k].a3).dot(cot.d_points[3 * kn]);
        d_radii[2 * k + 1] += d_joint * c * b * b / (s * s);
        d_radii[2 * kn] += d_joint * c * a * a / (s * s);

        double d_w1 = cot.d_w1[kn];
        d_weights[k] += d_w1 * a / b;
        d_radii[2 * k + 1] += d_w1 * w2 / b;
        d_radii[2 * kn] -= d_w1 * w2 * a / (b * b);
    }
}

}  // namespace skex
