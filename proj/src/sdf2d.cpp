#include "skex/sdf2d.hpp"

#include <algorithm>
#include <cmath>

#include "skex/error.hpp"
#include "skex/parallel.hpp"

namespace skex {

namespace {

// Denominator guard of the soft sign (Eq. of the sign field).
constexpr double kSignEpsilon = 1e-8;

struct SegmentHit {
    double dist2;
    double lambda;
};

// Closest point on segment [a,b]; shared by the brute-force scan and the
// grid accelerator so both produce identical floating-point results.
inline SegmentHit point_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    Vec2 ab = b - a;
    double l2 = ab.norm2();
    double lambda = 0.0;
    if (l2 > 0.0) lambda = std::clamp((p - a).dot(ab) / l2, 0.0, 1.0);
    Vec2 x{a.x + lambda * ab.x, a.y + lambda * ab.y};
    double dx = p.x - x.x, dy = p.y - x.y;
    return {dx * dx + dy * dy, lambda};
}

SdfQueryResult finish_query(const SampledSketch& sketch, Vec2 p, int seg, double lambda) {
    int m = sketch.count();
    int a = seg, b = (seg + 1) % m;
    Vec2 A = sketch.samples[a], B = sketch.samples[b];
    Vec2 x = A * (1.0 - lambda) + B * lambda;

    SdfQueryResult r;
    r.segment = seg;
    r.lambda = lambda;
    r.closest_point = x;
    r.distance = (p - x).norm();

    int nearest = lambda <= 0.5 ? a : b;
    r.curve = sketch.curve_of(nearest);
    r.t = sketch.t_of(nearest);

    Vec2 nrm = sketch.normals[a] * (1.0 - lambda) + sketch.normals[b] * lambda;
    double nn = nrm.norm();
    nrm = nn > 0.0 ? nrm / nn : sketch.normals[a];
    double d = nrm.dot(x - p);
    r.sign_factor = d / (std::abs(d) + kSignEpsilon);
    r.sdf = r.sign_factor * r.distance;
    return r;
}

}  // namespace

Aabb2 SampledSketch::bounds() const {
    Aabb2 box;
    for (const Vec2& s : samples) box.expand(s);
    return box;
}

SampledSketch sample_sketch(const ControlPolygon& poly, int n) {
    if (n < 4) throw InvalidParameter("need at least 4 samples per curve");
    int nc = poly.n_curves;
    SampledSketch out;
    out.n_curves = nc;
    out.samples_per_curve = n;
    out.samples.resize(static_cast<std::size_t>(nc) * n);
    out.normals.resize(out.samples.size());

    for (int k = 0; k < nc; ++k) {
        for (int i = 0; i < n; ++i) {
            double t = static_cast<double>(i) / n;
            int s = k * n + i;
            out.samples[s] = eval_curve(poly, k, t);
            Vec2 tangent = eval_derivative(poly, k, t);
            if (i == 0) {
                // C0 junction: average the two one-sided unit normals.
                int kp = (k + nc - 1) % nc;
                Vec2 n_prev = eval_derivative(poly, kp, 1.0).perp_cw().normalized();
                Vec2 n_next = tangent.perp_cw().normalized();
                out.normals[s] = (n_prev + n_next).normalized();
            } else {
                out.normals[s] = tangent.perp_cw().normalized();
            }
        }
    }
    // Zero tangents leave a zero normal; fall back to the neighbors' average
    // (or the radial direction if the neighborhood is degenerate too).
    int m = out.count();
    for (int s = 0; s < m; ++s) {
        if (out.normals[s].norm2() > 0.0) continue;
        Vec2 repaired =
            (out.normals[(s + m - 1) % m] + out.normals[(s + 1) % m]).normalized();
        if (repaired.norm2() == 0.0) repaired = out.samples[s].normalized();
        out.normals[s] = repaired;
    }
    return out;
}

SampledSketch sample_sketch(const SketchParams& params, int n) {
    return sample_sketch(build_polygon(params), n);
}

SdfQueryResult signed_distance(const SampledSketch& sketch, Vec2 p) {
    int m = sketch.count();
    if (m == 0) throw InvalidParameter("empty sketch");
    double best = 1e300;
    double best_lambda = 0.0;
    int best_seg = 0;
    for (int i = 0; i < m; ++i) {
        SegmentHit h = point_segment(sketch.samples[i], sketch.samples[(i + 1) % m], p);
        if (h.dist2 < best) {
            best = h.dist2;
            best_lambda = h.lambda;
            best_seg = i;
        }
    }
    return finish_query(sketch, p, best_seg, best_lambda);
}

SegmentGrid::SegmentGrid(const SampledSketch& sketch) {
    int m = sketch.count();
    Aabb2 box = sketch.bounds();
    double w = std::max(box.hi.x - box.lo.x, 1e-12);
    double h = std::max(box.hi.y - box.lo.y, 1e-12);
    // Aim for a handful of segments per cell.
    int res = std::max(4, static_cast<int>(std::sqrt(static_cast<double>(m))));
    cell_ = std::max(w, h) / res;
    x0_ = box.lo.x;
    y0_ = box.lo.y;
    nx_ = std::max(1, static_cast<int>(std::ceil(w / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(h / cell_)));
    cells_.resize(static_cast<std::size_t>(nx_) * ny_);

    for (int i = 0; i < m; ++i) {
        const Vec2& a = sketch.samples[i];
        const Vec2& b = sketch.samples[(i + 1) % m];
        int cx0 = std::clamp(static_cast<int>((std::min(a.x, b.x) - x0_) / cell_), 0, nx_ - 1);
        int cx1 = std::clamp(static_cast<int>((std::max(a.x, b.x) - x0_) / cell_), 0, nx_ - 1);
        int cy0 = std::clamp(static_cast<int>((std::min(a.y, b.y) - y0_) / cell_), 0, ny_ - 1);
        int cy1 = std::clamp(static_cast<int>((std::max(a.y, b.y) - y0_) / cell_), 0, ny_ - 1);
        for (int cy = cy0; cy <= cy1; ++cy)
            for (int cx = cx0; cx <= cx1; ++cx)
                cells_[static_cast<std::size_t>(cy) * nx_ + cx].push_back(i);
    }
}

SdfQueryResult SegmentGrid::query(const SampledSketch& sketch, Vec2 p) const {
    int m = sketch.count();
    if (m == 0) throw InvalidParameter("empty sketch");
    int cx = std::clamp(static_cast<int>((p.x - x0_) / cell_), 0, nx_ - 1);
    int cy = std::clamp(static_cast<int>((p.y - y0_) / cell_), 0, ny_ - 1);

    double best = 1e300;
    double best_lambda = 0.0;
    int best_seg = -1;
    auto scan_cell = [&](int gx, int gy) {
        for (int i : cells_[static_cast<std::size_t>(gy) * nx_ + gx]) {
            SegmentHit h = point_segment(sketch.samples[i], sketch.samples[(i + 1) % m], p);
            if (h.dist2 < best || (h.dist2 == best && i < best_seg)) {
                best = h.dist2;
                best_lambda = h.lambda;
                best_seg = i;
            }
        }
    };

    int max_ring = std::max(nx_, ny_);
    for (int ring = 0;; ++ring) {
        // Cells in ring r are at least (r-1)*cell away; once that exceeds the
        // best distance found, no unseen segment can win or tie.
        if (best_seg >= 0) {
            double lb = (ring - 1) * cell_;
            if (lb > 0.0 && lb * lb > best) break;
        }
        if (ring > max_ring && best_seg >= 0) break;

        int gx0 = cx - ring, gx1 = cx + ring;
        int gy0 = cy - ring, gy1 = cy + ring;
        for (int gx = gx0; gx <= gx1; ++gx) {
            if (gx < 0 || gx >= nx_) continue;
            if (gy0 >= 0) scan_cell(gx, gy0);
            if (gy1 < ny_ && ring > 0) scan_cell(gx, gy1);
        }
        for (int gy = gy0 + 1; gy < gy1; ++gy) {
            if (gy < 0 || gy >= ny_) continue;
            if (gx0 >= 0) scan_cell(gx0, gy);
            if (gx1 < nx_ && ring > 0) scan_cell(gx1, gy);
        }
    }
    return finish_query(sketch, p, best_seg, best_lambda);
}

std::vector<double> signed_distance_batch(const SampledSketch& sketch, std::span<const Vec2> pts,
                                          int threads) {
    std::vector<double> out(pts.size());
    parallel_for(static_cast<std::int64_t>(pts.size()), threads,
                 [&](std::int64_t b, std::int64_t e) {
                     for (std::int64_t i = b; i < e; ++i)
                         out[i] = signed_distance(sketch, pts[i]).sdf;
                 });
    return out;
}

ScalarField signed_distance_grid(const SampledSketch& sketch, Vec2 lo, Vec2 hi, int nx, int ny,
                                 int threads) {
    ScalarField f = ScalarField::make_grid2(lo, hi, nx, ny);
    parallel_for(static_cast<std::int64_t>(ny), threads, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t iy = b; iy < e; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                f.values[f.index(ix, static_cast<int>(iy))] =
                    signed_distance(sketch, f.point2(ix, static_cast<int>(iy))).sdf;
    });
    return f;
}

Vec2 sdf_query_gradient(const SdfQueryResult& r, Vec2 p) {
    if (r.distance <= 0.0) return {0.0, 0.0};
    return (p - r.closest_point) * (r.sign_factor / r.distance);
}

void sdf_backward(const SdfQueryResult& r, Vec2 p, double d_sdf, int sample_count,
                  SampleCotangents& cot) {
    distance_backward(r, p, d_sdf * r.sign_factor, sample_count, cot);
}

void distance_backward(const SdfQueryResult& r, Vec2 p, double d_distance, int sample_count,
                       SampleCotangents& cot) {
    if (r.distance <= 0.0) return;
    Vec2 d_x = (r.closest_point - p) * (d_distance / r.distance);
    int a = r.segment, b = (r.segment + 1) % sample_count;
    cot.d_samples[a] += d_x * (1.0 - r.lambda);
    cot.d_samples[b] += d_x * r.lambda;
}

void samples_to_polygon(const ControlPolygon& poly, const SampleCotangents& cot,
                        PolygonCotangents& pc) {
    int nc = poly.n_curves;
    int n = static_cast<int>(cot.d_samples.size()) / nc;
    for (int k = 0; k < nc; ++k) {
        for (int i = 0; i < n; ++i) {
            const Vec2& d = cot.d_samples[k * n + i];
            if (d.x == 0.0 && d.y == 0.0) continue;
            CurvePointJacobian jac = curve_point_jacobian(poly, k, static_cast<double>(i) / n);
            pc.d_points[3 * k] += d * jac.b[0];
            pc.d_points[3 * k + 1] += d * jac.b[1];
            pc.d_points[3 * k + 2] += d * jac.b[2];
            pc.d_points[3 * ((k + 1) % nc)] += d * jac.b[3];
            pc.d_w1[k] += jac.dw1.dot(d);
            pc.d_w2[k] += jac.dw2.dot(d);
        }
    }
}

void samples_backward(const SketchParams& params, const ControlPolygon& poly,
                      const SampleCotangents& cot, std::span<double> d_radii,
                      std::span<double> d_weights) {
    PolygonCotangents pc(poly.n_curves);
    samples_to_polygon(poly, cot, pc);
    polygon_backward(params, pc, d_radii, d_weights);
}

std::vector<double> sdf_parameter_gradient(const SketchParams& params, int n, Vec2 p) {
    ControlPolygon poly = build_polygon(params);
    SampledSketch sketch = sample_sketch(poly, n);
    SdfQueryResult r = signed_distance(sketch, p);
    SampleCotangents cot(sketch.count());
    sdf_backward(r, p, 1.0, sketch.count(), cot);
    std::vector<double> grad(params.free_parameter_count(), 0.0);
    std::span<double> g(grad);
    samples_backward(params, poly, cot, g.subspan(0, params.radius_count()),
                     g.subspan(params.radius_count()));
    return grad;
}

}  // namespace skex
