#include <algorithm>
#include <cmath>
#include <random>

#include "skex/error.hpp"
#include "skex/parallel.hpp"
#include "skex/shapeio.hpp"

namespace skex {

namespace {

// Closest point on triangle abc to p (Ericson, Real-Time Collision
// Detection).
Vec3 closest_point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    Vec3 ab = b - a, ac = c - a, ap = p - a;
    double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    Vec3 bp = p - b;
    double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));

    Vec3 cp = p - c;
    double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));

    double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

std::vector<double> distances_to_mesh(std::span<const Vec3> pts, const TriMesh& mesh,
                                      int threads) {
    std::vector<double> out(pts.size());
    parallel_for(static_cast<std::int64_t>(pts.size()), threads,
                 [&](std::int64_t b, std::int64_t e) {
                     for (std::int64_t i = b; i < e; ++i) out[i] = point_mesh_distance(pts[i], mesh);
                 });
    return out;
}

bool grids_match(const ScalarField& a, const ScalarField& b) {
    if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz) return false;
    double scale = 0.0;
    for (int i = 0; i < 3; ++i)
        scale = std::max({scale, std::abs(a.hi[i] - a.lo[i]), std::abs(b.hi[i] - b.lo[i])});
    double tol = 1e-9 * std::max(scale, 1.0);
    for (int i = 0; i < 3; ++i)
        if (std::abs(a.lo[i] - b.lo[i]) > tol || std::abs(a.hi[i] - b.hi[i]) > tol) return false;
    return true;
}

}  // namespace

double point_mesh_distance(const Vec3& p, const TriMesh& mesh) {
    double best = 1e300;
    for (const auto& f : mesh.faces) {
        Vec3 q = closest_point_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                        mesh.vertices[f[2]]);
        best = std::min(best, (p - q).norm2());
    }
    return std::sqrt(best);
}

std::vector<Vec3> sample_mesh_surface(const TriMesh& mesh, int n, std::uint64_t seed) {
    if (mesh.empty()) throw InvalidParameter("cannot sample an empty mesh surface");
    if (n < 1) throw InvalidParameter("need at least one surface sample");

    std::vector<double> cdf(mesh.faces.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        acc += 0.5 * e1.cross(e2).norm();
        cdf[i] = acc;
    }
    if (!(acc > 0.0)) throw InvalidParameter("mesh has zero surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        double r = unit(rng) * acc;
        std::size_t fi = std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin();
        if (fi >= mesh.faces.size()) fi = mesh.faces.size() - 1;
        const auto& f = mesh.faces[fi];
        double su = std::sqrt(unit(rng));
        double v = unit(rng);
        double w0 = 1.0 - su, w1 = su * (1.0 - v), w2 = su * v;
        out.push_back(mesh.vertices[f[0]] * w0 + mesh.vertices[f[1]] * w1 +
                      mesh.vertices[f[2]] * w2);
    }
    return out;
}

Metrics compute_metrics(const TriMesh& pred_mesh, const ScalarField& pred_grid,
                        const TriMesh& gt_mesh, const ScalarField& gt_grid,
                        int n_surface_samples, double f1_threshold, std::uint64_t seed,
                        int threads) {
    if (!grids_match(pred_grid, gt_grid))
        throw InvalidParameter("occupancy grids must share dims and bounds");

    Metrics m;
    // Volumetric IoU on binarized grids.
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt_grid.values.size(); ++i) {
        bool a = pred_grid.values[i] >= 0.5;
        bool b = gt_grid.values[i] >= 0.5;
        inter += a && b;
        uni += a || b;
    }
    m.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);

    std::vector<Vec3> ps = sample_mesh_surface(pred_mesh, n_surface_samples, seed);
    std::vector<Vec3> gs = sample_mesh_surface(gt_mesh, n_surface_samples, seed + 1);
    std::vector<double> d_pg = distances_to_mesh(ps, gt_mesh, threads);
    std::vector<double> d_gp = distances_to_mesh(gs, pred_mesh, threads);

    double sum_pg = 0.0, sum_gp = 0.0;
    for (double d : d_pg) sum_pg += d * d;
    for (double d : d_gp) sum_gp += d * d;
    m.cd = 0.5 * (sum_pg / d_pg.size() + sum_gp / d_gp.size());
    m.cd_scaled = m.cd * 1e3;

    double tau = f1_threshold;
    if (!(tau > 0.0)) tau = 0.02 * gt_mesh.bounds().diagonal();
    double hit_p = 0.0, hit_g = 0.0;
    for (double d : d_pg) hit_p += d <= tau;
    for (double d : d_gp) hit_g += d <= tau;
    double precision = hit_p / d_pg.size();
    double recall = hit_g / d_gp.size();
    m.f1 = precision + recall > 0.0 ? 100.0 * 2.0 * precision * recall / (precision + recall)
                                    : 0.0;
    return m;
}

}  // namespace skex
