#include "skex/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>

#include "skex/error.hpp"
#include "skex/parallel.hpp"

namespace skex {

namespace {

double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    p = std::clamp(p, 1e-9, 1.0 - 1e-9);
    return std::log(p / (1.0 - p));
}

struct Adam {
    double lr;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    int t = 0;

    Adam(double lr_, std::size_t n) : lr(lr_), m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> x, std::span<const double> g) {
        ++t;
        double c1 = 1.0 - std::pow(beta1, t);
        double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

void check_finite(double total, int iteration) {
    if (!std::isfinite(total))
        throw std::runtime_error("non-finite loss at iteration " + std::to_string(iteration));
}

}  // namespace

void FitConfig::validate() const {
    if (iterations < 0) throw InvalidParameter("iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw InvalidParameter("learning_rate must be positive");
    if (!(lambda_p >= 0.0) || !(lambda_w >= 0.0))
        throw InvalidParameter("loss weights must be non-negative");
    if (!(eta > 0.0)) throw InvalidParameter("eta must be positive");
    if (samples_per_curve < 4) throw InvalidParameter("samples_per_curve must be >= 4");
    if (!(fd_step > 0.0 && fd_step <= 1e-2))
        throw InvalidParameter("fd_step must lie in (0, 1e-2]");
    if (restarts < 1) throw InvalidParameter("restarts must be >= 1");
    if (max_testing_points < 8) throw InvalidParameter("max_testing_points too small");
}

void save_loss_csv(const LossReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "iteration,recon,prim,weight_reg,total\n";
    char buf[160];
    for (const LossRecord& r : report) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.recon,
                      r.prim, r.weight_reg, r.total);
        out << buf;
    }
}

double loss_reconstruction(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size())
        throw InvalidParameter("occupancy vectors have different lengths");
    if (pred.empty()) throw InvalidParameter("empty occupancy vectors");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(pred.size());
}

double loss_primitive(std::span<const ExtrusionParams> prims, std::span<const Vec3> points,
                      int samples_per_curve, int threads) {
    if (prims.empty() || points.empty())
        throw InvalidParameter("loss_primitive needs at least one primitive and one point");
    double sum = 0.0;
    for (const ExtrusionParams& prim : prims) {
        SampledSketch sketch = sample_sketch(prim.sketch, samples_per_curve);
        SegmentGrid accel(sketch);
        std::vector<double> sq(points.size());
        parallel_for(static_cast<std::int64_t>(points.size()), threads,
                     [&](std::int64_t b, std::int64_t e) {
                         for (std::int64_t i = b; i < e; ++i) {
                             double s = extrusion_sdf_detail(prim.pose, prim.height, sketch,
                                                             &accel, points[i])
                                            .sdf;
                             sq[i] = s * s;
                         }
                     });
        sum += *std::min_element(sq.begin(), sq.end());
    }
    return sum / static_cast<double>(prims.size());
}

double loss_weight_reg(std::span<const SketchParams> sketches) {
    double sum = 0.0;
    for (const SketchParams& s : sketches) {
        ControlPolygon poly = build_polygon(s);
        for (int k = 0; k < poly.n_curves; ++k) {
            sum += (poly.w1[k] - 1.0) * (poly.w1[k] - 1.0);
            sum += (poly.w2[k] - 1.0) * (poly.w2[k] - 1.0);
        }
    }
    return sum;
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& f, std::span<const double> vars,
    double step) {
    std::vector<double> x(vars.begin(), vars.end());
    std::vector<double> grad(vars.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + step;
        double hi = f(x);
        x[i] = keep - step;
        double lo = f(x);
        x[i] = keep;
        grad[i] = (hi - lo) / (2.0 * step);
    }
    return grad;
}

// --- Sketch2dProblem --------------------------------------------------------

Sketch2dProblem::Sketch2dProblem(ScalarField target, SketchParams reference, FitConfig config)
    : target_(std::move(target)), reference_(std::move(reference)), config_(std::move(config)) {
    if (!target_.is_2d()) throw InvalidParameter("2D fitting expects a 2D target grid");
    reference_.validate();
    config_.validate();
    points_ = target_.grid_points2();
}

int Sketch2dProblem::var_count() const {
    return reference_.radius_count() +
           (config_.optimize_weights ? reference_.weight_count() : 0);
}

std::vector<double> Sketch2dProblem::pack(const SketchParams& params) const {
    std::vector<double> v;
    v.reserve(var_count());
    for (double r : params.radii) v.push_back(std::log(r));
    if (config_.optimize_weights)
        for (double w : params.weights) v.push_back(std::log(w));
    return v;
}

SketchParams Sketch2dProblem::unpack(std::span<const double> vars) const {
    SketchParams p = reference_;
    int nr = p.radius_count();
    for (int i = 0; i < nr; ++i) p.radii[i] = std::exp(vars[i]);
    if (config_.optimize_weights)
        for (int i = 0; i < p.weight_count(); ++i) p.weights[i] = std::exp(vars[nr + i]);
    return p;
}

double Sketch2dProblem::loss(std::span<const double> vars, LossRecord* rec) const {
    SketchParams params = unpack(vars);
    SampledSketch sketch = sample_sketch(params, config_.samples_per_curve);
    SegmentGrid accel(sketch);
    const SegmentGrid* acc = config_.use_accelerator ? &accel : nullptr;

    std::vector<double> sq(points_.size());
    parallel_for(static_cast<std::int64_t>(points_.size()), config_.threads,
                 [&](std::int64_t b, std::int64_t e) {
                     for (std::int64_t i = b; i < e; ++i) {
                         SdfQueryResult r = acc ? acc->query(sketch, points_[i])
                                                : signed_distance(sketch, points_[i]);
                         double d = r.distance - target_.values[i];
                         sq[i] = d * d;
                     }
                 });
    double recon = 0.0;
    for (double s : sq) recon += s;
    recon /= static_cast<double>(points_.size());

    double wreg = loss_weight_reg(std::span<const SketchParams>(&params, 1));
    double total = recon + config_.lambda_w * wreg;
    if (rec) {
        rec->recon = recon;
        rec->prim = 0.0;
        rec->weight_reg = wreg;
        rec->total = total;
    }
    return total;
}

std::vector<double> Sketch2dProblem::analytic_gradient(std::span<const double> vars,
                                                       LossRecord* rec) const {
    SketchParams params = unpack(vars);
    ControlPolygon poly = build_polygon(params);
    SampledSketch sketch = sample_sketch(poly, config_.samples_per_curve);
    SegmentGrid accel(sketch);
    const SegmentGrid* acc = config_.use_accelerator ? &accel : nullptr;

    std::vector<SdfQueryResult> hits(points_.size());
    parallel_for(static_cast<std::int64_t>(points_.size()), config_.threads,
                 [&](std::int64_t b, std::int64_t e) {
                     for (std::int64_t i = b; i < e; ++i)
                         hits[i] = acc ? acc->query(sketch, points_[i])
                                       : signed_distance(sketch, points_[i]);
                 });

    double recon = 0.0;
    SampleCotangents cot(sketch.count());
    double inv_m = 1.0 / static_cast<double>(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
        double d = hits[i].distance - target_.values[i];
        recon += d * d;
        distance_backward(hits[i], points_[i], 2.0 * d * inv_m, sketch.count(), cot);
    }
    recon *= inv_m;

    PolygonCotangents pc(poly.n_curves);
    samples_to_polygon(poly, cot, pc);
    double wreg = 0.0;
    for (int k = 0; k < poly.n_curves; ++k) {
        wreg += (poly.w1[k] - 1.0) * (poly.w1[k] - 1.0) +
                (poly.w2[k] - 1.0) * (poly.w2[k] - 1.0);
        pc.d_w1[k] += config_.lambda_w * 2.0 * (poly.w1[k] - 1.0);
        pc.d_w2[k] += config_.lambda_w * 2.0 * (poly.w2[k] - 1.0);
    }

    int nr = params.radius_count();
    int nw = params.weight_count();
    std::vector<double> d_radii(nr, 0.0), d_weights(nw, 0.0);
    polygon_backward(params, pc, d_radii, d_weights);

    std::vector<double> grad(var_count(), 0.0);
    for (int i = 0; i < nr; ++i) grad[i] = d_radii[i] * params.radii[i];
    if (config_.optimize_weights)
        for (int i = 0; i < nw; ++i) grad[nr + i] = d_weights[i] * params.weights[i];

    if (rec) {
        rec->recon = recon;
        rec->prim = 0.0;
        rec->weight_reg = wreg;
        rec->total = recon + config_.lambda_w * wreg;
    }
    return grad;
}

std::vector<double> Sketch2dProblem::gradient(std::span<const double> vars,
                                              LossRecord* rec) const {
    if (config_.gradient_mode == GradientMode::Analytic) return analytic_gradient(vars, rec);
    if (rec) loss(vars, rec);
    return finite_difference_gradient(
        [this](std::span<const double> v) { return loss(v); }, vars, config_.fd_step);
}

// --- Model3dProblem ---------------------------------------------------------

Model3dProblem::Model3dProblem(std::vector<Vec3> points, std::vector<double> target,
                               int k_primitives, int j_nodes, SketchParams sketch_template,
                               FitConfig config)
    : eta(config.eta),
      points_(std::move(points)),
      target_(std::move(target)),
      k_(k_primitives),
      j_(j_nodes),
      template_(std::move(sketch_template)),
      config_(std::move(config)) {
    if (k_ < 1 || j_ < 1) throw InvalidParameter("K and J must be >= 1");
    if (points_.size() != target_.size())
        throw InvalidParameter("testing point and target counts differ");
    if (points_.empty()) throw InvalidParameter("no testing points");
    template_.validate();
    config_.validate();
    int nr = template_.radius_count();
    int nw = config_.optimize_weights ? template_.weight_count() : 0;
    per_prim_ = nr + nw + 8;  // radii, weights, quat(4), translation(3), log h
}

int Model3dProblem::var_count() const { return k_ * per_prim_ + k_ + k_ * j_ + j_; }

std::vector<double> Model3dProblem::pack(const ShapeModel& model) const {
    if (static_cast<int>(model.primitives.size()) != k_ || model.stump.k_primitives != k_ ||
        model.stump.j_nodes != j_)
        throw InvalidParameter("model does not match problem dimensions");
    std::vector<double> v;
    v.reserve(var_count());
    for (const ExtrusionParams& prim : model.primitives) {
        for (double r : prim.sketch.radii) v.push_back(std::log(r));
        if (config_.optimize_weights)
            for (double w : prim.sketch.weights) v.push_back(std::log(w));
        const Quat& q = prim.pose.rotation;
        v.insert(v.end(), {q.w, q.x, q.y, q.z});
        const Vec3& t = prim.pose.translation;
        v.insert(v.end(), {t.x, t.y, t.z});
        v.push_back(std::log(prim.height));
    }
    for (double c : model.stump.complement) v.push_back(logit(c));
    for (double s : model.stump.inter_select) v.push_back(logit(s));
    for (double u : model.stump.union_select) v.push_back(logit(u));
    return v;
}

ShapeModel Model3dProblem::unpack(std::span<const double> vars) const {
    ShapeModel model;
    model.eta = eta;
    model.primitives.reserve(k_);
    int nr = template_.radius_count();
    int nw = config_.optimize_weights ? template_.weight_count() : 0;
    for (int k = 0; k < k_; ++k) {
        std::span<const double> b = vars.subspan(static_cast<std::size_t>(k) * per_prim_,
                                                 per_prim_);
        ExtrusionParams prim;
        prim.sketch = template_;
        for (int i = 0; i < nr; ++i) prim.sketch.radii[i] = std::exp(b[i]);
        if (config_.optimize_weights)
            for (int i = 0; i < template_.weight_count(); ++i)
                prim.sketch.weights[i] = std::exp(b[nr + i]);
        prim.pose = RigidPose(Quat{b[nr + nw], b[nr + nw + 1], b[nr + nw + 2], b[nr + nw + 3]},
                              Vec3{b[nr + nw + 4], b[nr + nw + 5], b[nr + nw + 6]});
        prim.height = std::exp(b[nr + nw + 7]);
        model.primitives.push_back(std::move(prim));
    }
    StumpParams stump = StumpParams::make(k_, j_, StumpMode::Soft);
    std::size_t off = static_cast<std::size_t>(k_) * per_prim_;
    for (int k = 0; k < k_; ++k) stump.complement[k] = logistic(vars[off + k]);
    for (int i = 0; i < k_ * j_; ++i) stump.inter_select[i] = logistic(vars[off + k_ + i]);
    for (int j = 0; j < j_; ++j) stump.union_select[j] = logistic(vars[off + k_ + k_ * j_ + j]);
    model.stump = std::move(stump);
    return model;
}

double Model3dProblem::loss(std::span<const double> vars, LossRecord* rec) const {
    ShapeModel model = unpack(vars);
    int m = static_cast<int>(points_.size());

    std::vector<SampledSketch> sketches;
    std::vector<SegmentGrid> accels;
    sketches.reserve(k_);
    for (const ExtrusionParams& prim : model.primitives)
        sketches.push_back(sample_sketch(prim.sketch, config_.samples_per_curve));
    if (config_.use_accelerator) {
        accels.reserve(k_);
        for (const SampledSketch& s : sketches) accels.emplace_back(s);
    }

    std::vector<double> sdf(static_cast<std::size_t>(m) * k_);
    std::vector<double> occ(sdf.size());
    parallel_for(m, config_.threads, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            for (int k = 0; k < k_; ++k) {
                double s = extrusion_sdf_detail(model.primitives[k].pose,
                                                model.primitives[k].height, sketches[k],
                                                config_.use_accelerator ? &accels[k] : nullptr,
                                                points_[i])
                               .sdf;
                sdf[i * k_ + k] = s;
                occ[i * k_ + k] = occupancy(s, eta);
            }
        }
    });

    double recon = 0.0;
    for (int i = 0; i < m; ++i) {
        std::span<const double> row(occ.data() + static_cast<std::size_t>(i) * k_, k_);
        double f = stump_evaluate_point(model.stump, row).value;
        double d = f - target_[i];
        recon += d * d;
    }
    recon /= m;

    double prim_loss = 0.0;
    for (int k = 0; k < k_; ++k) {
        double best = 1e300;
        for (int i = 0; i < m; ++i) best = std::min(best, sdf[i * k_ + k] * sdf[i * k_ + k]);
        prim_loss += best;
    }
    prim_loss /= k_;

    std::vector<SketchParams> sks;
    sks.reserve(k_);
    for (const ExtrusionParams& p : model.primitives) sks.push_back(p.sketch);
    double wreg = loss_weight_reg(sks);

    double total = recon + config_.lambda_p * prim_loss + config_.lambda_w * wreg;
    if (rec) {
        rec->recon = recon;
        rec->prim = prim_loss;
        rec->weight_reg = wreg;
        rec->total = total;
    }
    return total;
}

std::vector<double> Model3dProblem::analytic_gradient(std::span<const double> vars,
                                                      LossRecord* rec) const {
    ShapeModel model = unpack(vars);
    int m = static_cast<int>(points_.size());
    int nr = template_.radius_count();
    int nw = config_.optimize_weights ? template_.weight_count() : 0;

    std::vector<ControlPolygon> polys;
    std::vector<SampledSketch> sketches;
    std::vector<SegmentGrid> accels;
    polys.reserve(k_);
    sketches.reserve(k_);
    for (const ExtrusionParams& prim : model.primitives) {
        polys.push_back(build_polygon(prim.sketch));
        sketches.push_back(sample_sketch(polys.back(), config_.samples_per_curve));
    }
    if (config_.use_accelerator) {
        accels.reserve(k_);
        for (const SampledSketch& s : sketches) accels.emplace_back(s);
    }

    // Forward: per (point, primitive) extrusion details + occupancies.
    std::vector<ExtrusionSdfDetail> details(static_cast<std::size_t>(m) * k_);
    std::vector<double> occ(details.size());
    parallel_for(m, config_.threads, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            for (int k = 0; k < k_; ++k) {
                ExtrusionSdfDetail d = extrusion_sdf_detail(
                    model.primitives[k].pose, model.primitives[k].height, sketches[k],
                    config_.use_accelerator ? &accels[k] : nullptr, points_[i]);
                details[i * k_ + k] = d;
                occ[i * k_ + k] = occupancy(d.sdf, eta);
            }
        }
    });

    std::vector<StumpPointEval> evals(m);
    parallel_for(m, config_.threads, [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            std::span<const double> row(occ.data() + static_cast<std::size_t>(i) * k_, k_);
            evals[i] = stump_evaluate_point(model.stump, row);
        }
    });

    // Losses.
    double recon = 0.0;
    for (int i = 0; i < m; ++i) {
        double d = evals[i].value - target_[i];
        recon += d * d;
    }
    recon /= m;

    std::vector<int> prim_argmin(k_, 0);
    double prim_loss = 0.0;
    for (int k = 0; k < k_; ++k) {
        double best = 1e300;
        int arg = 0;
        for (int i = 0; i < m; ++i) {
            double sq = details[i * k_ + k].sdf * details[i * k_ + k].sdf;
            if (sq < best) {
                best = sq;
                arg = i;
            }
        }
        prim_loss += best;
        prim_argmin[k] = arg;
    }
    prim_loss /= k_;

    double wreg = 0.0;
    for (int k = 0; k < k_; ++k) {
        const ControlPolygon& poly = polys[k];
        for (int c = 0; c < poly.n_curves; ++c)
            wreg += (poly.w1[c] - 1.0) * (poly.w1[c] - 1.0) +
                    (poly.w2[c] - 1.0) * (poly.w2[c] - 1.0);
    }

    // Backward.
    std::vector<double> grad(var_count(), 0.0);
    std::vector<double> d_sdf(details.size(), 0.0);
    std::vector<double> d_c(k_, 0.0), d_s(static_cast<std::size_t>(k_) * j_, 0.0),
        d_u(j_, 0.0);

    double inv_m = 2.0 / m;
    for (int i = 0; i < m; ++i) {
        const StumpPointEval& ev = evals[i];
        if (ev.arg_j < 0) continue;
        double d_f = inv_m * (ev.value - target_[i]);
        int j = ev.arg_j;
        double u = model.stump.union_select[j];
        if (ev.arg_k < 0) {
            d_u[j] += d_f;  // node value is the constant 1
            continue;
        }
        int k = ev.arg_k;
        double o = occ[i * k_ + k];
        double c = model.stump.complement[k];
        double s = model.stump.select(k, j);
        double oc = c + o - 2.0 * c * o;
        double node = 1.0 - s * (1.0 - oc);

        d_u[j] += d_f * node;
        double d_node = d_f * u;
        d_s[static_cast<std::size_t>(k) * j_ + j] += d_node * (oc - 1.0);
        double d_oc = d_node * s;
        d_c[k] += d_oc * (1.0 - 2.0 * o);
        double d_o = d_oc * (1.0 - 2.0 * c);
        d_sdf[i * k_ + k] += d_o * eta * o * (1.0 - o);
    }
    for (int k = 0; k < k_; ++k) {
        int i = prim_argmin[k];
        d_sdf[i * k_ + k] += config_.lambda_p * (2.0 / k_) * details[i * k_ + k].sdf;
    }

    // Per-primitive accumulation through the extrusion, pose and sketch.
    for (int k = 0; k < k_; ++k) {
        const ExtrusionParams& prim = model.primitives[k];
        std::span<const double> b = vars.subspan(static_cast<std::size_t>(k) * per_prim_,
                                                 per_prim_);
        Quat raw{b[nr + nw], b[nr + nw + 1], b[nr + nw + 2], b[nr + nw + 3]};
        std::span<double> gb = std::span<double>(grad).subspan(
            static_cast<std::size_t>(k) * per_prim_, per_prim_);

        SampleCotangents cot(sketches[k].count());
        double d_h = 0.0;
        double d_quat[4] = {0, 0, 0, 0};
        Vec3 d_trans{}, d_point{};

        for (int i = 0; i < m; ++i) {
            double ds = d_sdf[i * k_ + k];
            if (ds == 0.0) continue;
            const ExtrusionSdfDetail& det = details[i * k_ + k];
            ExtrusionBranchGrads bg = extrusion_sdf_backward(det, ds);
            d_h += bg.d_h;
            Vec2 foot{det.local.x, det.local.y};
            Vec2 qg = sdf_query_gradient(det.hit, foot);
            Vec3 d_local{bg.d_g * qg.x, bg.d_g * qg.y, bg.d_z};
            to_local_backward(raw, prim.pose.translation, points_[i], d_local, d_quat, d_trans,
                              d_point);
            sdf_backward(det.hit, foot, bg.d_g, sketches[k].count(), cot);
        }

        PolygonCotangents pc(polys[k].n_curves);
        samples_to_polygon(polys[k], cot, pc);
        for (int c = 0; c < polys[k].n_curves; ++c) {
            pc.d_w1[c] += config_.lambda_w * 2.0 * (polys[k].w1[c] - 1.0);
            pc.d_w2[c] += config_.lambda_w * 2.0 * (polys[k].w2[c] - 1.0);
        }
        std::vector<double> d_radii(nr, 0.0), d_weights(template_.weight_count(), 0.0);
        polygon_backward(prim.sketch, pc, d_radii, d_weights);

        for (int i = 0; i < nr; ++i) gb[i] += d_radii[i] * prim.sketch.radii[i];
        if (config_.optimize_weights)
            for (int i = 0; i < template_.weight_count(); ++i)
                gb[nr + i] += d_weights[i] * prim.sketch.weights[i];
        for (int c = 0; c < 4; ++c) gb[nr + nw + c] += d_quat[c];
        gb[nr + nw + 4] += d_trans.x;
        gb[nr + nw + 5] += d_trans.y;
        gb[nr + nw + 6] += d_trans.z;
        gb[nr + nw + 7] += d_h * prim.height;
    }

    // Stump logits.
    std::size_t off = static_cast<std::size_t>(k_) * per_prim_;
    for (int k = 0; k < k_; ++k) {
        double c = model.stump.complement[k];
        grad[off + k] += d_c[k] * c * (1.0 - c);
    }
    for (int i = 0; i < k_ * j_; ++i) {
        double s = model.stump.inter_select[i];
        grad[off + k_ + i] += d_s[i] * s * (1.0 - s);
    }
    for (int j = 0; j < j_; ++j) {
        double u = model.stump.union_select[j];
        grad[off + k_ + k_ * j_ + j] += d_u[j] * u * (1.0 - u);
    }

    if (rec) {
        rec->recon = recon;
        rec->prim = prim_loss;
        rec->weight_reg = wreg;
        rec->total = recon + config_.lambda_p * prim_loss + config_.lambda_w * wreg;
    }
    return grad;
}

std::vector<double> Model3dProblem::gradient(std::span<const double> vars,
                                             LossRecord* rec) const {
    if (config_.gradient_mode == GradientMode::Analytic) return analytic_gradient(vars, rec);
    if (rec) loss(vars, rec);
    return finite_difference_gradient(
        [this](std::span<const double> v) { return loss(v); }, vars, config_.fd_step);
}

// --- fitting loops ----------------------------------------------------------

Fit2dResult fit_sketch_2d(const ScalarField& target, const SketchParams& init,
                          const FitConfig& config) {
    config.validate();
    Sketch2dProblem problem(target, init, config);
    std::vector<double> vars = problem.pack(init);
    Adam adam(config.learning_rate, vars.size());

    Fit2dResult out;
    out.best_loss = 1e300;
    std::vector<double> best_vars = vars;
    for (int it = 0; it <= config.iterations; ++it) {
        LossRecord rec;
        rec.iteration = it;
        if (it < config.iterations) {
            std::vector<double> g = problem.gradient(vars, &rec);
            check_finite(rec.total, it);
            out.report.push_back(rec);
            if (rec.total < out.best_loss) {
                out.best_loss = rec.total;
                best_vars = vars;
            }
            adam.step(vars, g);
        } else {
            problem.loss(vars, &rec);
            check_finite(rec.total, it);
            out.report.push_back(rec);
            if (rec.total < out.best_loss) {
                out.best_loss = rec.total;
                best_vars = vars;
            }
        }
    }
    out.params = problem.unpack(best_vars);
    return out;
}

ShapeModel random_model_init(const ScalarField& target, int k_primitives, int j_nodes,
                             const SketchParams& sketch_template, double eta,
                             std::uint64_t seed) {
    if (target.is_2d()) throw InvalidParameter("3D fitting expects a 3D target grid");
    // Bounding box of occupied cells; the whole grid if the target is empty.
    Aabb3 box;
    bool any = false;
    for (int iz = 0; iz < target.nz; ++iz)
        for (int iy = 0; iy < target.ny; ++iy)
            for (int ix = 0; ix < target.nx; ++ix)
                if (target.values[target.index(ix, iy, iz)] > 0.5) {
                    box.expand(target.point3(ix, iy, iz));
                    any = true;
                }
    if (!any) {
        box.expand({target.lo[0], target.lo[1], target.lo[2]});
        box.expand({target.hi[0], target.hi[1], target.hi[2]});
    }
    Vec3 ext = box.extent();
    double scale = (ext.x + ext.y + ext.z) / 3.0;
    if (!(scale > 0.0)) scale = 1.0;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    ShapeModel model;
    model.eta = eta;
    for (int k = 0; k < k_primitives; ++k) {
        ExtrusionParams prim;
        prim.sketch = sketch_template;
        double r0 = 0.25 * scale;
        for (double& r : prim.sketch.radii) r = r0 * std::exp(0.1 * gauss(rng));
        for (double& w : prim.sketch.weights) w = std::exp(0.05 * gauss(rng));
        Quat q{1.0, 0.2 * gauss(rng), 0.2 * gauss(rng), 0.2 * gauss(rng)};
        Vec3 t{box.lo.x + ext.x * (0.2 + 0.6 * unit(rng)),
               box.lo.y + ext.y * (0.2 + 0.6 * unit(rng)),
               box.lo.z + ext.z * (0.2 + 0.6 * unit(rng))};
        prim.pose = RigidPose(q, t);
        prim.height = 0.5 * scale * std::exp(0.2 * gauss(rng));
        // Center the extrusion on its anchor point.
        prim.pose.translation -= prim.pose.rotation.rotate({0, 0, prim.height / 2});
        model.primitives.push_back(std::move(prim));
    }

    StumpParams stump = StumpParams::make(k_primitives, j_nodes, StumpMode::Soft);
    for (int k = 0; k < k_primitives; ++k)
        stump.complement[k] = logistic(-3.0 + 0.1 * gauss(rng));
    for (int k = 0; k < k_primitives; ++k)
        for (int j = 0; j < j_nodes; ++j)
            stump.select(k, j) =
                logistic(((j % k_primitives) == k ? 2.0 : -2.0) + 0.1 * gauss(rng));
    for (int j = 0; j < j_nodes; ++j) stump.union_select[j] = logistic(2.0 + 0.1 * gauss(rng));
    model.stump = std::move(stump);
    return model;
}

namespace {

// Uniform stride that brings a grid under the testing-point budget.
int grid_stride(const ScalarField& f, int max_points) {
    int stride = 1;
    auto count = [&](int s) {
        std::int64_t nx = (f.nx + s - 1) / s, ny = (f.ny + s - 1) / s, nz = (f.nz + s - 1) / s;
        return nx * ny * nz;
    };
    while (count(stride) > max_points) ++stride;
    return stride;
}

}  // namespace

Fit3dResult fit_shapes_3d(const ScalarField& target, int k_primitives, int j_nodes,
                          const FitConfig& config, const ShapeModel* init) {
    config.validate();
    if (target.is_2d()) throw InvalidParameter("3D fitting expects a 3D target grid");
    if (k_primitives < 1 || j_nodes < 1) throw InvalidParameter("K and J must be >= 1");

    int stride = grid_stride(target, config.max_testing_points);
    std::vector<Vec3> points;
    std::vector<double> values;
    for (int iz = 0; iz < target.nz; iz += stride)
        for (int iy = 0; iy < target.ny; iy += stride)
            for (int ix = 0; ix < target.nx; ix += stride) {
                points.push_back(target.point3(ix, iy, iz));
                values.push_back(target.values[target.index(ix, iy, iz)]);
            }
    for (double v : values)
        if (!(v >= 0.0 && v <= 1.0))
            throw InvalidParameter("target occupancies must lie in [0,1]");

    SketchParams sketch_template =
        init && !init->primitives.empty()
            ? init->primitives.front().sketch
            : SketchParams::unit_defaults(4, Continuity::C0, 0.0);

    int restarts = init ? 1 : config.restarts;
    Fit3dResult out;
    out.best_loss = 1e300;

    for (int r = 0; r < restarts; ++r) {
        Model3dProblem problem(points, values, k_primitives, j_nodes, sketch_template, config);
        problem.eta = config.eta;
        ShapeModel start = init ? *init
                                : random_model_init(target, k_primitives, j_nodes,
                                                    sketch_template, config.eta,
                                                    config.seed + static_cast<std::uint64_t>(r));
        std::vector<double> vars = problem.pack(start);
        Adam adam(config.learning_rate, vars.size());

        LossReport report;
        double stage_best = 1e300;
        std::vector<double> stage_best_vars = vars;
        for (int it = 0; it <= config.iterations; ++it) {
            if (config.eta_schedule.enabled() && it > 0 && it % config.eta_schedule.every == 0 &&
                it < config.iterations) {
                problem.eta = std::min(problem.eta * config.eta_schedule.factor, 1e6);
                stage_best = 1e300;  // new objective scale; restart best tracking
            }
            LossRecord rec;
            rec.iteration = it;
            if (it < config.iterations) {
                std::vector<double> g = problem.gradient(vars, &rec);
                check_finite(rec.total, it);
                report.push_back(rec);
                if (rec.total < stage_best) {
                    stage_best = rec.total;
                    stage_best_vars = vars;
                }
                adam.step(vars, g);
            } else {
                problem.loss(vars, &rec);
                check_finite(rec.total, it);
                report.push_back(rec);
                if (rec.total < stage_best) {
                    stage_best = rec.total;
                    stage_best_vars = vars;
                }
            }
        }

        if (stage_best < out.best_loss) {
            out.best_loss = stage_best;
            out.best_restart = r;
            out.report = std::move(report);
            Model3dProblem final_problem(points, values, k_primitives, j_nodes, sketch_template,
                                         config);
            final_problem.eta = problem.eta;
            out.soft = final_problem.unpack(stage_best_vars);
        }
    }

    out.hard = out.soft;
    out.hard.stump = binarize(out.soft.stump, 0.5);
    return out;
}

}  // namespace skex
