// Command-line front end: fitting, evaluation, binarization, export, metrics
// and a built-in oracle self-test.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

#include "skex/error.hpp"
#include "skex/fit.hpp"
#include "skex/mesh.hpp"
#include "skex/parallel.hpp"
#include "skex/sdf2d.hpp"
#include "skex/shapeio.hpp"

using namespace skex;

namespace {

// Exit codes: 0 ok, 2 usage, 3 missing file, 4 malformed file,
// 5 invalid parameters, 6 numeric failure.
enum ExitCode { kOk = 0, kUsage = 2, kMissingFile = 3, kParse = 4, kInvalid = 5, kNumeric = 6 };

int fail(int code, const std::string& msg) {
    std::cerr << "error code=" << code << " msg=\"" << msg << "\"\n";
    return code;
}

FitConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path, 0, e.what());
    }
    FitConfig c;
    try {
        if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("iterations")) c.iterations = j["iterations"].get<int>();
        if (j.contains("lambda_p")) c.lambda_p = j["lambda_p"].get<double>();
        if (j.contains("lambda_w")) c.lambda_w = j["lambda_w"].get<double>();
        if (j.contains("eta")) c.eta = j["eta"].get<double>();
        if (j.contains("eta_schedule")) {
            c.eta_schedule.factor = j["eta_schedule"].value("factor", 2.0);
            c.eta_schedule.every = j["eta_schedule"].value("every", 0);
        }
        if (j.contains("samples_per_curve")) c.samples_per_curve = j["samples_per_curve"].get<int>();
        if (j.contains("gradient_mode")) {
            std::string m = j["gradient_mode"].get<std::string>();
            if (m == "analytic")
                c.gradient_mode = GradientMode::Analytic;
            else if (m == "fd" || m == "finite_difference")
                c.gradient_mode = GradientMode::FiniteDifference;
            else
                throw ParseError(path, 0, "gradient_mode must be 'analytic' or 'fd'");
        }
        if (j.contains("fd_step")) c.fd_step = j["fd_step"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("restarts")) c.restarts = j["restarts"].get<int>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("use_accelerator")) c.use_accelerator = j["use_accelerator"].get<bool>();
        if (j.contains("optimize_weights")) c.optimize_weights = j["optimize_weights"].get<bool>();
        if (j.contains("max_testing_points"))
            c.max_testing_points = j["max_testing_points"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, std::string("bad config: ") + e.what());
    }
    return c;
}

// Flags shared by the two fit commands; a flag the user passed overrides the
// --config file value.
struct FitFlags {
    CLI::App* cmd = nullptr;
    std::string config_path;
    double learning_rate = 0, lambda_p = 0, lambda_w = 0, eta = 0;
    int iterations = 0, samples = 0, restarts = 0, eta_every = 0, max_points = 0;
    double eta_factor = 0;
    std::uint64_t seed = 0;
    int threads = 0;
    bool accel = false, no_accel = false, no_weights = false, fd_mode = false;

    void add(CLI::App* c) {
        cmd = c;
        c->add_option("--config", config_path, "JSON config file (flags override it)");
        c->add_option("--lr", learning_rate, "learning rate");
        c->add_option("--iters", iterations, "iterations");
        c->add_option("--lambda-p", lambda_p, "primitive loss weight");
        c->add_option("--lambda-w", lambda_w, "weight regularizer weight");
        c->add_option("--eta", eta, "occupancy sharpness");
        c->add_option("--eta-every", eta_every, "iterations between eta increases (0: fixed)");
        c->add_option("--eta-factor", eta_factor, "eta multiplier per schedule step");
        c->add_option("--samples", samples, "sketch samples per curve");
        c->add_option("--seed", seed, "random seed");
        c->add_option("--restarts", restarts, "random restarts (3D)");
        c->add_option("--threads", threads, "worker threads (0: auto)");
        c->add_option("--max-points", max_points, "testing point budget (3D)");
        c->add_flag("--accel", accel, "use the segment-grid accelerator");
        c->add_flag("--brute-force", no_accel, "force exact brute-force nearest search");
        c->add_flag("--no-weights", no_weights, "do not optimize rational weights");
        c->add_flag("--fd", fd_mode, "finite-difference gradients");
    }

    FitConfig resolve(const FitConfig& defaults) const {
        FitConfig c = config_path.empty() ? defaults : config_from_json_file(config_path);
        auto set = [&](const char* name) { return cmd->count(name) > 0; };
        if (set("--lr")) c.learning_rate = learning_rate;
        if (set("--iters")) c.iterations = iterations;
        if (set("--lambda-p")) c.lambda_p = lambda_p;
        if (set("--lambda-w")) c.lambda_w = lambda_w;
        if (set("--eta")) c.eta = eta;
        if (set("--eta-every")) c.eta_schedule.every = eta_every;
        if (set("--eta-factor")) c.eta_schedule.factor = eta_factor;
        if (set("--samples")) c.samples_per_curve = samples;
        if (set("--seed")) c.seed = seed;
        if (set("--restarts")) c.restarts = restarts;
        if (set("--threads")) c.threads = threads;
        if (set("--max-points")) c.max_testing_points = max_points;
        if (accel) c.use_accelerator = true;
        if (no_accel) c.use_accelerator = false;
        if (no_weights) c.optimize_weights = false;
        if (fd_mode) c.gradient_mode = GradientMode::FiniteDifference;
        return c;
    }
};

SketchParams sketch_from_model_file(const std::string& path, int prim_index) {
    // Accept either a sketch document or a shape model document.
    std::ifstream probe(path);
    if (!probe) throw IoError("cannot open " + path);
    try {
        return load_sketch(path);
    } catch (const ParseError&) {
    }
    ShapeModel model = load_model(path);
    if (prim_index < 0 || prim_index >= static_cast<int>(model.primitives.size()))
        throw InvalidParameter("primitive index out of range");
    return model.primitives[prim_index].sketch;
}

int run_selftest(int threads, bool quick);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"differentiable sketch-and-extrude geometry kernel"};
    app.require_subcommand(1);

    // ---- fit2d ----
    auto* fit2d = app.add_subcommand("fit2d", "fit a sketch to a 2D distance-field grid");
    std::string f2_target, f2_out = "sketch.json", f2_csv = "loss.csv", f2_init;
    int f2_curves = 4;
    std::string f2_mode = "c0";
    double f2_start_angle = 0.0;
    FitFlags f2_flags;
    fit2d->add_option("--target", f2_target, "target distance-field grid")->required();
    fit2d->add_option("--curves", f2_curves, "number of Bezier curves");
    fit2d->add_option("--mode", f2_mode, "continuity mode: c0 or c1");
    fit2d->add_option("--start-angle", f2_start_angle, "fixed start angle (radians)");
    fit2d->add_option("--init", f2_init, "initial sketch document");
    fit2d->add_option("--out", f2_out, "output sketch document");
    fit2d->add_option("--loss-csv", f2_csv, "per-iteration loss history");
    f2_flags.add(fit2d);

    // ---- fit3d ----
    auto* fit3d = app.add_subcommand("fit3d", "fit extrusions + CSG stump to a 3D occupancy grid");
    std::string f3_target, f3_soft = "model_soft.json", f3_hard = "model_hard.json",
                f3_csv = "loss.csv", f3_init;
    int f3_K = 4, f3_J = 4, f3_curves = 4;
    FitFlags f3_flags;
    fit3d->add_option("--target", f3_target, "target occupancy grid")->required();
    fit3d->add_option("--prims,-K", f3_K, "number of extrusion primitives");
    fit3d->add_option("--nodes,-J", f3_J, "number of intersection nodes");
    fit3d->add_option("--curves", f3_curves, "Bezier curves per sketch");
    fit3d->add_option("--init", f3_init, "initial model document (skips restarts)");
    fit3d->add_option("--out-soft", f3_soft, "output soft model");
    fit3d->add_option("--out-hard", f3_hard, "output binarized model");
    fit3d->add_option("--loss-csv", f3_csv, "per-iteration loss history");
    f3_flags.add(fit3d);

    // ---- eval-sdf ----
    auto* evalsdf = app.add_subcommand("eval-sdf", "evaluate a model/sketch field on a grid");
    std::string ev_model, ev_out = "field.grid", ev_mode = "occ3d";
    int ev_res = 64, ev_prim = 0, ev_samples = 100, ev_threads = 0;
    double ev_padding = 0.15;
    std::vector<double> ev_bounds;
    evalsdf->add_option("--model", ev_model, "model or sketch document")->required();
    evalsdf->add_option("--mode", ev_mode, "df2d | sdf2d | sdf3d | occ3d | occ3d-hard");
    evalsdf->add_option("--res", ev_res, "grid resolution per axis");
    evalsdf->add_option("--bounds", ev_bounds, "x0 x1 y0 y1 [z0 z1] (default: padded bbox)");
    evalsdf->add_option("--padding", ev_padding, "bbox padding fraction for default bounds");
    evalsdf->add_option("--prim-index", ev_prim, "primitive used by 2D/sdf3d modes");
    evalsdf->add_option("--samples", ev_samples, "sketch samples per curve");
    evalsdf->add_option("--threads", ev_threads, "worker threads");
    evalsdf->add_option("--out", ev_out, "output field file");

    // ---- binarize ----
    auto* bin = app.add_subcommand("binarize", "threshold a soft model's stump to binary");
    std::string bn_model, bn_out = "model_hard.json";
    double bn_threshold = 0.5;
    bin->add_option("--model", bn_model, "soft model document")->required();
    bin->add_option("--threshold", bn_threshold, "binarization threshold in (0,1)");
    bin->add_option("--out", bn_out, "output hard model");

    // ---- export ----
    auto* exp = app.add_subcommand("export", "export a hard model to CAD script or mesh");
    std::string ex_model, ex_out, ex_format = "scad";
    int ex_res = 64, ex_poly = 64, ex_samples = 100, ex_threads = 0;
    double ex_padding = 0.1;
    exp->add_option("--model", ex_model, "hard model document")->required();
    exp->add_option("--format", ex_format, "scad | stl | obj");
    exp->add_option("--out", ex_out, "output file")->required();
    exp->add_option("--polyline-samples", ex_poly, "polygon points per curve (scad)");
    exp->add_option("--res", ex_res, "occupancy grid resolution (meshes)");
    exp->add_option("--padding", ex_padding, "bbox padding fraction (meshes)");
    exp->add_option("--samples", ex_samples, "sketch samples per curve (meshes)");
    exp->add_option("--threads", ex_threads, "worker threads");

    // ---- metrics ----
    auto* met = app.add_subcommand("metrics", "compare two hard models");
    std::string mt_pred, mt_gt;
    int mt_res = 64, mt_samples = 10000, mt_threads = 0, mt_sketch_samples = 100;
    double mt_tau = -1.0, mt_padding = 0.1;
    std::uint64_t mt_seed = 0;
    met->add_option("--pred", mt_pred, "predicted model document")->required();
    met->add_option("--gt", mt_gt, "ground-truth model document")->required();
    met->add_option("--res", mt_res, "occupancy grid resolution");
    met->add_option("--samples", mt_samples, "surface samples per side");
    met->add_option("--f1-tau", mt_tau, "F1 distance threshold (<=0: 2% of gt diagonal)");
    met->add_option("--padding", mt_padding, "bbox padding fraction");
    met->add_option("--seed", mt_seed, "surface sampling seed");
    met->add_option("--threads", mt_threads, "worker threads");

    // ---- selftest ----
    auto* self = app.add_subcommand("selftest", "run the built-in oracle property suites");
    int st_threads = 0;
    bool st_quick = false;
    self->add_option("--threads", st_threads, "worker threads");
    self->add_flag("--quick", st_quick, "reduced trial counts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return fail(kUsage, e.get_name());
    }

    try {
        if (*fit2d) {
            FitConfig defaults;
            defaults.lambda_p = 0.0;
            defaults.lambda_w = 0.0;  // pure MSE boundary fit by default
            FitConfig config = f2_flags.resolve(defaults);
            ScalarField target = ScalarField::load(f2_target);
            Continuity mode;
            if (f2_mode == "c0")
                mode = Continuity::C0;
            else if (f2_mode == "c1")
                mode = Continuity::C1;
            else
                throw InvalidParameter("--mode must be c0 or c1");
            SketchParams init = f2_init.empty()
                                    ? SketchParams::unit_defaults(f2_curves, mode, f2_start_angle)
                                    : load_sketch(f2_init);
            Fit2dResult res = fit_sketch_2d(target, init, config);
            save_sketch(res.params, f2_out);
            save_loss_csv(res.report, f2_csv);
            std::printf("fit2d: final recon=%.6g best total=%.6g -> %s\n",
                        res.report.back().recon, res.best_loss, f2_out.c_str());
            return kOk;
        }

        if (*fit3d) {
            FitConfig config = f3_flags.resolve(FitConfig{});
            ScalarField target = ScalarField::load(f3_target);
            ShapeModel init;
            bool has_init = !f3_init.empty();
            if (has_init) init = load_model(f3_init);
            (void)f3_curves;
            Fit3dResult res =
                fit_shapes_3d(target, f3_K, f3_J, config, has_init ? &init : nullptr);
            save_model(res.soft, f3_soft);
            save_model(res.hard, f3_hard);
            save_loss_csv(res.report, f3_csv);
            std::printf("fit3d: best total=%.6g (restart %d) -> %s, %s\n", res.best_loss,
                        res.best_restart, f3_soft.c_str(), f3_hard.c_str());
            return kOk;
        }

        if (*evalsdf) {
            int threads = resolve_threads(ev_threads);
            bool two_d = ev_mode == "df2d" || ev_mode == "sdf2d";
            ScalarField out;
            if (two_d) {
                SketchParams sketch = sketch_from_model_file(ev_model, ev_prim);
                SampledSketch sampled = sample_sketch(sketch, ev_samples);
                Vec2 lo, hi;
                if (ev_bounds.size() == 4) {
                    lo = {ev_bounds[0], ev_bounds[2]};
                    hi = {ev_bounds[1], ev_bounds[3]};
                } else if (ev_bounds.empty()) {
                    Aabb2 box = sampled.bounds();
                    Vec2 pad = (box.hi - box.lo) * ev_padding;
                    lo = box.lo - pad;
                    hi = box.hi + pad;
                } else {
                    throw InvalidParameter("--bounds needs 4 values for 2D modes");
                }
                out = signed_distance_grid(sampled, lo, hi, ev_res, ev_res, threads);
                if (ev_mode == "df2d")
                    for (double& v : out.values) v = std::abs(v);
            } else {
                ShapeModel model = load_model(ev_model);
                Aabb3 box;
                if (ev_bounds.size() == 6) {
                    box.lo = {ev_bounds[0], ev_bounds[2], ev_bounds[4]};
                    box.hi = {ev_bounds[1], ev_bounds[3], ev_bounds[5]};
                } else if (ev_bounds.empty()) {
                    box = pad_bbox(model_bounds(model), ev_padding);
                } else {
                    throw InvalidParameter("--bounds needs 6 values for 3D modes");
                }
                out = ScalarField::make_grid3(box.lo, box.hi, ev_res, ev_res, ev_res);
                if (ev_mode == "sdf3d") {
                    if (ev_prim < 0 || ev_prim >= static_cast<int>(model.primitives.size()))
                        throw InvalidParameter("primitive index out of range");
                    const ExtrusionParams& prim = model.primitives[ev_prim];
                    SampledSketch sampled = sample_sketch(prim.sketch, ev_samples);
                    SegmentGrid accel(sampled);
                    std::vector<Vec3> pts = out.grid_points3();
                    parallel_for(static_cast<std::int64_t>(pts.size()), threads,
                                 [&](std::int64_t b, std::int64_t e) {
                                     for (std::int64_t i = b; i < e; ++i)
                                         out.values[i] = extrusion_sdf_detail(
                                                             prim.pose, prim.height, sampled,
                                                             &accel, pts[i])
                                                             .sdf;
                                 });
                } else if (ev_mode == "occ3d" || ev_mode == "occ3d-hard") {
                    ShapeModel m = model;
                    if (ev_mode == "occ3d-hard" && !m.is_hard()) m.stump = binarize(m.stump, 0.5);
                    out.values = model_occupancy(m, out.grid_points3(), ev_samples, threads);
                } else {
                    throw InvalidParameter("unknown --mode " + ev_mode);
                }
            }
            out.save(ev_out);
            std::printf("eval-sdf: %s -> %s\n", ev_mode.c_str(), ev_out.c_str());
            return kOk;
        }

        if (*bin) {
            ShapeModel model = load_model(bn_model);
            model.stump = binarize(model.stump, bn_threshold);
            save_model(model, bn_out);
            std::printf("binarize: %s -> %s\n", bn_model.c_str(), bn_out.c_str());
            return kOk;
        }

        if (*exp) {
            ShapeModel model = load_model(ex_model);
            if (!model.is_hard())
                throw InvalidParameter("export needs a hard model; run binarize first");
            if (ex_format == "scad") {
                save_scad(model, ex_poly, ex_out);
            } else if (ex_format == "stl" || ex_format == "obj") {
                Aabb3 box = pad_bbox(model_bounds(model), ex_padding);
                ScalarField occ = model_occupancy_grid(model, box.lo, box.hi, ex_res, ex_samples,
                                                       resolve_threads(ex_threads));
                TriMesh mesh = marching_cubes(occ, 0.5);
                save_mesh(mesh, ex_out);
            } else {
                throw InvalidParameter("--format must be scad, stl or obj");
            }
            std::printf("export: %s -> %s\n", ex_format.c_str(), ex_out.c_str());
            return kOk;
        }

        if (*met) {
            int threads = resolve_threads(mt_threads);
            ShapeModel pred = load_model(mt_pred);
            ShapeModel gt = load_model(mt_gt);
            if (!pred.is_hard() || !gt.is_hard())
                throw InvalidParameter("metrics needs hard models; run binarize first");
            Aabb3 box = model_bounds(gt);
            Aabb3 pb = model_bounds(pred);
            box.expand(pb.lo);
            box.expand(pb.hi);
            box = pad_bbox(box, mt_padding);
            ScalarField pg =
                model_occupancy_grid(pred, box.lo, box.hi, mt_res, mt_sketch_samples, threads);
            ScalarField gg =
                model_occupancy_grid(gt, box.lo, box.hi, mt_res, mt_sketch_samples, threads);
            TriMesh pm = marching_cubes(pg, 0.5);
            TriMesh gm = marching_cubes(gg, 0.5);
            Metrics m = compute_metrics(pm, pg, gm, gg, mt_samples, mt_tau, mt_seed, threads);
            std::printf("CD=%.8g CDx1e3=%.8g IoU=%.6g F1=%.6g\n", m.cd, m.cd_scaled, m.iou, m.f1);
            return kOk;
        }

        if (*self) return run_selftest(resolve_threads(st_threads), st_quick);
    } catch (const IoError& e) {
        return fail(kMissingFile, e.what());
    } catch (const ParseError& e) {
        return fail(kParse, e.what());
    } catch (const InvalidParameter& e) {
        return fail(kInvalid, e.what());
    } catch (const std::exception& e) {
        return fail(kNumeric, e.what());
    }
    return fail(kUsage, "no command");
}

namespace {

struct SelfTest {
    int failures = 0;
    void check(bool ok, const std::string& name, const std::string& detail = "") {
        if (ok) {
            std::printf("ok   %s\n", name.c_str());
        } else {
            ++failures;
            std::printf("FAIL %s%s%s\n", name.c_str(), detail.empty() ? "" : ": ",
                        detail.c_str());
        }
    }
};

int run_selftest(int threads, bool quick) {
    SelfTest t;
    int trials = quick ? 30 : 150;

    // Circle recovery on the recipe parameters.
    {
        double worst = 0.0;
        for (int n : {3, 4, 6, 8}) {
            ControlPolygon poly = build_polygon(SketchParams::circle(n, 1.0));
            for (int k = 0; k < n; ++k)
                for (int i = 0; i <= 500; ++i)
                    worst = std::max(worst, std::abs(eval_curve(poly, k, i / 500.0).norm() - 1.0));
        }
        t.check(worst <= 1e-9, "circle recovery", "max radial error " + std::to_string(worst));
    }

    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> band(-0.7, 0.7);
    auto random_sketch = [&](int n, Continuity mode) {
        SketchParams p;
        p.n_curves = n;
        p.mode = mode;
        p.radii.resize(p.radius_count());
        p.weights.resize(p.weight_count());
        for (double& r : p.radii) r = std::exp(band(rng));
        for (double& w : p.weights) w = std::exp(band(rng));
        return p;
    };

    // Star-shapedness: monotone polar angle and single ray crossings.
    {
        bool ok = true;
        std::uniform_real_distribution<double> uang(0.0, 2 * std::numbers::pi);
        for (int trial = 0; trial < trials && ok; ++trial) {
            int n = 2 + static_cast<int>(rng() % 7);
            SampledSketch s = sample_sketch(random_sketch(n, Continuity::C0), 32);
            double sweep = 0.0;
            for (int i = 0; i < s.count(); ++i) {
                double d = s.samples[(i + 1) % s.count()].angle() - s.samples[i].angle();
                while (d < -1e-12) d += 2 * std::numbers::pi;
                ok = ok && d < 2 * std::numbers::pi;
                sweep += d;
            }
            ok = ok && std::abs(sweep - 2 * std::numbers::pi) <= 1e-9;
            for (int ray = 0; ray < 8 && ok; ++ray) {
                Vec2 dir{std::cos(uang(rng)), std::sin(uang(rng))};
                int crossings = 0;
                for (int i = 0; i < s.count(); ++i) {
                    Vec2 a = s.samples[i], b = s.samples[(i + 1) % s.count()];
                    double ca = dir.cross(a), cb = dir.cross(b);
                    if ((ca > 0) == (cb > 0)) continue;
                    double alpha = ca / (ca - cb);
                    if ((a + (b - a) * alpha).dot(dir) > 0.0) ++crossings;
                }
                ok = ok && crossings == 1;
            }
        }
        t.check(ok, "star-shapedness");
    }

    // C1 stitching.
    {
        double worst = 0.0;
        for (int trial = 0; trial < trials; ++trial) {
            int n = 2 + static_cast<int>(rng() % 7);
            ControlPolygon poly = build_polygon(random_sketch(n, Continuity::C1));
            for (int k = 0; k < n; ++k) {
                Vec2 a = eval_derivative(poly, k, 1.0);
                Vec2 b = eval_derivative(poly, (k + 1) % n, 0.0);
                worst = std::max(worst, (a - b).norm() / std::max(a.norm(), 1.0));
            }
        }
        t.check(worst <= 1e-9, "c1 stitching", "max relative mismatch " + std::to_string(worst));
    }

    // 2D SDF oracles.
    {
        SampledSketch circle = sample_sketch(SketchParams::circle(4, 1.0), 100);
        ScalarField f = signed_distance_grid(circle, {-1.5, -1.5}, {1.5, 1.5}, 101, 101, threads);
        double worst = 0.0;
        for (int iy = 0; iy < 101; ++iy)
            for (int ix = 0; ix < 101; ++ix)
                worst = std::max(worst, std::abs(f.values[f.index(ix, iy)] -
                                                 (1.0 - f.point2(ix, iy).norm())));
        t.check(worst <= 1e-4, "sdf circle oracle", "max grid error " + std::to_string(worst));

        SampledSketch square = sample_sketch(SketchParams::square(0.5), 50);
        std::uniform_real_distribution<double> u(-1.2, 1.2);
        double worst_sq = 0.0;
        for (int i = 0; i < 2000; ++i) {
            Vec2 q{u(rng), u(rng)};
            double qx = std::abs(q.x) - 0.5, qy = std::abs(q.y) - 0.5;
            double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
            double inside = std::min(std::max(qx, qy), 0.0);
            worst_sq = std::max(worst_sq,
                                std::abs(signed_distance(square, q).sdf + outside + inside));
        }
        t.check(worst_sq <= 1e-6, "sdf square oracle", "max error " + std::to_string(worst_sq));
    }

    // Accelerator equivalence.
    {
        bool ok = true;
        for (int trial = 0; trial < (quick ? 3 : 10) && ok; ++trial) {
            SampledSketch s =
                sample_sketch(random_sketch(2 + static_cast<int>(rng() % 6), Continuity::C0), 40);
            SegmentGrid accel(s);
            std::uniform_real_distribution<double> u(-3.0, 3.0);
            for (int i = 0; i < 200 && ok; ++i) {
                Vec2 q{u(rng), u(rng)};
                SdfQueryResult a = signed_distance(s, q);
                SdfQueryResult b = accel.query(s, q);
                ok = a.sdf == b.sdf && a.segment == b.segment;
            }
        }
        t.check(ok, "segment-grid accelerator bit-identical");
    }

    // Extrusion oracle (capped cylinder) + complementarity + occupancy.
    {
        ExtrusionParams prim;
        prim.sketch = SketchParams::circle(4, 1.0);
        prim.height = 2.0;
        SampledSketch s = sample_sketch(prim.sketch, 400);
        double worst = 0.0;
        std::uniform_real_distribution<double> u(-1.6, 3.2);
        bool compl_ok = true;
        for (int i = 0; i < 4000; ++i) {
            Vec3 p{u(rng), u(rng), u(rng)};
            double d2 = std::hypot(p.x, p.y) - 1.0;
            double dz = std::max(-p.z, p.z - 2.0);
            double exact = -(std::hypot(std::max(d2, 0.0), std::max(dz, 0.0)) +
                             std::min(std::max(d2, dz), 0.0));
            ExtrusionSdfDetail det = extrusion_sdf_detail(prim.pose, prim.height, s, nullptr, p);
            worst = std::max(worst, std::abs(det.sdf - exact));
            double inner = std::max(std::min(std::min(det.hit.sdf, det.top), det.bot), 0.0);
            double mg = std::min(det.hit.sdf, 0.0), mt2 = std::min(det.top, 0.0),
                   mb = std::min(det.bot, 0.0);
            compl_ok = compl_ok && inner * (-std::sqrt(mg * mg + mt2 * mt2 + mb * mb)) == 0.0;
        }
        t.check(worst <= 2e-4, "extrusion cylinder oracle", "max error " + std::to_string(worst));
        t.check(compl_ok, "extrusion inner/outer complementarity");
        t.check(occupancy(0.0, 100.0) == 0.5 && occupancy(1.0, 100.0) > 1.0 - 1e-6,
                "occupancy logistic identities");
    }

    // Gradient spot checks against finite differences (2D fit objective).
    {
        ScalarField target = ScalarField::make_grid2({-1.4, -1.4}, {1.4, 1.4}, 15, 15);
        for (int iy = 0; iy < 15; ++iy)
            for (int ix = 0; ix < 15; ++ix)
                target.values[target.index(ix, iy)] =
                    std::abs(target.point2(ix, iy).norm() - 1.0);
        FitConfig config;
        config.samples_per_curve = 16;
        config.threads = 1;
        double worst = 0.0;
        Sketch2dProblem prob(target, SketchParams::unit_defaults(4), config);
        for (int trial = 0; trial < (quick ? 2 : 5); ++trial) {
            std::vector<double> vars = prob.pack(random_sketch(4, Continuity::C0));
            for (double& v : vars) v *= 0.4;
            std::vector<double> an = prob.gradient(vars);
            std::vector<double> fd = finite_difference_gradient(
                [&](std::span<const double> v) { return prob.loss(v); }, vars, 1e-5);
            double scale = 0.0;
            for (std::size_t i = 0; i < an.size(); ++i)
                scale = std::max(scale, std::max(std::abs(an[i]), std::abs(fd[i])));
            for (std::size_t i = 0; i < an.size(); ++i) {
                double mag = std::max(std::abs(an[i]), std::abs(fd[i]));
                if (mag > 1e-7 * std::max(scale, 1.0))
                    worst = std::max(worst, std::abs(an[i] - fd[i]) / mag);
            }
        }
        t.check(worst <= 1e-3, "2d analytic gradient vs finite differences",
                "max relative error " + std::to_string(worst));
    }

    // Stump boolean equivalence on exhaustive assignments.
    {
        bool ok = true;
        for (int config = 0; config < (quick ? 10 : 50) && ok; ++config) {
            int K = 1 + static_cast<int>(rng() % 6);
            int J = 1 + static_cast<int>(rng() % 6);
            StumpParams s = StumpParams::make(K, J, StumpMode::Hard);
            for (double& v : s.complement) v = static_cast<double>(rng() % 2);
            for (double& v : s.inter_select) v = static_cast<double>(rng() % 2);
            for (double& v : s.union_select) v = static_cast<double>(rng() % 2);
            CsgNode tree = extract_csg(s);
            for (int a = 0; a < (1 << K) && ok; ++a) {
                std::vector<unsigned char> flags(K);
                OccupancyMatrix O;
                O.points = 1;
                O.prims = K;
                O.v.resize(K);
                bool expect = false;
                for (int j = 0; j < J; ++j) {
                    if (s.union_select[j] != 1.0) continue;
                    bool any = false, all = true;
                    for (int k = 0; k < K; ++k) {
                        if (s.select(k, j) != 1.0) continue;
                        any = true;
                        bool v = (a >> k) & 1;
                        if (s.complement[k] == 1.0) v = !v;
                        all = all && v;
                    }
                    expect = expect || (any && all);
                }
                for (int k = 0; k < K; ++k) {
                    flags[k] = (a >> k) & 1;
                    O.v[k] = flags[k];
                }
                ok = stump_evaluate(s, O)[0] == (expect ? 1.0 : 0.0) &&
                     csg_evaluate(tree, flags) == expect;
            }
        }
        t.check(ok, "stump boolean equivalence + csg extraction");
    }

    // Serialization round trips.
    {
        ShapeModel m;
        m.eta = 50.0;
        ExtrusionParams prim;
        prim.sketch = random_sketch(4, Continuity::C0);
        prim.pose = RigidPose(Quat{0.9, 0.1, -0.2, 0.3}, Vec3{0.4, -0.5, 0.6});
        prim.height = 1.23456789;
        m.primitives.push_back(prim);
        m.stump = StumpParams::make(1, 1, StumpMode::Soft);
        m.stump.inter_select = {0.7};
        m.stump.union_select = {0.8};
        std::string a = model_to_json(m);
        std::string b = model_to_json(model_from_json(a));
        t.check(a == b, "model json round trip bit-identical");

        ScalarField f = ScalarField::make_grid2({0, 0}, {1, 1}, 3, 3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (double& v : f.values) v = u(rng);
        f.save("skex_selftest_field.grid");
        ScalarField g = ScalarField::load("skex_selftest_field.grid");
        bool same = g.values == f.values;
        std::remove("skex_selftest_field.grid");
        t.check(same, "field text round trip");
    }

    std::printf(t.failures == 0 ? "selftest: all suites passed\n"
                                : "selftest: %d suite(s) FAILED\n",
                t.failures);
    return t.failures == 0 ? kOk : 1;
}

}  // namespace
