// carotid: command-line front end for the wall-analysis toolkit.
//
// Subcommands: rasterize, cimt, evaluate, split, train-risk, uncertainty,
// hemo, gradcheck. Exit codes: 0 success, 1 validation error, 2 I/O error.
// All outputs are byte-deterministic given (inputs, seed), including under
// --threads > 1.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carotid/config.hpp"
#include "carotid/geometry.hpp"
#include "carotid/hemodynamics.hpp"
#include "carotid/losses.hpp"
#include "carotid/metrics.hpp"
#include "carotid/pgm.hpp"
#include "carotid/pipeline.hpp"
#include "carotid/risk_model.hpp"
#include "carotid/rng.hpp"
#include "carotid/uncertainty.hpp"

namespace fs = std::filesystem;
using namespace carotid;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::int64_t seed_override = -1;
    int threads = 1;
};

RunConfig effective_config(const GlobalOpts& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = load_run_config(g.config_path);
    if (g.seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(g.seed_override);
    return cfg;
}

fs::path ensure_out_dir(const GlobalOpts& g) {
    fs::path dir(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir.string());
    return dir;
}

FlowWaveform read_waveform_csv(const std::string& path) {
    const auto rows = csv::read_table(path);
    if (rows.empty() || rows.front().size() != 2 || rows.front()[0] != "t" || rows.front()[1] != "q")
        throw ValidationError("waveform CSV must have header t,q: " + path);
    FlowWaveform w;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != 2)
            throw ValidationError("waveform CSV row " + std::to_string(r + 1) + ": wrong field count");
        w.t.push_back(csv::parse_double(rows[r][0], "t"));
        w.q.push_back(csv::parse_double(rows[r][1], "q"));
    }
    validate_waveform(w);
    return w;
}

WssSeries read_wss_csv(const std::string& path) {
    const auto rows = csv::read_table(path);
    if (rows.empty() || rows.front().size() < 2 || rows.front().size() > 4 || rows.front()[0] != "t" ||
        rows.front()[1] != "tau_x")
        throw ValidationError("WSS CSV must have header t,tau_x[,tau_y[,tau_z]]: " + path);
    if (rows.front().size() >= 3 && rows.front()[2] != "tau_y")
        throw ValidationError("WSS CSV: column 3 must be tau_y");
    if (rows.front().size() == 4 && rows.front()[3] != "tau_z")
        throw ValidationError("WSS CSV: column 4 must be tau_z");
    WssSeries s;
    s.components = static_cast<int>(rows.front().size()) - 1;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size())
            throw ValidationError("WSS CSV row " + std::to_string(r + 1) + ": wrong field count");
        s.t.push_back(csv::parse_double(rows[r][0], "t"));
        std::array<double, 3> tau{0.0, 0.0, 0.0};
        for (int c = 0; c < s.components; ++c)
            tau[static_cast<std::size_t>(c)] =
                csv::parse_double(rows[r][static_cast<std::size_t>(c) + 1], "tau");
        s.tau.push_back(tau);
    }
    validate_wss_series(s);
    return s;
}

std::vector<ClinicalRow> load_clinical_rows_sorted(const std::string& root) {
    const auto by_id = load_clinical_csv((fs::path(root) / "clinical.csv").string());
    std::vector<ClinicalRow> rows;
    rows.reserve(by_id.size());
    for (const auto& [id, row] : by_id) rows.push_back(row); // map order = sorted
    if (rows.empty()) throw EmptyInput("clinical.csv has no data rows");
    return rows;
}

// ---------------------------------------------------------------------------
// rasterize
// ---------------------------------------------------------------------------

int cmd_rasterize(const GlobalOpts& g, const std::string& root, int height, int width) {
    const RunConfig cfg = effective_config(g);
    const int h = height > 0 ? height : cfg.image_size;
    const int w = width > 0 ? width : cfg.image_size;
    const DatasetIndex index = load_dataset_index(root);
    const fs::path out = ensure_out_dir(g);

    std::vector<std::string> warnings(index.records.size());
    parallel_for(index.records.size(), g.threads, [&](std::size_t i) {
        const auto& rec = index.records[i];
        const Contour li = load_contour_file(rec.li_path, BoundarySide::li);
        const Contour ma = load_contour_file(rec.ma_path, BoundarySide::ma);
        RasterReport report;
        const WallMask mask = rasterize_mask(li, ma, h, w, &report);
        write_mask_pgm(mask, (out / (rec.image_id + "_mask.pgm")).string());
        if (report.clipped_points)
            warnings[i] = "warning: " + rec.image_id + ": contour points clipped to image bounds";
        else if (report.empty_mask)
            warnings[i] = "warning: " + rec.image_id + ": rasterized mask is empty";
    });
    for (const auto& msg : warnings)
        if (!msg.empty()) std::cerr << msg << "\n";
    std::cout << "wrote " << index.records.size() << " masks to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// cimt
// ---------------------------------------------------------------------------

int cmd_cimt(const GlobalOpts& g, const std::string& root, const std::string& li_file,
             const std::string& ma_file, double kappa, int height, int width) {
    const RunConfig cfg = effective_config(g);
    const int h = height > 0 ? height : cfg.image_size;
    const int w = width > 0 ? width : cfg.image_size;

    if (!li_file.empty()) {
        if (ma_file.empty()) throw ValidationError("--ma is required with --li");
        if (!(kappa > 0.0)) throw ValidationError("--kappa must be > 0");
        const Contour li = load_contour_file(li_file, BoundarySide::li);
        const Contour ma = load_contour_file(ma_file, BoundarySide::ma);
        const auto profile = thickness_profile(li, ma, cfg.resample_points);
        const WallMask mask = rasterize_mask(li, ma, h, w);
        const auto d = wall_descriptors(profile, kappa, mask);
        std::cout << "cimt_mm=" << csv::fmt(d.cimt_mm) << "\n"
                  << "max_thickness_mm=" << csv::fmt(d.max_thickness_mm) << "\n"
                  << "thickness_std_mm=" << csv::fmt(d.thickness_std_mm) << "\n"
                  << "wall_area_ratio=" << csv::fmt(d.wall_area_ratio) << "\n"
                  << "boundary_smoothness_mm=" << csv::fmt(d.boundary_smoothness_mm) << "\n";
        return 0;
    }

    if (root.empty()) throw ValidationError("cimt needs either --root or --li/--ma/--kappa");
    const DatasetIndex index = load_dataset_index(root);
    const fs::path out = ensure_out_dir(g);
    std::vector<WallDescriptors> descriptors(index.records.size());
    parallel_for(index.records.size(), g.threads, [&](std::size_t i) {
        const auto& rec = index.records[i];
        const Contour li = load_contour_file(rec.li_path, BoundarySide::li);
        const Contour ma = load_contour_file(rec.ma_path, BoundarySide::ma);
        const auto profile = thickness_profile(li, ma, cfg.resample_points);
        const WallMask mask = rasterize_mask(li, ma, h, w);
        descriptors[i] = wall_descriptors(profile, rec.kappa, mask);
    });

    const fs::path path = out / "cimt.csv";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << "image_id,cimt_mm,max_thickness_mm,thickness_std_mm,wall_area_ratio,boundary_smoothness_mm\n";
    for (std::size_t i = 0; i < index.records.size(); ++i) {
        const auto& d = descriptors[i];
        f << index.records[i].image_id << "," << csv::fmt(d.cimt_mm) << ","
          << csv::fmt(d.max_thickness_mm) << "," << csv::fmt(d.thickness_std_mm) << ","
          << csv::fmt(d.wall_area_ratio) << "," << csv::fmt(d.boundary_smoothness_mm) << "\n";
    }
    if (!f) throw IoError("failed writing " + path.string());
    std::cout << "wrote " << path.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const GlobalOpts& g, const std::string& root, const std::string& pred_dir) {
    const RunConfig cfg = effective_config(g);
    const DatasetIndex index = load_dataset_index(root);
    const fs::path out = ensure_out_dir(g);
    const EvalOutput result = run_evaluate(cfg, index, pred_dir, g.threads);
    write_metrics_csv(result, (out / "metrics.csv").string());
    write_boundary_detail_csv(result, (out / "boundary_detail.csv").string());
    std::cout << "mean_dice=" << csv::fmt(result.summary.dice) << "\n"
              << "mean_iou=" << csv::fmt(result.summary.iou) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

int cmd_split(const GlobalOpts& g, const std::string& root, const std::string& ratios) {
    const RunConfig cfg = effective_config(g);
    SplitSpec spec;
    spec.seed = cfg.seed;
    if (!ratios.empty()) {
        const auto parts = csv::split_line(ratios);
        if (parts.size() != 3) throw ValidationError("--ratios expects train,val,test");
        spec.train = csv::parse_double(parts[0], "train ratio");
        spec.val = csv::parse_double(parts[1], "val ratio");
        spec.test = csv::parse_double(parts[2], "test ratio");
    }
    const DatasetIndex index = load_dataset_index(root);
    const SplitResult split = patient_level_split(index, spec);

    const fs::path out = ensure_out_dir(g);
    const fs::path path = out / "splits.csv";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << "image_id,patient_id,partition\n";
    struct Part {
        const DatasetIndex* idx;
        const char* name;
    };
    std::vector<std::pair<std::string, std::string>> lines; // image_id -> line tail
    for (const Part part : {Part{&split.train, "train"}, Part{&split.val, "val"}, Part{&split.test, "test"}})
        for (const auto& rec : part.idx->records)
            lines.emplace_back(rec.image_id, rec.patient_id + "," + part.name);
    std::sort(lines.begin(), lines.end());
    for (const auto& [id, tail] : lines) f << id << "," << tail << "\n";
    if (!f) throw IoError("failed writing " + path.string());

    std::cout << "patients_train=" << distinct_patients(split.train).size() << "\n"
              << "patients_val=" << distinct_patients(split.val).size() << "\n"
              << "patients_test=" << distinct_patients(split.test).size() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train-risk
// ---------------------------------------------------------------------------

int cmd_train_risk(const GlobalOpts& g, const std::string& root) {
    const RunConfig cfg = effective_config(g);
    const auto rows = load_clinical_rows_sorted(root);
    std::vector<std::array<double, kClinicalFeatures>> features;
    std::vector<int> labels, avail;
    for (const auto& r : rows) {
        features.push_back(r.features);
        labels.push_back(r.label);
        avail.push_back(r.avail);
    }
    const TrainResult result = train_risk_head(features, labels, avail, cfg);

    const fs::path out = ensure_out_dir(g);
    save_risk_model(result.model, (out / "risk_model.txt").string());

    const fs::path hist_path = out / "history.csv";
    std::ofstream hist(hist_path, std::ios::binary);
    if (!hist) throw IoError("cannot write " + hist_path.string());
    hist << "epoch,loss,auc\n";
    for (std::size_t e = 0; e < result.history.loss.size(); ++e)
        hist << e << "," << csv::fmt(result.history.loss[e]) << "," << csv::fmt(result.history.auc[e])
             << "\n";
    if (!hist) throw IoError("failed writing " + hist_path.string());

    // final classification metrics on the labeled training rows
    std::vector<double> scores;
    std::vector<int> truth;
    for (const auto& r : rows) {
        if (!r.avail) continue;
        scores.push_back(forward_deterministic(result.model, r.features));
        truth.push_back(r.label);
    }
    const double auc = roc_auc(scores, truth);
    const auto report = classification_report(scores, truth, cfg.seg_threshold);
    const fs::path metrics_path = out / "risk_metrics.csv";
    std::ofstream rm(metrics_path, std::ios::binary);
    if (!rm) throw IoError("cannot write " + metrics_path.string());
    rm << "auc,accuracy,f1,sensitivity,specificity,threshold\n"
       << csv::fmt(auc) << "," << csv::fmt(report.accuracy) << "," << csv::fmt(report.f1) << ","
       << csv::fmt(report.sensitivity) << "," << csv::fmt(report.specificity) << ","
       << csv::fmt(report.threshold) << "\n";
    if (!rm) throw IoError("failed writing " + metrics_path.string());

    std::cout << "auc=" << csv::fmt(auc) << "\n"
              << "accuracy=" << csv::fmt(report.accuracy) << "\n"
              << "f1=" << csv::fmt(report.f1) << "\n"
              << "sensitivity=" << csv::fmt(report.sensitivity) << "\n"
              << "specificity=" << csv::fmt(report.specificity) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// uncertainty
// ---------------------------------------------------------------------------

int cmd_uncertainty(const GlobalOpts& g, const std::string& root, const std::string& model_path) {
    const RunConfig cfg = effective_config(g);
    const DropoutMlp model = load_risk_model(model_path);
    const auto rows = load_clinical_rows_sorted(root);
    const auto result = run_uncertainty(cfg, model, rows, g.threads);
    const fs::path out = ensure_out_dir(g);
    write_uncertainty_csv(result, (out / "uncertainty.csv").string());
    std::size_t flagged = 0;
    for (const auto& r : result) flagged += r.flagged ? 1 : 0;
    std::cout << "subjects=" << result.size() << "\nflagged=" << flagged << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// hemo
// ---------------------------------------------------------------------------

int cmd_hemo(const GlobalOpts& g, const std::string& waveform_path, const std::string& wss_path,
             double radius, double rho, double mu, int harmonics, const std::string& flow_model) {
    if (waveform_path.empty() == wss_path.empty())
        throw ValidationError("hemo needs exactly one of --waveform or --wss");

    WssSeries series;
    if (!wss_path.empty()) {
        series = read_wss_csv(wss_path);
    } else {
        const FlowWaveform w = read_waveform_csv(waveform_path);
        VesselSpec vessel;
        vessel.radius = radius;
        if (!(vessel.radius > 0.0)) throw ValidationError("--radius must be > 0");
        FluidParams fluid;
        if (rho > 0.0) fluid.rho = rho;
        if (mu > 0.0) fluid.mu = mu;
        if (flow_model == "womersley")
            series = womersley_wss(w, vessel, fluid, harmonics);
        else if (flow_model == "quasi-steady")
            series = quasi_steady_wss(w, vessel, fluid);
        else
            throw ValidationError("--flow-model must be womersley or quasi-steady");
    }

    const double t = tawss(series);
    const double o = osi(series);
    const RrtResult r = rrt(series);

    const fs::path out = ensure_out_dir(g);
    {
        const fs::path path = out / "biomarkers.csv";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path.string());
        f << "tawss_pa,osi,rrt_per_pa,singular\n"
          << csv::fmt(t) << "," << csv::fmt(o) << "," << csv::fmt(r.value) << ","
          << (r.singular ? 1 : 0) << "\n";
        if (!f) throw IoError("failed writing " + path.string());
    }
    {
        const fs::path path = out / "wss_trace.csv";
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path.string());
        f << "t,tau_x";
        if (series.components >= 2) f << ",tau_y";
        if (series.components >= 3) f << ",tau_z";
        f << "\n";
        for (std::size_t k = 0; k < series.t.size(); ++k) {
            f << csv::fmt(series.t[k]) << "," << csv::fmt(series.tau[k][0], 8);
            if (series.components >= 2) f << "," << csv::fmt(series.tau[k][1], 8);
            if (series.components >= 3) f << "," << csv::fmt(series.tau[k][2], 8);
            f << "\n";
        }
        if (!f) throw IoError("failed writing " + path.string());
    }

    std::cout << "tawss_pa=" << csv::fmt(t) << "\n"
              << "osi=" << csv::fmt(o) << "\n"
              << "rrt_per_pa=" << csv::fmt(r.value) << "\n"
              << "singular=" << (r.singular ? 1 : 0) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct KernelCheck {
    std::string name;
    double max_rel_error = 0.0;
};

int cmd_gradcheck(const GlobalOpts& g, int points, double step) {
    const RunConfig cfg = effective_config(g);
    if (points < 1) throw ValidationError("--points must be >= 1");
    if (!(step > 0.0)) throw ValidationError("--step must be > 0");
    Rng rng(cfg.seed);
    const int h = 8, w = 8;

    auto random_mask = [&] {
        WallMask m(h, w);
        for (auto& b : m.v) b = rng.uniform() < 0.5 ? 1 : 0;
        return m;
    };
    auto random_map = [&](double lo, double hi) {
        ProbMap p(h, w);
        for (auto& x : p.v) x = rng.uniform(lo, hi);
        return p;
    };

    std::vector<KernelCheck> checks{{"bce"}, {"dice_loss"}, {"smoothness_loss"}, {"divergence_term"},
                                    {"boundary_term"}};
    for (int it = 0; it < points; ++it) {
        {
            const WallMask mask = random_mask();
            const ProbMap p = random_map(0.05, 0.95);
            std::vector<double> target(mask.v.begin(), mask.v.end());
            auto f = [&](const std::vector<double>& x) {
                return bce(std::span<const double>(x), std::span<const double>(target));
            };
            checks[0].max_rel_error = std::max(
                checks[0].max_rel_error,
                max_relative_gradient_error(f, bce_grad(p.v, target), p.v, step));
        }
        {
            const WallMask mask = random_mask();
            const ProbMap p = random_map(0.05, 0.95);
            auto f = [&](const std::vector<double>& x) {
                ProbMap q(h, w);
                q.v = x;
                return dice_loss(q, mask);
            };
            checks[1].max_rel_error = std::max(
                checks[1].max_rel_error,
                max_relative_gradient_error(f, dice_loss_grad(p, mask), p.v, step));
        }
        {
            // keep every finite difference away from the |.| kinks
            ProbMap p(h, w);
            bool ok = false;
            while (!ok) {
                p = random_map(0.05, 0.95);
                ok = true;
                for (int i = 0; i < h && ok; ++i)
                    for (int j = 0; j + 1 < w && ok; ++j)
                        ok = std::abs(p.at(i, j + 1) - p.at(i, j)) > 1e-3;
                for (int i = 0; i + 1 < h && ok; ++i)
                    for (int j = 0; j < w && ok; ++j)
                        ok = std::abs(p.at(i + 1, j) - p.at(i, j)) > 1e-3;
            }
            auto f = [&](const std::vector<double>& x) {
                ProbMap q(h, w);
                q.v = x;
                return smoothness_loss(q, cfg.smoothness_normalized);
            };
            checks[2].max_rel_error = std::max(
                checks[2].max_rel_error,
                max_relative_gradient_error(f, smoothness_loss_grad(p, cfg.smoothness_normalized).v, p.v,
                                            step));
        }
        {
            DiscreteVelocityField field;
            field.spacing = 0.37;
            field.u = Grid(6, 6);
            field.v = Grid(6, 6);
            for (auto& x : field.u.v) x = rng.uniform(-1.0, 1.0);
            for (auto& x : field.v.v) x = rng.uniform(-1.0, 1.0);
            std::vector<double> point = field.u.v;
            point.insert(point.end(), field.v.v.begin(), field.v.v.end());
            const auto [gu, gv] = divergence_term_grad(field);
            std::vector<double> grad = gu.v;
            grad.insert(grad.end(), gv.v.begin(), gv.v.end());
            auto f = [&](const std::vector<double>& x) {
                DiscreteVelocityField ff;
                ff.spacing = field.spacing;
                ff.u = Grid(6, 6);
                ff.v = Grid(6, 6);
                std::copy_n(x.begin(), ff.u.v.size(), ff.u.v.begin());
                std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(ff.u.v.size()), ff.v.v.size(),
                            ff.v.v.begin());
                return divergence_term(ff);
            };
            checks[3].max_rel_error =
                std::max(checks[3].max_rel_error, max_relative_gradient_error(f, grad, point, step));
        }
        {
            const int n = 9;
            FlowWaveform q_hat, q_dop;
            for (int k = 0; k < n; ++k) {
                q_hat.t.push_back(0.1 * k);
                q_dop.t.push_back(0.1 * k);
                q_hat.q.push_back(rng.uniform(-1.0, 1.0));
                q_dop.q.push_back(rng.uniform(-1.0, 1.0));
            }
            auto f = [&](const std::vector<double>& x) {
                FlowWaveform qq = q_hat;
                qq.q = x;
                return boundary_term(qq, q_dop);
            };
            checks[4].max_rel_error = std::max(
                checks[4].max_rel_error,
                max_relative_gradient_error(f, boundary_term_grad(q_hat, q_dop), q_hat.q, step));
        }
    }

    const fs::path out = ensure_out_dir(g);
    const fs::path path = out / "gradcheck.csv";
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << "kernel,max_rel_error,pass\n";
    bool all_pass = true;
    for (const auto& c : checks) {
        const bool pass = c.max_rel_error < 1e-4;
        all_pass = all_pass && pass;
        f << c.name << "," << csv::fmt(c.max_rel_error, 10) << "," << (pass ? 1 : 0) << "\n";
        std::cout << c.name << ": max_rel_error=" << csv::fmt(c.max_rel_error, 10)
                  << (pass ? " pass" : " FAIL") << "\n";
    }
    if (!f) throw IoError("failed writing " + path.string());
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"carotid wall morphology, uncertainty and hemodynamics toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value run configuration file");
    app.add_option("--seed", g.seed_override, "override the run seed");
    app.add_option("--out-dir", g.out_dir, "output directory (default: out)");
    app.add_option("--threads", g.threads, "worker threads for batch commands")
        ->check(CLI::Range(1, 256));

    std::string root, pred_dir, li_file, ma_file, model_path, ratios;
    std::string waveform_path, wss_path, flow_model = "womersley";
    double kappa = 0.0, radius = 3e-3, rho = 0.0, mu = 0.0;
    int height = 0, width = 0, harmonics = 8, points = 50;
    double step = 1e-5;

    auto* rasterize = app.add_subcommand("rasterize", "rasterize LI/MA contours into mask PGMs");
    rasterize->add_option("--root", root, "dataset root directory")->required();
    rasterize->add_option("--height", height, "mask height (default: config image_size)");
    rasterize->add_option("--width", width, "mask width (default: config image_size)");

    auto* cimt = app.add_subcommand("cimt", "calibrated CIMT and wall descriptors");
    cimt->add_option("--root", root, "dataset root directory");
    cimt->add_option("--li", li_file, "single LI contour file");
    cimt->add_option("--ma", ma_file, "single MA contour file");
    cimt->add_option("--kappa", kappa, "mm-per-pixel calibration for --li/--ma mode");
    cimt->add_option("--height", height, "mask height (default: config image_size)");
    cimt->add_option("--width", width, "mask width (default: config image_size)");

    auto* evaluate = app.add_subcommand("evaluate", "segmentation metrics against predicted masks");
    evaluate->add_option("--root", root, "dataset root directory")->required();
    evaluate->add_option("--pred-dir", pred_dir, "directory of <image_id>_mask.pgm predictions")
        ->required();

    auto* split = app.add_subcommand("split", "patient-level train/val/test split");
    split->add_option("--root", root, "dataset root directory")->required();
    split->add_option("--ratios", ratios, "train,val,test ratios (default 0.70,0.15,0.15)");

    auto* train = app.add_subcommand("train-risk", "train the clinical risk head");
    train->add_option("--root", root, "dataset root directory")->required();

    auto* uncert = app.add_subcommand("uncertainty", "Monte Carlo dropout risk uncertainty");
    uncert->add_option("--root", root, "dataset root directory")->required();
    uncert->add_option("--model", model_path, "trained risk model file")->required();

    auto* hemo = app.add_subcommand("hemo", "WSS biomarkers from a waveform or WSS series");
    hemo->add_option("--waveform", waveform_path, "flow waveform CSV (t,q)");
    hemo->add_option("--wss", wss_path, "WSS series CSV (t,tau_x[,tau_y[,tau_z]])");
    hemo->add_option("--radius", radius, "vessel radius in m (waveform mode)");
    hemo->add_option("--rho", rho, "blood density kg/m^3 (default 1060)");
    hemo->add_option("--mu", mu, "dynamic viscosity Pa s (default 0.00345)");
    hemo->add_option("--harmonics", harmonics, "Fourier harmonics for the pulsatile solution");
    hemo->add_option("--flow-model", flow_model, "womersley or quasi-steady");

    auto* gradcheck = app.add_subcommand("gradcheck", "verify analytic loss gradients");
    gradcheck->add_option("--points", points, "random points per kernel (default 50)");
    gradcheck->add_option("--step", step, "central-difference step (default 1e-5)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (rasterize->parsed()) return cmd_rasterize(g, root, height, width);
        if (cimt->parsed()) return cmd_cimt(g, root, li_file, ma_file, kappa, height, width);
        if (evaluate->parsed()) return cmd_evaluate(g, root, pred_dir);
        if (split->parsed()) return cmd_split(g, root, ratios);
        if (train->parsed()) return cmd_train_risk(g, root);
        if (uncert->parsed()) return cmd_uncertainty(g, root, model_path);
        if (hemo->parsed())
            return cmd_hemo(g, waveform_path, wss_path, radius, rho, mu, harmonics, flow_model);
        if (gradcheck->parsed()) return cmd_gradcheck(g, points, step);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
