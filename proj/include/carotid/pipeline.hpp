#pragma once
// Dataset ingestion, patient-level splitting and the batch drivers behind
// the CLI. Output rows are always sorted by id before emission so results
// never depend on scheduling.
//
// Dataset layout:
//   root/calibration.csv          image_id,kappa_mm_per_px
//   root/clinical.csv             patient_id,age,sex,hypertension,diabetes,bmi[,label,avail]
//   root/contours/<id>_LI.txt     one "x y" pair per line
//   root/contours/<id>_MA.txt
// Image ids of the form <patient>_<L|R> attach to that patient and scan
// side; any other id is treated as its own patient.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "carotid/config.hpp"
#include "carotid/errors.hpp"
#include "carotid/geometry.hpp"
#include "carotid/metrics.hpp"
#include "carotid/pgm.hpp"
#include "carotid/risk_model.hpp"
#include "carotid/rng.hpp"
#include "carotid/uncertainty.hpp"

namespace carotid {

// ---------------------------------------------------------------------------
// Small CSV utilities (comma-separated, no quoting)
// ---------------------------------------------------------------------------

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

inline std::vector<std::vector<std::string>> read_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CSV file: " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

// Fixed 6-decimal reals keep CSV output byte-exact across runs.
inline std::string fmt(double x, int decimals = 6) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
    return buf;
}

inline double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw ValidationError("bad numeric value for " + what + ": '" + s + "'");
    }
}

} // namespace csv

// ---------------------------------------------------------------------------
// Dataset index
// ---------------------------------------------------------------------------

struct ClinicalRow {
    std::string patient_id;
    std::array<double, kClinicalFeatures> features{}; // age, sex, hypertension, diabetes, bmi
    bool has_label = false;
    int label = 0;
    int avail = 0;
};

struct DatasetRecord {
    std::string image_id;
    std::string patient_id;
    ScanSide side = ScanSide::left;
    std::string li_path;
    std::string ma_path;
    double kappa = 0.0;
    bool has_clinical = false;
    ClinicalRow clinical;
};

struct DatasetIndex {
    std::vector<DatasetRecord> records; // sorted by image_id
};

inline std::pair<std::string, ScanSide> split_image_id(const std::string& image_id) {
    const std::size_t us = image_id.rfind('_');
    if (us != std::string::npos && us + 2 == image_id.size()) {
        const char c = image_id[us + 1];
        if (c == 'L' || c == 'l') return {image_id.substr(0, us), ScanSide::left};
        if (c == 'R' || c == 'r') return {image_id.substr(0, us), ScanSide::right};
    }
    return {image_id, ScanSide::left};
}

inline std::map<std::string, ClinicalRow> load_clinical_csv(const std::string& path) {
    const auto rows = csv::read_table(path);
    if (rows.empty()) throw ValidationError("clinical.csv is empty: " + path);
    const auto& header = rows.front();
    const std::vector<std::string> required{"patient_id", "age", "sex", "hypertension", "diabetes", "bmi"};
    if (header.size() < required.size() || header.size() > required.size() + 2)
        throw ValidationError("clinical.csv: unexpected column count");
    for (std::size_t k = 0; k < required.size(); ++k)
        if (header[k] != required[k])
            throw ValidationError("clinical.csv: expected column '" + required[k] + "', got '" + header[k] + "'");
    const bool has_label_col = header.size() >= 7;
    const bool has_avail_col = header.size() >= 8;
    if (has_label_col && header[6] != "label") throw ValidationError("clinical.csv: column 7 must be 'label'");
    if (has_avail_col && header[7] != "avail") throw ValidationError("clinical.csv: column 8 must be 'avail'");

    std::map<std::string, ClinicalRow> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size())
            throw ValidationError("clinical.csv row " + std::to_string(r + 1) + ": wrong field count");
        ClinicalRow c;
        c.patient_id = row[0];
        for (int j = 0; j < kClinicalFeatures; ++j)
            c.features[static_cast<std::size_t>(j)] =
                csv::parse_double(row[static_cast<std::size_t>(j) + 1], header[static_cast<std::size_t>(j) + 1]);
        if (has_label_col && !row[6].empty()) {
            const double v = csv::parse_double(row[6], "label");
            if (v != 0.0 && v != 1.0) throw ValidationError("clinical.csv: label must be 0 or 1");
            c.has_label = true;
            c.label = static_cast<int>(v);
        }
        c.avail = c.has_label ? 1 : 0;
        if (has_avail_col && !row[7].empty()) {
            const double v = csv::parse_double(row[7], "avail");
            if (v != 0.0 && v != 1.0) throw ValidationError("clinical.csv: avail must be 0 or 1");
            c.avail = c.has_label ? static_cast<int>(v) : 0;
        }
        if (!out.emplace(c.patient_id, c).second)
            throw ValidationError("clinical.csv: duplicate patient_id " + c.patient_id);
    }
    return out;
}

inline DatasetIndex load_dataset_index(const std::string& root) {
    namespace fs = std::filesystem;
    const fs::path root_path(root);
    const fs::path contour_dir = root_path / "contours";
    if (!fs::is_directory(contour_dir)) throw IoError("missing contours/ directory under " + root);

    std::map<std::string, std::pair<bool, bool>> seen; // id -> (has LI, has MA)
    for (const auto& entry : fs::directory_iterator(contour_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() <= 7 || name.substr(name.size() - 4) != ".txt") continue;
        const std::string stem = name.substr(0, name.size() - 4);
        if (stem.size() > 3 && stem.substr(stem.size() - 3) == "_LI")
            seen[stem.substr(0, stem.size() - 3)].first = true;
        else if (stem.size() > 3 && stem.substr(stem.size() - 3) == "_MA")
            seen[stem.substr(0, stem.size() - 3)].second = true;
    }
    if (seen.empty()) throw EmptyDataset("no contour files found under " + contour_dir.string());

    // calibration join
    const auto cal_rows = csv::read_table((root_path / "calibration.csv").string());
    if (cal_rows.empty() || cal_rows.front().size() != 2 || cal_rows.front()[0] != "image_id" ||
        cal_rows.front()[1] != "kappa_mm_per_px")
        throw ValidationError("calibration.csv must have header image_id,kappa_mm_per_px");
    std::map<std::string, double> kappa_by_id;
    for (std::size_t r = 1; r < cal_rows.size(); ++r) {
        if (cal_rows[r].size() != 2)
            throw ValidationError("calibration.csv row " + std::to_string(r + 1) + ": wrong field count");
        const double kappa = csv::parse_double(cal_rows[r][1], "kappa_mm_per_px");
        if (!(kappa > 0.0))
            throw MissingCalibration("calibration.csv: kappa must be > 0 for image " + cal_rows[r][0]);
        kappa_by_id[cal_rows[r][0]] = kappa;
    }

    const auto clinical = load_clinical_csv((root_path / "clinical.csv").string());

    DatasetIndex index;
    for (const auto& [image_id, flags] : seen) {
        if (!flags.first) throw MissingContour("image " + image_id + " has MA but no LI contour");
        if (!flags.second) throw MissingContour("image " + image_id + " has LI but no MA contour");
        DatasetRecord rec;
        rec.image_id = image_id;
        rec.li_path = (contour_dir / (image_id + "_LI.txt")).string();
        rec.ma_path = (contour_dir / (image_id + "_MA.txt")).string();
        const auto it = kappa_by_id.find(image_id);
        if (it == kappa_by_id.end())
            throw MissingCalibration("image " + image_id + " has contours but no calibration factor");
        rec.kappa = it->second;
        auto [patient, side] = split_image_id(image_id);
        rec.patient_id = patient;
        rec.side = side;
        const auto cit = clinical.find(patient);
        if (cit != clinical.end()) {
            rec.has_clinical = true;
            rec.clinical = cit->second;
        }
        index.records.push_back(std::move(rec));
    }
    // std::map iteration already sorts by image_id
    return index;
}

inline Contour load_contour_file(const std::string& path, BoundarySide side) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open contour file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_contour(buf.str(), side);
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Patient-level splitting
// ---------------------------------------------------------------------------

struct SplitSpec {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
    std::uint64_t seed = 42;
};

struct SplitResult {
    DatasetIndex train;
    DatasetIndex val;
    DatasetIndex test;
};

inline void validate_split_spec(const SplitSpec& s) {
    if (!(s.train > 0.0 && s.val > 0.0 && s.test > 0.0))
        throw OutOfRange("split ratios must be positive");
    if (std::abs(s.train + s.val + s.test - 1.0) > 1e-9)
        throw OutOfRange("split ratios must sum to 1");
}

// Seeded shuffle, then cumulative-floor partition boundaries. Each partition
// lands within one patient of its ratio target.
inline std::vector<int> assign_patients(std::vector<std::string> patients, const SplitSpec& spec) {
    validate_split_spec(spec);
    if (patients.size() < 3) throw TooFewPatients("patient-level split needs >= 3 patients");
    std::sort(patients.begin(), patients.end());
    Rng rng(spec.seed);
    rng.shuffle(patients);
    const double p = static_cast<double>(patients.size());
    const auto n_train = static_cast<std::size_t>(std::floor(spec.train * p + 1e-9));
    const auto n_train_val = static_cast<std::size_t>(std::floor((spec.train + spec.val) * p + 1e-9));
    std::vector<int> assignment(patients.size(), 2);
    for (std::size_t k = 0; k < patients.size(); ++k)
        assignment[k] = k < n_train ? 0 : (k < n_train_val ? 1 : 2);
    // map back to the sorted-by-name order used by callers
    std::vector<std::pair<std::string, int>> tagged(patients.size());
    for (std::size_t k = 0; k < patients.size(); ++k) tagged[k] = {patients[k], assignment[k]};
    std::sort(tagged.begin(), tagged.end());
    std::vector<int> out(patients.size());
    for (std::size_t k = 0; k < patients.size(); ++k) out[k] = tagged[k].second;
    return out;
}

inline std::vector<std::string> distinct_patients(const DatasetIndex& index) {
    std::vector<std::string> ids;
    for (const auto& r : index.records) ids.push_back(r.patient_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

inline SplitResult patient_level_split(const DatasetIndex& index, const SplitSpec& spec) {
    const auto patients = distinct_patients(index);
    const auto assignment = assign_patients(patients, spec);
    std::map<std::string, int> part_of;
    for (std::size_t k = 0; k < patients.size(); ++k) part_of[patients[k]] = assignment[k];
    SplitResult out;
    for (const auto& rec : index.records) {
        switch (part_of.at(rec.patient_id)) {
            case 0: out.train.records.push_back(rec); break;
            case 1: out.val.records.push_back(rec); break;
            default: out.test.records.push_back(rec); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Deterministic worker pool
// ---------------------------------------------------------------------------

// Each index writes only its own output slot, so results are identical for
// any thread count. A worker exception stops the pool and is rethrown on
// the calling thread after join.
template <typename Fn>
inline void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n);
                break;
            }
        }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(threads, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

struct EvalRow {
    std::string image_id;
    double dice = 0.0;
    double iou = 0.0;
    double boundary_mean_px = std::numeric_limits<double>::quiet_NaN();
    double hausdorff_px = std::numeric_limits<double>::quiet_NaN();
    double cimt_error_mm = std::numeric_limits<double>::quiet_NaN();
    // per-boundary detail
    double li_mean_px = std::numeric_limits<double>::quiet_NaN();
    double li_hausdorff_px = std::numeric_limits<double>::quiet_NaN();
    double ma_mean_px = std::numeric_limits<double>::quiet_NaN();
    double ma_hausdorff_px = std::numeric_limits<double>::quiet_NaN();
};

struct EvalOutput {
    std::vector<EvalRow> rows;
    EvalRow summary; // means over finite values, image_id = "summary"
};

inline EvalOutput run_evaluate(const RunConfig& cfg, const DatasetIndex& index,
                               const std::string& pred_dir, int threads = 1) {
    namespace fs = std::filesystem;
    if (index.records.empty()) throw EmptyDataset("evaluation index is empty");
    std::vector<std::string> pred_paths(index.records.size());
    for (std::size_t i = 0; i < index.records.size(); ++i) {
        const fs::path p = fs::path(pred_dir) / (index.records[i].image_id + "_mask.pgm");
        if (!fs::is_regular_file(p))
            throw MissingPrediction("no predicted mask for image " + index.records[i].image_id +
                                    " (expected " + p.string() + ")");
        pred_paths[i] = p.string();
    }

    EvalOutput out;
    out.rows.resize(index.records.size());
    parallel_for(index.records.size(), threads, [&](std::size_t i) {
        const auto& rec = index.records[i];
        EvalRow row;
        row.image_id = rec.image_id;

        const WallMask pred = read_mask_pgm(pred_paths[i]);
        const Contour gt_li = load_contour_file(rec.li_path, BoundarySide::li);
        const Contour gt_ma = load_contour_file(rec.ma_path, BoundarySide::ma);
        const WallMask truth = rasterize_mask(gt_li, gt_ma, pred.height, pred.width);

        row.dice = dice(pred, truth);
        row.iou = iou(pred, truth);

        if (const auto boundaries = mask_to_boundaries(pred)) {
            const auto& [pred_li, pred_ma] = *boundaries;
            const BoundaryError li_err = boundary_distance(pred_li, gt_li);
            const BoundaryError ma_err = boundary_distance(pred_ma, gt_ma);
            row.li_mean_px = li_err.mean_symmetric_px;
            row.li_hausdorff_px = li_err.hausdorff_px;
            row.ma_mean_px = ma_err.mean_symmetric_px;
            row.ma_hausdorff_px = ma_err.hausdorff_px;
            row.boundary_mean_px = 0.5 * (li_err.mean_symmetric_px + ma_err.mean_symmetric_px);
            row.hausdorff_px = std::max(li_err.hausdorff_px, ma_err.hausdorff_px);
            if (pred_li.points.size() >= 2 && pred_ma.points.size() >= 2) {
                const auto pred_profile = thickness_profile(pred_li, pred_ma, cfg.resample_points);
                const auto gt_profile = thickness_profile(gt_li, gt_ma, cfg.resample_points);
                row.cimt_error_mm = cimt_error_mm(pred_profile, gt_profile, rec.kappa);
            }
        }
        out.rows[i] = std::move(row);
    });

    auto finite_mean = [&](auto&& get) {
        double acc = 0.0;
        std::size_t n = 0;
        for (const auto& r : out.rows) {
            const double v = get(r);
            if (std::isfinite(v)) {
                acc += v;
                ++n;
            }
        }
        return n ? acc / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    };
    out.summary.image_id = "summary";
    out.summary.dice = finite_mean([](const EvalRow& r) { return r.dice; });
    out.summary.iou = finite_mean([](const EvalRow& r) { return r.iou; });
    out.summary.boundary_mean_px = finite_mean([](const EvalRow& r) { return r.boundary_mean_px; });
    out.summary.hausdorff_px = finite_mean([](const EvalRow& r) { return r.hausdorff_px; });
    out.summary.cimt_error_mm = finite_mean([](const EvalRow& r) { return r.cimt_error_mm; });
    out.summary.li_mean_px = finite_mean([](const EvalRow& r) { return r.li_mean_px; });
    out.summary.li_hausdorff_px = finite_mean([](const EvalRow& r) { return r.li_hausdorff_px; });
    out.summary.ma_mean_px = finite_mean([](const EvalRow& r) { return r.ma_mean_px; });
    out.summary.ma_hausdorff_px = finite_mean([](const EvalRow& r) { return r.ma_hausdorff_px; });
    return out;
}

inline void write_metrics_csv(const EvalOutput& out, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write metrics CSV: " + path);
    f << "image_id,dice,iou,boundary_mean_px,hausdorff_px,cimt_error_mm\n";
    auto emit = [&](const EvalRow& r) {
        f << r.image_id << "," << csv::fmt(r.dice) << "," << csv::fmt(r.iou) << ","
          << csv::fmt(r.boundary_mean_px) << "," << csv::fmt(r.hausdorff_px) << ","
          << csv::fmt(r.cimt_error_mm) << "\n";
    };
    for (const auto& r : out.rows) emit(r);
    emit(out.summary);
    if (!f) throw IoError("failed writing metrics CSV: " + path);
}

// LI and MA boundary errors reported separately.
inline void write_boundary_detail_csv(const EvalOutput& out, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write boundary CSV: " + path);
    f << "image_id,boundary,mean_symmetric_px,hausdorff_px\n";
    for (const auto& r : out.rows) {
        f << r.image_id << ",LI," << csv::fmt(r.li_mean_px) << "," << csv::fmt(r.li_hausdorff_px) << "\n";
        f << r.image_id << ",MA," << csv::fmt(r.ma_mean_px) << "," << csv::fmt(r.ma_hausdorff_px) << "\n";
    }
    if (!f) throw IoError("failed writing boundary CSV: " + path);
}

// ---------------------------------------------------------------------------
// Uncertainty driver
// ---------------------------------------------------------------------------

struct UncertaintyRow {
    std::string patient_id;
    double mean = 0.0;
    double variance = 0.0;
    bool flagged = false;
};

// K dropout-active passes per subject. Substream seeds derive from the run
// seed and the subject's position in the sorted row list, so repeated runs
// and any thread count give identical output.
inline std::vector<UncertaintyRow> run_uncertainty(const RunConfig& cfg, const DropoutMlp& model,
                                                   const std::vector<ClinicalRow>& subjects,
                                                   int threads = 1) {
    if (subjects.empty()) throw EmptyInput("run_uncertainty: no subjects");
    std::vector<ClinicalRow> sorted = subjects;
    std::sort(sorted.begin(), sorted.end(),
              [](const ClinicalRow& a, const ClinicalRow& b) { return a.patient_id < b.patient_id; });

    std::vector<UncertaintySummary> summaries(sorted.size());
    parallel_for(sorted.size(), threads, [&](std::size_t i) {
        const auto samples =
            mc_predict_risk(model, sorted[i].features, cfg.mc_samples, mix_seed(cfg.seed, i));
        summaries[i] = summary_from_scalar(mc_aggregate_scalar(samples));
    });
    const auto flags = flag_reviews(summaries, cfg.review_tau);
    std::vector<UncertaintyRow> rows(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i)
        rows[i] = {sorted[i].patient_id, summaries[i].mean.v[0], summaries[i].variance.v[0], flags[i]};
    return rows;
}

inline void write_uncertainty_csv(const std::vector<UncertaintyRow>& rows, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write uncertainty CSV: " + path);
    f << "patient_id,mean,variance,flagged\n";
    for (const auto& r : rows)
        f << r.patient_id << "," << csv::fmt(r.mean) << "," << csv::fmt(r.variance, 8) << ","
          << (r.flagged ? 1 : 0) << "\n";
    if (!f) throw IoError("failed writing uncertainty CSV: " + path);
}

} // namespace carotid
