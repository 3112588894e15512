#pragma once
// Segmentation, boundary and classification evaluation metrics.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "carotid/errors.hpp"
#include "carotid/geometry.hpp"
#include "carotid/grid.hpp"

namespace carotid {

struct ClassificationReport {
    double accuracy = 0.0;
    double f1 = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double threshold = 0.5;
};

struct BoundaryError {
    double mean_symmetric_px = 0.0;
    double hausdorff_px = 0.0;
    std::optional<double> mean_symmetric_mm;
    std::optional<double> hausdorff_mm;
};

struct MaskOverlapCounts {
    long long intersection = 0;
    long long union_ = 0;
    long long count_a = 0;
    long long count_b = 0;
};

inline MaskOverlapCounts overlap_counts(const WallMask& a, const WallMask& b) {
    if (!a.same_shape(b)) throw ShapeMismatch("mask dimensions differ");
    MaskOverlapCounts c;
    for (std::size_t k = 0; k < a.v.size(); ++k) {
        const bool fa = a.v[k] != 0, fb = b.v[k] != 0;
        c.intersection += (fa && fb) ? 1 : 0;
        c.union_ += (fa || fb) ? 1 : 0;
        c.count_a += fa ? 1 : 0;
        c.count_b += fb ? 1 : 0;
    }
    return c;
}

// 2|a n b| / (|a| + |b|); 1.0 when both masks are empty.
inline double dice(const WallMask& a, const WallMask& b) {
    const auto c = overlap_counts(a, b);
    if (c.count_a + c.count_b == 0) return 1.0;
    return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.count_a + c.count_b);
}

// |a n b| / |a u b|; 1.0 when both masks are empty.
inline double iou(const WallMask& a, const WallMask& b) {
    const auto c = overlap_counts(a, b);
    if (c.union_ == 0) return 1.0;
    return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

namespace detail {

inline double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 <= 0.0) return distance(p, a);
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double point_polyline_distance(const Point2& p, const Contour& c) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < c.points.size(); ++k)
        best = std::min(best, point_segment_distance(p, c.points[k - 1], c.points[k]));
    return best;
}

} // namespace detail

inline BoundaryError boundary_distance(const Contour& a, const Contour& b,
                                       std::optional<double> kappa = std::nullopt) {
    validate_contour(a);
    validate_contour(b);
    double sum_ab = 0.0, sum_ba = 0.0, max_ab = 0.0, max_ba = 0.0;
    for (const Point2& p : a.points) {
        const double d = detail::point_polyline_distance(p, b);
        sum_ab += d;
        max_ab = std::max(max_ab, d);
    }
    for (const Point2& p : b.points) {
        const double d = detail::point_polyline_distance(p, a);
        sum_ba += d;
        max_ba = std::max(max_ba, d);
    }
    BoundaryError e;
    e.mean_symmetric_px = 0.5 * (sum_ab / static_cast<double>(a.points.size()) +
                                 sum_ba / static_cast<double>(b.points.size()));
    e.hausdorff_px = std::max(max_ab, max_ba);
    if (kappa) {
        if (!(*kappa > 0.0)) throw OutOfRange("calibration factor must be > 0");
        e.mean_symmetric_mm = e.mean_symmetric_px * *kappa;
        e.hausdorff_mm = e.hausdorff_px * *kappa;
    }
    return e;
}

inline double cimt_error_mm(const ThicknessProfile& pred, const ThicknessProfile& gt, double kappa) {
    return std::abs(cimt_mm(pred, kappa) - cimt_mm(gt, kappa));
}

// Mann-Whitney AUC via average ranks, half credit for ties.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeMismatch("scores/labels length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y ? 1 : 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw OneClassOnly("roc_auc needs both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return scores[i] < scores[j]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // 1-based average rank of the tie block
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

inline ClassificationReport classification_report(std::span<const double> scores,
                                                  std::span<const int> labels, double threshold) {
    if (scores.empty()) throw EmptyInput("classification_report: empty input");
    if (scores.size() != labels.size()) throw ShapeMismatch("scores/labels length mismatch");
    if (!(threshold > 0.0 && threshold < 1.0)) throw OutOfRange("threshold must lie in (0, 1)");

    long long tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        const bool pred = scores[k] >= threshold;
        const bool truth = labels[k] != 0;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && truth) ++fn;
        else ++tn;
    }
    ClassificationReport r;
    r.threshold = threshold;
    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
    r.sensitivity = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.specificity = (tn + fp) > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
    const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = r.sensitivity;
    r.f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return r;
}

// Equal-width-bin ECE with the score-as-positive-probability convention.
inline double expected_calibration_error(std::span<const double> scores, std::span<const int> labels,
                                         int bins) {
    if (scores.empty()) throw EmptyInput("expected_calibration_error: empty input");
    if (scores.size() != labels.size()) throw ShapeMismatch("scores/labels length mismatch");
    if (bins < 1) throw OutOfRange("bins must be >= 1");

    std::vector<double> conf(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> acc(static_cast<std::size_t>(bins), 0.0);
    std::vector<long long> cnt(static_cast<std::size_t>(bins), 0);
    for (std::size_t k = 0; k < scores.size(); ++k) {
        int b = static_cast<int>(scores[k] * bins);
        b = std::clamp(b, 0, bins - 1);
        conf[static_cast<std::size_t>(b)] += scores[k];
        acc[static_cast<std::size_t>(b)] += labels[k] ? 1.0 : 0.0;
        cnt[static_cast<std::size_t>(b)] += 1;
    }
    double ece = 0.0;
    const double n = static_cast<double>(scores.size());
    for (int b = 0; b < bins; ++b) {
        const auto c = cnt[static_cast<std::size_t>(b)];
        if (c == 0) continue;
        const double mean_conf = conf[static_cast<std::size_t>(b)] / static_cast<double>(c);
        const double mean_acc = acc[static_cast<std::size_t>(b)] / static_cast<double>(c);
        ece += (static_cast<double>(c) / n) * std::abs(mean_conf - mean_acc);
    }
    return ece;
}

// Spearman rank correlation (average ranks for ties), for inspecting how
// per-case uncertainty tracks segmentation accuracy.
inline double rank_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeMismatch("rank_correlation length mismatch");
    if (a.size() < 2) throw TooSmall("rank_correlation needs >= 2 samples");
    auto ranks = [](std::span<const double> x) {
        const std::size_t n = x.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j < n && x[order[j]] == x[order[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + 1 + j);
            for (std::size_t k = i; k < j; ++k) r[order[k]] = avg;
            i = j;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) { ma += ra[k]; mb += rb[k]; }
    ma /= n; mb /= n;
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += (ra[k] - ma) * (rb[k] - mb);
        va += (ra[k] - ma) * (ra[k] - ma);
        vb += (rb[k] - mb) * (rb[k] - mb);
    }
    if (va <= 0.0 || vb <= 0.0) return 0.0; // a constant sequence carries no ordering
    return num / std::sqrt(va * vb);
}

} // namespace carotid
