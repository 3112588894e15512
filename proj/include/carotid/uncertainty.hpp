#pragma once
// Monte Carlo dropout aggregation for scalar probabilities and probability
// maps: sample mean and population variance (1/K form).

#include <algorithm>
#include <span>
#include <vector>

#include "carotid/errors.hpp"
#include "carotid/grid.hpp"

namespace carotid {

struct ScalarStats {
    double mean = 0.0;
    double variance = 0.0;
};

// Scalar summaries are represented as 1x1 grids so the same review rule
// (mean of the variance map vs tau) covers both cases.
struct UncertaintySummary {
    Grid mean;
    Grid variance;
    bool flagged = false;

    bool is_scalar() const { return mean.height == 1 && mean.width == 1; }
};

// mean = (1/K) sum p_k;  variance = (1/K) sum (p_k - mean)^2
// An all-identical ensemble reports that value and exactly zero variance,
// so zero spread never picks up rounding dust from the mean.
inline ScalarStats mc_aggregate_scalar(std::span<const double> samples) {
    if (samples.empty()) throw EmptyEnsemble("MC ensemble is empty");
    double mean = 0.0, lo = samples[0], hi = samples[0];
    for (double p : samples) {
        if (!(p >= 0.0 && p <= 1.0)) throw OutOfRange("MC sample outside [0, 1]");
        mean += p;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    if (lo == hi) return {lo, 0.0};
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double p : samples) var += (p - mean) * (p - mean);
    var /= static_cast<double>(samples.size());
    return {mean, var};
}

inline UncertaintySummary summary_from_scalar(const ScalarStats& s) {
    UncertaintySummary out;
    out.mean = Grid(1, 1, s.mean);
    out.variance = Grid(1, 1, s.variance);
    return out;
}

// Per-pixel scalar aggregation across K probability maps.
inline UncertaintySummary mc_aggregate_map(const std::vector<ProbMap>& samples) {
    if (samples.empty()) throw EmptyEnsemble("MC ensemble is empty");
    const ProbMap& first = samples.front();
    for (const ProbMap& m : samples) {
        if (!m.same_shape(first)) throw ShapeMismatch("MC sample maps have different shapes");
        validate_prob_map(m);
    }
    const double inv_k = 1.0 / static_cast<double>(samples.size());
    UncertaintySummary out;
    out.mean = Grid(first.height, first.width, 0.0);
    out.variance = Grid(first.height, first.width, 0.0);
    Grid lo = first, hi = first;
    for (const ProbMap& m : samples)
        for (std::size_t k = 0; k < m.v.size(); ++k) {
            out.mean.v[k] += m.v[k];
            lo.v[k] = std::min(lo.v[k], m.v[k]);
            hi.v[k] = std::max(hi.v[k], m.v[k]);
        }
    for (double& x : out.mean.v) x *= inv_k;
    for (const ProbMap& m : samples)
        for (std::size_t k = 0; k < m.v.size(); ++k) {
            const double d = m.v[k] - out.mean.v[k];
            out.variance.v[k] += d * d;
        }
    for (std::size_t k = 0; k < out.variance.v.size(); ++k) {
        if (lo.v[k] == hi.v[k]) { // zero spread exactly
            out.mean.v[k] = lo.v[k];
            out.variance.v[k] = 0.0;
        } else {
            out.variance.v[k] *= inv_k;
        }
    }
    return out;
}

inline double mean_variance(const UncertaintySummary& s) {
    double acc = 0.0;
    for (double x : s.variance.v) acc += x;
    return s.variance.v.empty() ? 0.0 : acc / static_cast<double>(s.variance.v.size());
}

// Flags a summary for manual review iff the mean of its variance map
// exceeds tau (for scalars: iff variance > tau).
inline std::vector<bool> flag_reviews(std::vector<UncertaintySummary>& summaries, double tau) {
    if (tau < 0.0) throw OutOfRange("review threshold must be >= 0");
    std::vector<bool> flags(summaries.size(), false);
    for (std::size_t k = 0; k < summaries.size(); ++k) {
        summaries[k].flagged = mean_variance(summaries[k]) > tau;
        flags[k] = summaries[k].flagged;
    }
    return flags;
}

} // namespace carotid
