#pragma once
// Multitask loss suite and physics-guided residuals, implemented as pure
// numerical kernels with analytic gradients that are verifiable against
// central finite differences.

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "carotid/errors.hpp"
#include "carotid/grid.hpp"
#include "carotid/hemodynamics.hpp"

namespace carotid {

// Multitask weights (outer) and physics-residual weights (inner).
// Outer defaults follow the baseline configuration; lambda_phys defaults to
// 0 because Doppler/CFD fields are absent in the baseline dataset.
struct LossWeights {
    double lambda_seg = 1.00;
    double lambda_risk = 0.25;
    double lambda_smooth = 0.03;
    double lambda_phys = 0.0;
    double lambda_div = 1.0;
    double lambda_bc = 1.0;
    double lambda_wss = 1.0;
};

struct DiscreteVelocityField {
    Grid u; // x-component
    Grid v; // y-component
    double spacing = 1.0;
};

inline constexpr double kProbClampLo = 1e-7;
inline constexpr double kProbClampHi = 1.0 - 1e-7;
inline constexpr double kDiceEps = 1e-6;

// ---------------------------------------------------------------------------
// Binary cross-entropy
// ---------------------------------------------------------------------------

inline double bce(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw ShapeMismatch("bce: pred/target length mismatch");
    if (pred.empty()) throw EmptyInput("bce: empty input");
    double acc = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double p = std::clamp(pred[k], kProbClampLo, kProbClampHi);
        acc += -target[k] * std::log(p) - (1.0 - target[k]) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(pred.size());
}

inline double bce(const ProbMap& pred, const WallMask& target) {
    if (pred.height != target.height || pred.width != target.width)
        throw ShapeMismatch("bce: map dimensions differ");
    std::vector<double> t(target.v.begin(), target.v.end());
    return bce(std::span<const double>(pred.v), std::span<const double>(t));
}

// d(bce)/d(pred_k); zero where the clamp is active.
inline std::vector<double> bce_grad(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size()) throw ShapeMismatch("bce_grad: length mismatch");
    std::vector<double> g(pred.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(pred.size());
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double p = pred[k];
        if (p <= kProbClampLo || p >= kProbClampHi) continue;
        g[k] = inv_n * (-target[k] / p + (1.0 - target[k]) / (1.0 - p));
    }
    return g;
}

// ---------------------------------------------------------------------------
// Soft Dice loss
// ---------------------------------------------------------------------------

inline double dice_loss(const ProbMap& pred, const WallMask& target) {
    if (pred.height != target.height || pred.width != target.width)
        throw ShapeMismatch("dice_loss: map dimensions differ");
    double inter = 0.0, sum_p = 0.0, sum_m = 0.0;
    for (std::size_t k = 0; k < pred.v.size(); ++k) {
        inter += pred.v[k] * (target.v[k] ? 1.0 : 0.0);
        sum_p += pred.v[k];
        sum_m += target.v[k] ? 1.0 : 0.0;
    }
    return 1.0 - (2.0 * inter + kDiceEps) / (sum_p + sum_m + kDiceEps);
}

inline std::vector<double> dice_loss_grad(const ProbMap& pred, const WallMask& target) {
    if (pred.height != target.height || pred.width != target.width)
        throw ShapeMismatch("dice_loss_grad: map dimensions differ");
    double inter = 0.0, sum_p = 0.0, sum_m = 0.0;
    for (std::size_t k = 0; k < pred.v.size(); ++k) {
        inter += pred.v[k] * (target.v[k] ? 1.0 : 0.0);
        sum_p += pred.v[k];
        sum_m += target.v[k] ? 1.0 : 0.0;
    }
    const double a = 2.0 * inter + kDiceEps;
    const double b = sum_p + sum_m + kDiceEps;
    std::vector<double> g(pred.v.size());
    for (std::size_t k = 0; k < pred.v.size(); ++k) {
        const double m = target.v[k] ? 1.0 : 0.0;
        g[k] = -(2.0 * m * b - a) / (b * b);
    }
    return g;
}

inline double seg_loss(const ProbMap& pred, const WallMask& target) {
    return bce(pred, target) + dice_loss(pred, target);
}

// ---------------------------------------------------------------------------
// Masked event-risk loss
// ---------------------------------------------------------------------------

struct MaskedLoss {
    double value = 0.0;
    bool no_labels = false;
};

// Mean BCE over entries with avail = 1; (0, no_labels) when nothing is labeled.
inline MaskedLoss risk_loss_masked(std::span<const double> preds, std::span<const double> labels,
                                   std::span<const int> avail) {
    if (preds.size() != labels.size() || preds.size() != avail.size())
        throw ShapeMismatch("risk_loss_masked: length mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < preds.size(); ++k) {
        if (!avail[k]) continue;
        const double p = std::clamp(preds[k], kProbClampLo, kProbClampHi);
        acc += -labels[k] * std::log(p) - (1.0 - labels[k]) * std::log(1.0 - p);
        ++n;
    }
    if (n == 0) return {0.0, true};
    return {acc / static_cast<double>(n), false};
}

// ---------------------------------------------------------------------------
// Smoothness regularizer
// ---------------------------------------------------------------------------

// L1 norms of forward x- and y-differences; the normalized variant divides
// by the number of difference terms (useful away from the fixed training
// resolution).
inline double smoothness_loss(const ProbMap& pred, bool normalized = false) {
    if (pred.height < 2 || pred.width < 2) throw TooSmall("smoothness_loss needs H, W >= 2");
    double acc = 0.0;
    for (int i = 0; i < pred.height; ++i)
        for (int j = 0; j + 1 < pred.width; ++j)
            acc += std::abs(pred.at(i, j + 1) - pred.at(i, j));
    for (int i = 0; i + 1 < pred.height; ++i)
        for (int j = 0; j < pred.width; ++j)
            acc += std::abs(pred.at(i + 1, j) - pred.at(i, j));
    if (normalized) {
        const double terms = static_cast<double>(pred.height) * (pred.width - 1) +
                             static_cast<double>(pred.height - 1) * pred.width;
        acc /= terms;
    }
    return acc;
}

// Subgradient with sign(0) = 0; exact gradient away from kinks.
inline Grid smoothness_loss_grad(const ProbMap& pred, bool normalized = false) {
    if (pred.height < 2 || pred.width < 2) throw TooSmall("smoothness_loss needs H, W >= 2");
    Grid g(pred.height, pred.width, 0.0);
    auto sgn = [](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); };
    for (int i = 0; i < pred.height; ++i)
        for (int j = 0; j + 1 < pred.width; ++j) {
            const double s = sgn(pred.at(i, j + 1) - pred.at(i, j));
            g.at(i, j + 1) += s;
            g.at(i, j) -= s;
        }
    for (int i = 0; i + 1 < pred.height; ++i)
        for (int j = 0; j < pred.width; ++j) {
            const double s = sgn(pred.at(i + 1, j) - pred.at(i, j));
            g.at(i + 1, j) += s;
            g.at(i, j) -= s;
        }
    if (normalized) {
        const double terms = static_cast<double>(pred.height) * (pred.width - 1) +
                             static_cast<double>(pred.height - 1) * pred.width;
        for (double& x : g.v) x /= terms;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Physics-guided residuals
// ---------------------------------------------------------------------------

// Sum over interior cells of (central-difference divergence)^2 * cell area.
inline double divergence_term(const DiscreteVelocityField& f) {
    if (!f.u.same_shape(f.v)) throw GridMismatch("velocity components have different shapes");
    if (!(f.spacing > 0.0)) throw OutOfRange("grid spacing must be > 0");
    const double inv2h = 1.0 / (2.0 * f.spacing);
    const double area = f.spacing * f.spacing;
    double acc = 0.0;
    for (int i = 1; i + 1 < f.u.height; ++i)
        for (int j = 1; j + 1 < f.u.width; ++j) {
            const double div = (f.u.at(i, j + 1) - f.u.at(i, j - 1)) * inv2h +
                               (f.v.at(i + 1, j) - f.v.at(i - 1, j)) * inv2h;
            acc += div * div * area;
        }
    return acc;
}

// Gradients of divergence_term with respect to the u and v grids.
inline std::pair<Grid, Grid> divergence_term_grad(const DiscreteVelocityField& f) {
    if (!f.u.same_shape(f.v)) throw GridMismatch("velocity components have different shapes");
    const double inv2h = 1.0 / (2.0 * f.spacing);
    const double area = f.spacing * f.spacing;
    Grid gu(f.u.height, f.u.width, 0.0);
    Grid gv(f.u.height, f.u.width, 0.0);
    for (int i = 1; i + 1 < f.u.height; ++i)
        for (int j = 1; j + 1 < f.u.width; ++j) {
            const double div = (f.u.at(i, j + 1) - f.u.at(i, j - 1)) * inv2h +
                               (f.v.at(i + 1, j) - f.v.at(i - 1, j)) * inv2h;
            const double w = 2.0 * div * area * inv2h;
            gu.at(i, j + 1) += w;
            gu.at(i, j - 1) -= w;
            gv.at(i + 1, j) += w;
            gv.at(i - 1, j) -= w;
        }
    return {std::move(gu), std::move(gv)};
}

namespace detail {

inline void require_same_time_grid(std::span<const double> a, std::span<const double> b,
                                   const char* what) {
    if (a.size() != b.size()) throw TimeGridMismatch(std::string(what) + ": time grid length mismatch");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (std::abs(a[k] - b[k]) > 1e-12)
            throw TimeGridMismatch(std::string(what) + ": time grids differ");
}

} // namespace detail

// Left-rectangle quadrature of (q_hat - q_doppler)^2 over the shared grid.
inline double boundary_term(const FlowWaveform& q_hat, const FlowWaveform& q_doppler) {
    detail::require_same_time_grid(q_hat.t, q_doppler.t, "boundary_term");
    if (q_hat.t.size() < 2) throw TooFewSamples("boundary_term needs >= 2 samples");
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < q_hat.t.size(); ++k) {
        const double d = q_hat.q[k] - q_doppler.q[k];
        acc += d * d * (q_hat.t[k + 1] - q_hat.t[k]);
    }
    return acc;
}

// d(boundary_term)/d(q_hat_k); the final sample carries no rectangle weight.
inline std::vector<double> boundary_term_grad(const FlowWaveform& q_hat, const FlowWaveform& q_doppler) {
    detail::require_same_time_grid(q_hat.t, q_doppler.t, "boundary_term_grad");
    std::vector<double> g(q_hat.q.size(), 0.0);
    for (std::size_t k = 0; k + 1 < q_hat.t.size(); ++k)
        g[k] = 2.0 * (q_hat.q[k] - q_doppler.q[k]) * (q_hat.t[k + 1] - q_hat.t[k]);
    return g;
}

inline double wss_consistency_term(const WssSeries& tau_hat, const WssSeries& tau_cfd) {
    detail::require_same_time_grid(tau_hat.t, tau_cfd.t, "wss_consistency_term");
    if (tau_hat.t.size() < 2) throw TooFewSamples("wss term needs >= 2 samples");
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < tau_hat.t.size(); ++k) {
        const std::array<double, 3> d{tau_hat.tau[k][0] - tau_cfd.tau[k][0],
                                      tau_hat.tau[k][1] - tau_cfd.tau[k][1],
                                      tau_hat.tau[k][2] - tau_cfd.tau[k][2]};
        acc += tau_magnitude(d) * (tau_hat.t[k + 1] - tau_hat.t[k]);
    }
    return acc;
}

struct PhysLossTerms {
    double total = 0.0;
    double div_term = 0.0;
    double bc_term = 0.0;
    double wss_term = 0.0;
};

inline PhysLossTerms phys_loss(const DiscreteVelocityField& field, const FlowWaveform& q_hat,
                               const FlowWaveform& q_doppler, const WssSeries& tau_hat,
                               const WssSeries& tau_cfd, const LossWeights& w) {
    PhysLossTerms out;
    out.div_term = divergence_term(field);
    out.bc_term = boundary_term(q_hat, q_doppler);
    out.wss_term = wss_consistency_term(tau_hat, tau_cfd);
    out.total = w.lambda_div * out.div_term + w.lambda_bc * out.bc_term + w.lambda_wss * out.wss_term;
    return out;
}

// ---------------------------------------------------------------------------
// Total multitask objective
// ---------------------------------------------------------------------------

inline double total_loss(double l_seg, double l_risk, double l_smooth, double l_phys,
                         const LossWeights& w) {
    for (double x : {l_seg, l_risk, l_smooth, l_phys})
        if (!std::isfinite(x)) throw NonFinite("total_loss: non-finite component");
    return w.lambda_seg * l_seg + w.lambda_risk * l_risk + w.lambda_smooth * l_smooth +
           w.lambda_phys * l_phys;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification
// ---------------------------------------------------------------------------

// Max relative error between an analytic gradient and central differences of
// f at the given point. The denominator per coordinate is
// max(|numeric|, |analytic|, noise floor): a derivative smaller than the
// roundoff of (f(x+h) - f(x-h)) / 2h cannot be resolved by the difference
// quotient, so such coordinates are measured against that floor instead.
inline double max_relative_gradient_error(const std::function<double(const std::vector<double>&)>& f,
                                          const std::vector<double>& analytic_grad,
                                          std::vector<double> point, double step) {
    if (!(step > 0.0)) throw OutOfRange("finite-difference step must be > 0");
    if (analytic_grad.size() != point.size()) throw ShapeMismatch("gradient/point length mismatch");
    const double f0 = f(point);
    if (!std::isfinite(f0)) throw NonFinite("loss is non-finite at the gradient-check point");
    const double noise_floor = std::max(
        1e-8, 1e4 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0)) / step);
    double worst = 0.0;
    for (std::size_t k = 0; k < point.size(); ++k) {
        const double saved = point[k];
        point[k] = saved + step;
        const double fp = f(point);
        point[k] = saved - step;
        const double fm = f(point);
        point[k] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NonFinite("loss evaluated to a non-finite value during gradient check");
        const double numeric = (fp - fm) / (2.0 * step);
        const double denom = std::max({std::abs(numeric), std::abs(analytic_grad[k]), noise_floor});
        worst = std::max(worst, std::abs(numeric - analytic_grad[k]) / denom);
    }
    return worst;
}

} // namespace carotid
