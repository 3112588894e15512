#pragma once
// Desk-scale dropout-capable risk head: five clinical inputs, one hidden
// layer, sigmoid output. Includes the training protocol (AdamW, warm-up +
// cosine schedule, batch size 8) and a plain-text model format.
//
// Dropout is inverted: stochastic passes scale kept units by 1/(1-p), so
// deterministic inference applies no rescale. Stochastic passes stay
// reproducible because every caller supplies its own seeded generator.

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carotid/config.hpp"
#include "carotid/errors.hpp"
#include "carotid/losses.hpp"
#include "carotid/metrics.hpp"
#include "carotid/rng.hpp"

namespace carotid {

inline constexpr int kClinicalFeatures = 5; // age, sex, hypertension, diabetes, bmi

enum class Activation { relu, identity };

// z-scores continuous features (age, bmi); binary flags pass through.
struct FeatureScaler {
    std::array<double, kClinicalFeatures> mean{0, 0, 0, 0, 0};
    std::array<double, kClinicalFeatures> stdev{1, 1, 1, 1, 1};
    std::array<int, kClinicalFeatures> continuous{1, 0, 0, 0, 1};

    std::array<double, kClinicalFeatures> apply(std::span<const double> x) const {
        std::array<double, kClinicalFeatures> out{};
        for (int j = 0; j < kClinicalFeatures; ++j)
            out[static_cast<std::size_t>(j)] =
                continuous[static_cast<std::size_t>(j)]
                    ? (x[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]) /
                          stdev[static_cast<std::size_t>(j)]
                    : x[static_cast<std::size_t>(j)];
        return out;
    }
};

inline FeatureScaler fit_scaler(const std::vector<std::array<double, kClinicalFeatures>>& rows) {
    if (rows.empty()) throw EmptyInput("fit_scaler: no rows");
    FeatureScaler s;
    for (int j = 0; j < kClinicalFeatures; ++j) {
        if (!s.continuous[static_cast<std::size_t>(j)]) continue;
        double m = 0.0;
        for (const auto& r : rows) m += r[static_cast<std::size_t>(j)];
        m /= static_cast<double>(rows.size());
        double var = 0.0;
        for (const auto& r : rows) {
            const double d = r[static_cast<std::size_t>(j)] - m;
            var += d * d;
        }
        var /= static_cast<double>(rows.size());
        s.mean[static_cast<std::size_t>(j)] = m;
        s.stdev[static_cast<std::size_t>(j)] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

struct DropoutMlp {
    int input_dim = kClinicalFeatures;
    int hidden_dim = 16;
    double dropout_rate = 0.2;
    Activation activation = Activation::relu;
    std::vector<double> w1; // hidden_dim x input_dim, row-major
    std::vector<double> b1; // hidden_dim
    std::vector<double> w2; // hidden_dim
    double b2 = 0.0;
    FeatureScaler scaler;
};

// Glorot-uniform weights from a seeded generator; zero biases.
inline DropoutMlp init_mlp(int hidden, double dropout, std::uint64_t seed) {
    if (hidden < 1) throw OutOfRange("hidden width must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw BadDropout("dropout rate must lie in [0, 1)");
    DropoutMlp m;
    m.hidden_dim = hidden;
    m.dropout_rate = dropout;
    m.w1.resize(static_cast<std::size_t>(hidden) * kClinicalFeatures);
    m.b1.assign(static_cast<std::size_t>(hidden), 0.0);
    m.w2.resize(static_cast<std::size_t>(hidden));
    Rng rng(seed);
    const double lim1 = std::sqrt(6.0 / (kClinicalFeatures + hidden));
    for (double& w : m.w1) w = rng.uniform(-lim1, lim1);
    const double lim2 = std::sqrt(6.0 / (hidden + 1));
    for (double& w : m.w2) w = rng.uniform(-lim2, lim2);
    return m;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

struct ForwardTrace {
    std::array<double, kClinicalFeatures> scaled{};
    std::vector<double> pre_hidden;    // z1
    std::vector<double> hidden;        // after activation and dropout scaling
    std::vector<std::uint8_t> keep;    // dropout keep mask (all 1 when deterministic)
    double logit = 0.0;
};

// keep_mask: nullptr = deterministic (no dropout); otherwise 0/1 per hidden
// unit, kept units scaled by 1/(1-p).
inline ForwardTrace forward_trace(const DropoutMlp& m, std::span<const double> x,
                                  const std::uint8_t* keep_mask) {
    if (x.size() != static_cast<std::size_t>(m.input_dim))
        throw ShapeMismatch("forward: feature vector has wrong length");
    for (double v : x)
        if (!std::isfinite(v)) throw NonFinite("forward: non-finite feature");
    ForwardTrace t;
    t.scaled = m.scaler.apply(x);
    t.pre_hidden.resize(static_cast<std::size_t>(m.hidden_dim));
    t.hidden.resize(static_cast<std::size_t>(m.hidden_dim));
    t.keep.assign(static_cast<std::size_t>(m.hidden_dim), 1);
    const double inv_keep = m.dropout_rate > 0.0 ? 1.0 / (1.0 - m.dropout_rate) : 1.0;
    for (int h = 0; h < m.hidden_dim; ++h) {
        double z = m.b1[static_cast<std::size_t>(h)];
        for (int j = 0; j < m.input_dim; ++j)
            z += m.w1[static_cast<std::size_t>(h) * m.input_dim + j] * t.scaled[static_cast<std::size_t>(j)];
        t.pre_hidden[static_cast<std::size_t>(h)] = z;
        double a = m.activation == Activation::relu ? std::max(0.0, z) : z;
        if (keep_mask) {
            t.keep[static_cast<std::size_t>(h)] = keep_mask[h];
            a = keep_mask[h] ? a * inv_keep : 0.0;
        }
        t.hidden[static_cast<std::size_t>(h)] = a;
        t.logit += m.w2[static_cast<std::size_t>(h)] * a;
    }
    t.logit += m.b2;
    return t;
}

} // namespace detail

inline double forward_logit_deterministic(const DropoutMlp& m, std::span<const double> x) {
    return detail::forward_trace(m, x, nullptr).logit;
}

// Stochastic pre-sigmoid output; the keep mask is drawn from rng.
inline double forward_logit_stochastic(const DropoutMlp& m, std::span<const double> x, Rng& rng) {
    std::vector<std::uint8_t> keep(static_cast<std::size_t>(m.hidden_dim), 1);
    for (auto& k : keep) k = rng.uniform() >= m.dropout_rate ? 1 : 0;
    return detail::forward_trace(m, x, keep.data()).logit;
}

// Forced-mask variant (exercises the dropout path deterministically).
inline double forward_logit_masked(const DropoutMlp& m, std::span<const double> x,
                                   std::span<const std::uint8_t> keep) {
    if (keep.size() != static_cast<std::size_t>(m.hidden_dim))
        throw ShapeMismatch("forward: keep mask has wrong length");
    return detail::forward_trace(m, x, keep.data()).logit;
}

inline double forward_deterministic(const DropoutMlp& m, std::span<const double> x) {
    return sigmoid(forward_logit_deterministic(m, x));
}

inline double forward_stochastic(const DropoutMlp& m, std::span<const double> x, Rng& rng) {
    return sigmoid(forward_logit_stochastic(m, x, rng));
}

// K dropout-active passes with a per-call generator.
inline std::vector<double> mc_predict_risk(const DropoutMlp& m, std::span<const double> x, int k,
                                           std::uint64_t seed) {
    if (k < 1) throw OutOfRange("MC sample count must be >= 1");
    Rng rng(seed);
    std::vector<double> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = forward_stochastic(m, x, rng);
    return out;
}

// ---------------------------------------------------------------------------
// Learning-rate schedule
// ---------------------------------------------------------------------------

struct LrSchedule {
    double base_lr = 3e-4;
    double min_lr = 1e-6;
    double warmup_epochs = 5;
    double total_epochs = 60;
};

// Linear ramp min_lr -> base_lr over warmup, then cosine decay back to
// min_lr at total_epochs. Fractional epochs are allowed so per-step
// schedules can reuse the same curve.
inline double lr_at(double epoch, const LrSchedule& s) {
    if (!(s.min_lr <= s.base_lr) || s.warmup_epochs < 0 || !(s.total_epochs > 0) ||
        s.warmup_epochs > s.total_epochs)
        throw OutOfRange("invalid learning-rate schedule");
    if (epoch < 0.0 || epoch > s.total_epochs)
        throw OutOfRange("epoch outside [0, total_epochs]");
    if (epoch <= s.warmup_epochs) {
        if (epoch == s.warmup_epochs || s.warmup_epochs == 0.0) return s.base_lr;
        return s.min_lr + (s.base_lr - s.min_lr) * (epoch / s.warmup_epochs);
    }
    const double span = s.total_epochs - s.warmup_epochs;
    const double progress = (epoch - s.warmup_epochs) / span;
    if (progress >= 1.0) return s.min_lr;
    return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

struct OptimizerState {
    std::vector<double> m;
    std::vector<double> v;
    long long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

// Decoupled weight decay applied separately from the bias-corrected
// adaptive update.
inline void adamw_step(OptimizerState& st, std::vector<double>& params,
                       const std::vector<double>& grads, double lr) {
    if (params.size() != grads.size()) throw ShapeMismatch("adamw_step: params/grads mismatch");
    if (!(lr > 0.0)) throw OutOfRange("learning rate must be > 0");
    if (st.m.empty()) {
        st.m.assign(params.size(), 0.0);
        st.v.assign(params.size(), 0.0);
    }
    if (st.m.size() != params.size()) throw ShapeMismatch("adamw_step: state/params mismatch");

    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        params[k] -= lr * st.weight_decay * params[k];
        st.m[k] = st.beta1 * st.m[k] + (1.0 - st.beta1) * grads[k];
        st.v[k] = st.beta2 * st.v[k] + (1.0 - st.beta2) * grads[k] * grads[k];
        const double mhat = st.m[k] / bc1;
        const double vhat = st.v[k] / bc2;
        params[k] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainHistory {
    std::vector<double> loss; // end-of-epoch masked BCE over the training set
    std::vector<double> auc;  // deterministic AUC on the evaluation set
};

struct TrainResult {
    DropoutMlp model;
    TrainHistory history;
};

struct EvalSet {
    std::vector<std::array<double, kClinicalFeatures>> features;
    std::vector<int> labels;
    std::vector<int> avail;
};

namespace detail {

inline std::vector<double> flatten_params(const DropoutMlp& m) {
    std::vector<double> p;
    p.reserve(m.w1.size() + m.b1.size() + m.w2.size() + 1);
    p.insert(p.end(), m.w1.begin(), m.w1.end());
    p.insert(p.end(), m.b1.begin(), m.b1.end());
    p.insert(p.end(), m.w2.begin(), m.w2.end());
    p.push_back(m.b2);
    return p;
}

inline void unflatten_params(DropoutMlp& m, const std::vector<double>& p) {
    std::size_t off = 0;
    std::copy_n(p.begin() + off, m.w1.size(), m.w1.begin());
    off += m.w1.size();
    std::copy_n(p.begin() + off, m.b1.size(), m.b1.begin());
    off += m.b1.size();
    std::copy_n(p.begin() + off, m.w2.size(), m.w2.begin());
    off += m.w2.size();
    m.b2 = p[off];
}

inline double eval_auc(const DropoutMlp& m, const EvalSet& set) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < set.features.size(); ++i) {
        if (!set.avail[i]) continue;
        scores.push_back(forward_deterministic(m, set.features[i]));
        labels.push_back(set.labels[i]);
    }
    return roc_auc(scores, labels);
}

} // namespace detail

// Minibatch training with the masked risk loss. The scaler is fitted on the
// supplied (training) rows only. When no validation set is given, history
// AUC is computed on the labeled training rows. The identity activation is
// a test configuration (reduces the head to logistic regression).
inline TrainResult train_risk_head(const std::vector<std::array<double, kClinicalFeatures>>& features,
                                   const std::vector<int>& labels, const std::vector<int>& avail,
                                   const RunConfig& cfg, const EvalSet* val = nullptr,
                                   Activation activation = Activation::relu) {
    const std::size_t n = features.size();
    if (n == 0 || labels.size() != n || avail.size() != n)
        throw ShapeMismatch("train_risk_head: input length mismatch");
    int pos = 0, neg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!avail[i]) continue;
        (labels[i] ? pos : neg) += 1;
    }
    if (pos + neg == 0) throw EmptyInput("train_risk_head: no labeled samples");
    if (pos == 0 || neg == 0) throw OneClassOnly("train_risk_head: labeled samples are one class");

    DropoutMlp model = init_mlp(cfg.hidden_dim, cfg.dropout_rate, cfg.seed);
    model.activation = activation;
    model.scaler = fit_scaler(features);

    LrSchedule sched{cfg.base_lr, cfg.min_lr, static_cast<double>(cfg.warmup_epochs),
                     static_cast<double>(cfg.total_epochs)};
    OptimizerState opt;
    opt.weight_decay = cfg.weight_decay;
    std::vector<double> params = detail::flatten_params(model);

    Rng train_rng(mix_seed(cfg.seed, 0x7261696Eull)); // shuffling and dropout draws
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    EvalSet train_set{features, labels, avail};
    const EvalSet& eval_set = val ? *val : train_set;

    TrainHistory history;
    const std::size_t w1n = model.w1.size(), b1n = model.b1.size(), w2n = model.w2.size();
    const double inv_keep = cfg.dropout_rate > 0.0 ? 1.0 / (1.0 - cfg.dropout_rate) : 1.0;

    for (int epoch = 0; epoch < cfg.total_epochs; ++epoch) {
        const double lr = lr_at(static_cast<double>(epoch), sched);
        train_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<double> grads(params.size(), 0.0);
            int labeled = 0;
            for (std::size_t b = start; b < stop; ++b)
                if (avail[order[b]]) ++labeled;
            if (labeled == 0) continue;

            detail::unflatten_params(model, params);
            for (std::size_t b = start; b < stop; ++b) {
                const std::size_t i = order[b];
                std::vector<std::uint8_t> keep(static_cast<std::size_t>(model.hidden_dim), 1);
                for (auto& k : keep) k = train_rng.uniform() >= cfg.dropout_rate ? 1 : 0;
                if (!avail[i]) continue; // unlabeled rows draw no dropout mask gradient
                const auto trace = detail::forward_trace(model, features[i], keep.data());
                const double prob = sigmoid(trace.logit);
                const double dlogit = (prob - static_cast<double>(labels[i])) / static_cast<double>(labeled);
                for (int h = 0; h < model.hidden_dim; ++h) {
                    const std::size_t hs = static_cast<std::size_t>(h);
                    grads[w1n + b1n + hs] += dlogit * trace.hidden[hs]; // dw2
                    if (!trace.keep[hs]) continue;
                    double dz = dlogit * model.w2[hs] * inv_keep;
                    if (model.activation == Activation::relu && trace.pre_hidden[hs] <= 0.0) dz = 0.0;
                    for (int j = 0; j < model.input_dim; ++j)
                        grads[hs * static_cast<std::size_t>(model.input_dim) + static_cast<std::size_t>(j)] +=
                            dz * trace.scaled[static_cast<std::size_t>(j)];
                    grads[w1n + hs] += dz; // db1
                }
                grads[w1n + b1n + w2n] += dlogit; // db2
            }
            adamw_step(opt, params, grads, lr);
        }

        detail::unflatten_params(model, params);
        std::vector<double> preds(n), label_d(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = forward_deterministic(model, features[i]);
            label_d[i] = static_cast<double>(labels[i]);
        }
        history.loss.push_back(risk_loss_masked(preds, label_d, avail).value);
        history.auc.push_back(detail::eval_auc(model, eval_set));
    }

    detail::unflatten_params(model, params);
    return {std::move(model), std::move(history)};
}

// ---------------------------------------------------------------------------
// Persistence: key=value header plus whitespace-separated matrices
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace detail

inline void save_risk_model(const DropoutMlp& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write model file: " + path);
    out << "riskmlp v1\n";
    out << "input_dim=" << m.input_dim << "\n";
    out << "hidden_dim=" << m.hidden_dim << "\n";
    out << "dropout_rate=" << detail::fmt_double(m.dropout_rate) << "\n";
    out << "activation=" << (m.activation == Activation::relu ? "relu" : "identity") << "\n";
    auto write_row = [&](const char* name, std::span<const double> row) {
        out << name;
        for (double x : row) out << " " << detail::fmt_double(x);
        out << "\n";
    };
    write_row("scaler_mean", m.scaler.mean);
    write_row("scaler_std", m.scaler.stdev);
    out << "scaler_continuous";
    for (int c : m.scaler.continuous) out << " " << c;
    out << "\n";
    out << "w1 " << m.hidden_dim << " " << m.input_dim << "\n";
    for (int h = 0; h < m.hidden_dim; ++h) {
        for (int j = 0; j < m.input_dim; ++j)
            out << (j ? " " : "")
                << detail::fmt_double(m.w1[static_cast<std::size_t>(h) * m.input_dim + j]);
        out << "\n";
    }
    out << "b1 " << m.hidden_dim << "\n";
    for (int h = 0; h < m.hidden_dim; ++h)
        out << (h ? " " : "") << detail::fmt_double(m.b1[static_cast<std::size_t>(h)]);
    out << "\n";
    out << "w2 " << m.hidden_dim << "\n";
    for (int h = 0; h < m.hidden_dim; ++h)
        out << (h ? " " : "") << detail::fmt_double(m.w2[static_cast<std::size_t>(h)]);
    out << "\n";
    out << "b2 " << detail::fmt_double(m.b2) << "\n";
    if (!out) throw IoError("failed writing model file: " + path);
}

inline DropoutMlp load_risk_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string word;
    in >> word;
    std::string version;
    in >> version;
    if (word != "riskmlp" || version != "v1")
        throw ValidationError("unrecognized model file header in " + path);

    DropoutMlp m;
    auto read_kv_int = [&](const char* key) {
        in >> word;
        const std::string prefix = std::string(key) + "=";
        if (word.rfind(prefix, 0) != 0) throw ValidationError("model file: expected " + prefix);
        return std::stoi(word.substr(prefix.size()));
    };
    m.input_dim = read_kv_int("input_dim");
    if (m.input_dim != kClinicalFeatures)
        throw ValidationError("model file: unsupported input_dim");
    m.hidden_dim = read_kv_int("hidden_dim");
    in >> word;
    if (word.rfind("dropout_rate=", 0) != 0) throw ValidationError("model file: expected dropout_rate");
    m.dropout_rate = std::stod(word.substr(13));
    in >> word;
    if (word == "activation=relu") m.activation = Activation::relu;
    else if (word == "activation=identity") m.activation = Activation::identity;
    else throw ValidationError("model file: unknown activation");

    auto expect = [&](const char* name) {
        in >> word;
        if (word != name) throw ValidationError(std::string("model file: expected ") + name);
    };
    expect("scaler_mean");
    for (auto& x : m.scaler.mean) in >> x;
    expect("scaler_std");
    for (auto& x : m.scaler.stdev) in >> x;
    expect("scaler_continuous");
    for (auto& x : m.scaler.continuous) in >> x;

    int rows = 0, cols = 0;
    expect("w1");
    in >> rows >> cols;
    if (rows != m.hidden_dim || cols != m.input_dim)
        throw ValidationError("model file: w1 shape mismatch");
    m.w1.resize(static_cast<std::size_t>(rows) * cols);
    for (auto& x : m.w1) in >> x;
    expect("b1");
    in >> rows;
    if (rows != m.hidden_dim) throw ValidationError("model file: b1 shape mismatch");
    m.b1.resize(static_cast<std::size_t>(rows));
    for (auto& x : m.b1) in >> x;
    expect("w2");
    in >> rows;
    if (rows != m.hidden_dim) throw ValidationError("model file: w2 shape mismatch");
    m.w2.resize(static_cast<std::size_t>(rows));
    for (auto& x : m.w2) in >> x;
    expect("b2");
    in >> m.b2;
    if (!in) throw ValidationError("model file truncated: " + path);
    return m;
}

} // namespace carotid
