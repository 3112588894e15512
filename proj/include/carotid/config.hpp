#pragma once
// Run configuration: baseline hyperparameters plus the knobs the library
// exposes (resample density, review threshold, MLP width). Loaded from a
// key=value text file; unknown keys are rejected.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>

#include "carotid/errors.hpp"
#include "carotid/losses.hpp"

namespace carotid {

struct RunConfig {
    int image_size = 384;
    int batch_size = 8;
    double base_lr = 3e-4;
    double min_lr = 1e-6;
    double weight_decay = 1e-4;
    int warmup_epochs = 5;
    int total_epochs = 60;
    double dropout_rate = 0.20;
    int hidden_dim = 16;
    LossWeights weights;
    int mc_samples = 20;      // K
    double seg_threshold = 0.50;
    std::uint64_t seed = 42;
    int resample_points = 100; // S
    double review_tau = 0.002;
    bool smoothness_normalized = false;
};

namespace detail {

inline bool parse_int_value(const std::string& s, long long& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto r = std::from_chars(b, e, out);
    return r.ec == std::errc() && r.ptr == e;
}

inline bool parse_double_value(const std::string& s, double& out) {
    try {
        std::size_t used = 0;
        out = std::stod(s, &used);
        return used == s.size();
    } catch (...) {
        return false;
    }
}

} // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
    auto want_int = [&](int& field, long long lo, long long hi) {
        long long v = 0;
        if (!detail::parse_int_value(value, v) || v < lo || v > hi)
            throw ValidationError("config: bad value for " + key + ": " + value);
        field = static_cast<int>(v);
    };
    auto want_double = [&](double& field, double lo) {
        double v = 0.0;
        if (!detail::parse_double_value(value, v) || !(v >= lo))
            throw ValidationError("config: bad value for " + key + ": " + value);
        field = v;
    };

    if (key == "image_size") want_int(cfg.image_size, 1, 1 << 20);
    else if (key == "batch_size") want_int(cfg.batch_size, 1, 1 << 20);
    else if (key == "base_lr") want_double(cfg.base_lr, 0.0);
    else if (key == "min_lr") want_double(cfg.min_lr, 0.0);
    else if (key == "weight_decay") want_double(cfg.weight_decay, 0.0);
    else if (key == "warmup_epochs") want_int(cfg.warmup_epochs, 0, 1 << 20);
    else if (key == "total_epochs") want_int(cfg.total_epochs, 1, 1 << 20);
    else if (key == "dropout_rate") {
        want_double(cfg.dropout_rate, 0.0);
        if (cfg.dropout_rate >= 1.0) throw ValidationError("config: dropout_rate must be < 1");
    } else if (key == "hidden_dim") want_int(cfg.hidden_dim, 1, 1 << 20);
    else if (key == "lambda_seg") want_double(cfg.weights.lambda_seg, 0.0);
    else if (key == "lambda_risk") want_double(cfg.weights.lambda_risk, 0.0);
    else if (key == "lambda_smooth") want_double(cfg.weights.lambda_smooth, 0.0);
    else if (key == "lambda_phys") want_double(cfg.weights.lambda_phys, 0.0);
    else if (key == "lambda_div") want_double(cfg.weights.lambda_div, 0.0);
    else if (key == "lambda_bc") want_double(cfg.weights.lambda_bc, 0.0);
    else if (key == "lambda_wss") want_double(cfg.weights.lambda_wss, 0.0);
    else if (key == "mc_samples") want_int(cfg.mc_samples, 1, 1 << 20);
    else if (key == "seg_threshold") {
        want_double(cfg.seg_threshold, 0.0);
        if (!(cfg.seg_threshold > 0.0 && cfg.seg_threshold < 1.0))
            throw ValidationError("config: seg_threshold must lie in (0, 1)");
    } else if (key == "seed") {
        long long v = 0;
        if (!detail::parse_int_value(value, v) || v < 0)
            throw ValidationError("config: bad value for seed: " + value);
        cfg.seed = static_cast<std::uint64_t>(v);
    } else if (key == "resample_points") want_int(cfg.resample_points, 2, 1 << 20);
    else if (key == "review_tau") want_double(cfg.review_tau, 0.0);
    else if (key == "smoothness_normalized") {
        long long v = 0;
        if (!detail::parse_int_value(value, v) || (v != 0 && v != 1))
            throw ValidationError("config: smoothness_normalized must be 0 or 1");
        cfg.smoothness_normalized = v == 1;
    } else {
        throw ValidationError("config: unknown key: " + key);
    }
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos || line[b] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
        auto trim = [](std::string s) {
            std::size_t x = s.find_first_not_of(" \t");
            std::size_t y = s.find_last_not_of(" \t");
            return x == std::string::npos ? std::string() : s.substr(x, y - x + 1);
        };
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (!(cfg.min_lr <= cfg.base_lr))
        throw ValidationError("config: min_lr must be <= base_lr");
    if (cfg.warmup_epochs > cfg.total_epochs)
        throw ValidationError("config: warmup_epochs must be <= total_epochs");
    return cfg;
}

} // namespace carotid
