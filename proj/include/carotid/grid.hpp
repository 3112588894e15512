#pragma once
// Dense row-major containers shared by the geometry, metrics, loss and
// uncertainty modules.

#include <cstdint>
#include <vector>

#include "carotid/errors.hpp"

namespace carotid {

struct Grid {
    int height = 0;
    int width = 0;
    std::vector<double> v; // row-major, v[i * width + j]

    Grid() = default;
    Grid(int h, int w, double fill = 0.0)
        : height(h), width(w), v(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * width + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * width + j]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return height == o.height && width == o.width; }
};

// Predicted probability map; values must lie in [0, 1].
using ProbMap = Grid;

inline void validate_prob_map(const ProbMap& p) {
    for (double x : p.v)
        if (!(x >= 0.0 && x <= 1.0))
            throw OutOfRange("probability map value outside [0, 1]");
}

// Binary intima-media mask.
struct WallMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> v; // row-major, values 0 or 1

    WallMask() = default;
    WallMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), v(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    std::uint8_t& at(int i, int j) { return v[static_cast<std::size_t>(i) * width + j]; }
    std::uint8_t at(int i, int j) const { return v[static_cast<std::size_t>(i) * width + j]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const WallMask& o) const { return height == o.height && width == o.width; }

    long long foreground_count() const {
        long long n = 0;
        for (auto b : v) n += b ? 1 : 0;
        return n;
    }
};

} // namespace carotid
