#pragma once
// Seeded deterministic random numbers.
//
// std::mt19937_64 output is fully specified by the standard, so the raw
// stream is reproducible across platforms. The distribution helpers below
// are hand-rolled because std::uniform_real_distribution et al. are
// implementation-defined and would break byte-exact reproducibility.

#include <cstdint>
#include <random>
#include <vector>

namespace carotid {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Uniform integer in [0, n). Modulo bias is negligible for desk-scale n.
    std::uint64_t below(std::uint64_t n) {
        return n == 0 ? 0 : gen_() % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Stable seed derivation for per-subject / per-worker substreams
// (splitmix64 finalizer over the combined words).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

} // namespace carotid
