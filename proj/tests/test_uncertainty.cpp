#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "carotid/rng.hpp"
#include "carotid/uncertainty.hpp"

using namespace carotid;

TEST_CASE("mc_aggregate_scalar on fixtures") {
    auto s = mc_aggregate_scalar(std::vector<double>{0.2, 0.4});
    CHECK(s.mean == Catch::Approx(0.3).margin(1e-15));
    CHECK(s.variance == Catch::Approx(0.01).margin(1e-15));

    s = mc_aggregate_scalar(std::vector<double>{0.37, 0.37, 0.37, 0.37, 0.37});
    CHECK(s.mean == 0.37);
    CHECK(s.variance == 0.0); // exactly zero spread

    s = mc_aggregate_scalar(std::vector<double>{0.0, 0.0, 1.0, 1.0});
    CHECK(s.mean == 0.5);
    CHECK(s.variance == 0.25); // maximal Bernoulli spread

    CHECK_THROWS_AS(mc_aggregate_scalar(std::vector<double>{}), EmptyEnsemble);
    CHECK_THROWS_AS(mc_aggregate_scalar(std::vector<double>{0.5, 1.5}), OutOfRange);
}

TEST_CASE("variance matches the two-pass oracle and stays in range") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> samples;
        const int k = 1 + static_cast<int>(rng.below(40));
        for (int i = 0; i < k; ++i) samples.push_back(rng.uniform());
        const auto s = mc_aggregate_scalar(samples);

        // oracle: variance = E[p^2] - mean^2
        double m = 0.0, m2 = 0.0;
        for (double p : samples) {
            m += p;
            m2 += p * p;
        }
        m /= k;
        m2 /= k;
        REQUIRE(std::abs(s.variance - (m2 - m * m)) < 1e-12);
        REQUIRE(s.variance >= 0.0);
        REQUIRE(s.variance <= 0.25 + 1e-15);

        // permutation invariance
        std::vector<double> shuffled = samples;
        rng.shuffle(shuffled);
        const auto s2 = mc_aggregate_scalar(shuffled);
        REQUIRE(std::abs(s2.variance - s.variance) < 1e-15);
    }
}

TEST_CASE("mc_aggregate_map on fixtures") {
    ProbMap a(3, 3, 0.4);
    const std::vector<ProbMap> copies{a, a, a, a};
    auto summary = mc_aggregate_map(copies);
    for (double v : summary.variance.v) REQUIRE(v == 0.0);
    for (double v : summary.mean.v) REQUIRE(v == 0.4);

    ProbMap b = a;
    a.at(1, 1) = 0.0;
    b.at(1, 1) = 1.0;
    summary = mc_aggregate_map(std::vector<ProbMap>{a, b});
    CHECK(summary.variance.at(1, 1) == 0.25);
    CHECK(summary.mean.at(1, 1) == 0.5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != 1 || j != 1) REQUIRE(summary.variance.at(i, j) == 0.0);

    CHECK_THROWS_AS(mc_aggregate_map(std::vector<ProbMap>{}), EmptyEnsemble);
    CHECK_THROWS_AS(mc_aggregate_map(std::vector<ProbMap>{ProbMap(2, 2), ProbMap(3, 3)}),
                    ShapeMismatch);
}

TEST_CASE("map mean stays within per-pixel sample bounds") {
    Rng rng(12);
    std::vector<ProbMap> samples;
    for (int k = 0; k < 9; ++k) {
        ProbMap m(4, 4);
        for (auto& x : m.v) x = rng.uniform();
        samples.push_back(std::move(m));
    }
    const auto summary = mc_aggregate_map(samples);
    for (std::size_t i = 0; i < summary.mean.v.size(); ++i) {
        double lo = 1.0, hi = 0.0;
        for (const auto& m : samples) {
            lo = std::min(lo, m.v[i]);
            hi = std::max(hi, m.v[i]);
        }
        REQUIRE(summary.mean.v[i] >= lo - 1e-15);
        REQUIRE(summary.mean.v[i] <= hi + 1e-15);
    }
}

TEST_CASE("aggregation commutes with cropping") {
    Rng rng(14);
    std::vector<ProbMap> samples;
    for (int k = 0; k < 7; ++k) {
        ProbMap m(6, 6);
        for (auto& x : m.v) x = rng.uniform();
        samples.push_back(std::move(m));
    }
    const auto whole = mc_aggregate_map(samples);

    auto crop = [](const Grid& g, int i0, int j0, int h, int w) {
        Grid out(h, w);
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) out.at(i, j) = g.at(i0 + i, j0 + j);
        return out;
    };
    std::vector<ProbMap> cropped;
    for (const auto& m : samples) cropped.push_back(crop(m, 1, 2, 3, 3));
    const auto part = mc_aggregate_map(cropped);

    const Grid whole_cropped_mean = crop(whole.mean, 1, 2, 3, 3);
    const Grid whole_cropped_var = crop(whole.variance, 1, 2, 3, 3);
    CHECK(part.mean.v == whole_cropped_mean.v);
    CHECK(part.variance.v == whole_cropped_var.v);
}

TEST_CASE("flag_reviews separates the reported uncertainty ordering") {
    // mean risks 0.0242/0.0535/0.0454/0.2211/0.0202 carry these variances
    const std::vector<double> variances{0.00011, 0.00064, 0.00081, 0.00703, 0.00015};
    std::vector<UncertaintySummary> summaries;
    for (double v : variances) summaries.push_back(summary_from_scalar(ScalarStats{0.1, v}));

    const auto flags = flag_reviews(summaries, 0.002);
    REQUIRE(flags.size() == 5);
    CHECK_FALSE(flags[0]);
    CHECK_FALSE(flags[1]);
    CHECK_FALSE(flags[2]);
    CHECK(flags[3]); // only the 0.00703 sample is flagged
    CHECK_FALSE(flags[4]);
    CHECK(summaries[3].flagged);

    auto all = flag_reviews(summaries, 0.0);
    for (bool f : all) CHECK(f); // every nonzero variance flagged at tau = 0

    auto none = flag_reviews(summaries, 0.25);
    for (bool f : none) CHECK_FALSE(f); // variance can never exceed 0.25

    CHECK_THROWS_AS(flag_reviews(summaries, -0.1), OutOfRange);
}

TEST_CASE("flag_reviews uses the mean variance for maps") {
    ProbMap lo(2, 2, 0.5), hi(2, 2, 0.5);
    lo.at(0, 0) = 0.0;
    hi.at(0, 0) = 1.0;
    std::vector<UncertaintySummary> summaries{mc_aggregate_map(std::vector<ProbMap>{lo, hi})};
    // variance map: 0.25 at one pixel, 0 elsewhere -> mean 0.0625
    const auto flags = flag_reviews(summaries, 0.05);
    CHECK(flags[0]);
    const auto none = flag_reviews(summaries, 0.07);
    CHECK_FALSE(none[0]);
}
