#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "carotid/losses.hpp"
#include "carotid/rng.hpp"

using namespace carotid;

namespace {

WallMask random_mask(Rng& rng, int n) {
    WallMask m(n, n);
    for (auto& b : m.v) b = rng.uniform() < 0.5 ? 1 : 0;
    return m;
}

ProbMap random_map(Rng& rng, int n, double lo, double hi) {
    ProbMap p(n, n);
    for (auto& x : p.v) x = rng.uniform(lo, hi);
    return p;
}

ProbMap map_from(const WallMask& m) {
    ProbMap p(m.height, m.width);
    for (std::size_t k = 0; k < m.v.size(); ++k) p.v[k] = m.v[k] ? 1.0 : 0.0;
    return p;
}

WallMask top_half(int n) {
    WallMask m(n, n);
    for (int i = 0; i < n / 2; ++i)
        for (int j = 0; j < n; ++j) m.at(i, j) = 1;
    return m;
}

} // namespace

TEST_CASE("bce on fixtures") {
    const WallMask target = top_half(8);
    const ProbMap perfect = map_from(target);
    CHECK(bce(perfect, target) <= 1e-6); // clamp floor

    ProbMap half(8, 8, 0.5);
    CHECK(bce(half, target) == Catch::Approx(std::log(2.0)).margin(1e-12));

    const std::vector<double> pred{0.0};
    const std::vector<double> label{1.0};
    CHECK(bce(pred, label) == Catch::Approx(-std::log(1e-7)).margin(1e-9)); // ~16.118

    CHECK_THROWS_AS(bce(ProbMap(4, 4), WallMask(8, 8)), ShapeMismatch);
}

TEST_CASE("dice_loss on fixtures") {
    const WallMask target = top_half(8);
    CHECK(dice_loss(map_from(target), target) == Catch::Approx(0.0).margin(1e-6));

    const WallMask empty(8, 8);
    CHECK(dice_loss(ProbMap(8, 8, 0.0), empty) == Catch::Approx(0.0).margin(1e-12)); // eps/eps

    // binary top half vs all ones: 1 - 64/96
    const WallMask ones(8, 8, 1);
    CHECK(dice_loss(map_from(top_half(8)), ones) == Catch::Approx(1.0 / 3.0).margin(1e-6));
}

TEST_CASE("seg_loss is the sum of its kernels") {
    const WallMask target = top_half(8);
    const ProbMap perfect = map_from(target);
    CHECK(seg_loss(perfect, target) < 1e-5);

    ProbMap half(8, 8, 0.5);
    const double expected_dice = 1.0 - (2.0 * 16.0 + kDiceEps) / (32.0 + 32.0 + kDiceEps);
    CHECK(seg_loss(half, target) ==
          Catch::Approx(std::log(2.0) + expected_dice).margin(1e-10));

    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const WallMask m = random_mask(rng, 8);
        const ProbMap p = random_map(rng, 8, 0.01, 0.99);
        const double s = seg_loss(p, m);
        REQUIRE(s >= bce(p, m) - 1e-12);
        REQUIRE(s >= dice_loss(p, m) - 1e-12);
    }
}

TEST_CASE("risk_loss_masked on fixtures") {
    const std::vector<double> preds{0.5, 0.9};
    const std::vector<double> labels{1.0, 1.0};

    auto r = risk_loss_masked(preds, labels, std::vector<int>{0, 0});
    CHECK(r.no_labels);
    CHECK(r.value == 0.0);

    r = risk_loss_masked(preds, labels, std::vector<int>{1, 1});
    CHECK_FALSE(r.no_labels);
    CHECK(r.value == Catch::Approx(bce(preds, labels)).margin(1e-15));

    r = risk_loss_masked(preds, labels, std::vector<int>{1, 0});
    CHECK(r.value == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("risk_loss_masked ignores appended unavailable entries") {
    Rng rng(13);
    std::vector<double> preds, labels;
    std::vector<int> avail;
    for (int k = 0; k < 12; ++k) {
        preds.push_back(rng.uniform(0.05, 0.95));
        labels.push_back(rng.uniform() < 0.5 ? 1.0 : 0.0);
        avail.push_back(rng.uniform() < 0.7 ? 1 : 0);
    }
    avail[0] = 1;
    const double base = risk_loss_masked(preds, labels, avail).value;
    for (int k = 0; k < 5; ++k) {
        preds.push_back(rng.uniform());
        labels.push_back(1.0);
        avail.push_back(0);
    }
    CHECK(risk_loss_masked(preds, labels, avail).value == base);
}

TEST_CASE("smoothness_loss on fixtures") {
    CHECK(smoothness_loss(ProbMap(5, 5, 0.42)) == 0.0);

    ProbMap p(2, 2);
    p.at(0, 0) = 0.0; p.at(0, 1) = 1.0;
    p.at(1, 0) = 0.0; p.at(1, 1) = 1.0;
    CHECK(smoothness_loss(p) == Catch::Approx(2.0).margin(1e-15));
    const double terms = 2.0 * 1 + 1.0 * 2; // H(W-1) + (H-1)W
    CHECK(smoothness_loss(p, true) == Catch::Approx(2.0 / terms).margin(1e-15));

    CHECK_THROWS_AS(smoothness_loss(ProbMap(1, 5, 0.0)), TooSmall);
}

TEST_CASE("smoothness_loss is invariant under transpose") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const ProbMap p = random_map(rng, 6, 0.0, 1.0);
        ProbMap t(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) t.at(j, i) = p.at(i, j);
        REQUIRE(smoothness_loss(t) == Catch::Approx(smoothness_loss(p)).margin(1e-12));
    }
}

TEST_CASE("phys_loss vanishes on consistent inputs") {
    DiscreteVelocityField field;
    field.spacing = 1.0;
    field.u = Grid(5, 5, 3.7);
    field.v = Grid(5, 5, -1.2);

    FlowWaveform q;
    for (int k = 0; k <= 8; ++k) {
        q.t.push_back(0.125 * k);
        q.q.push_back(2.0 + std::sin(2.0 * std::numbers::pi * 0.125 * k));
    }
    WssSeries tau = scalar_wss_series(q.t, q.q);

    const auto terms = phys_loss(field, q, q, tau, tau, LossWeights{});
    CHECK(terms.total == 0.0);
    CHECK(terms.div_term == 0.0);
    CHECK(terms.bc_term == 0.0);
    CHECK(terms.wss_term == 0.0);
}

TEST_CASE("divergence_term on analytic fields") {
    // u = (x, -y) on an integer-spaced grid: exactly divergence-free
    DiscreteVelocityField f;
    f.spacing = 1.0;
    f.u = Grid(6, 6);
    f.v = Grid(6, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            f.u.at(i, j) = static_cast<double>(j);
            f.v.at(i, j) = -static_cast<double>(i);
        }
    CHECK(divergence_term(f) == 0.0);

    // u = (y, -x): also divergence-free
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            f.u.at(i, j) = static_cast<double>(i);
            f.v.at(i, j) = -static_cast<double>(j);
        }
    CHECK(divergence_term(f) == 0.0);

    // u = (x, y): per-cell divergence 2, squared 4, over 16 interior cells
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            f.u.at(i, j) = static_cast<double>(j);
            f.v.at(i, j) = static_cast<double>(i);
        }
    CHECK(divergence_term(f) == Catch::Approx(4.0 * 16).margin(1e-12));

    f.v = Grid(5, 6);
    CHECK_THROWS_AS(divergence_term(f), GridMismatch);
}

TEST_CASE("phys_loss validates shared time grids") {
    FlowWaveform a, b;
    for (int k = 0; k <= 4; ++k) {
        a.t.push_back(0.25 * k);
        a.q.push_back(1.0);
        b.t.push_back(0.25 * k + (k == 2 ? 1e-3 : 0.0));
        b.q.push_back(1.0);
    }
    CHECK_THROWS_AS(boundary_term(a, b), TimeGridMismatch);
}

TEST_CASE("total_loss applies the configured weights") {
    LossWeights w;
    CHECK(w.lambda_seg == 1.0);
    CHECK(w.lambda_risk == 0.25);
    CHECK(w.lambda_smooth == 0.03);
    CHECK(w.lambda_phys == 0.0); // physics loss disabled in the baseline run

    CHECK(total_loss(0.2, 0.4, 1.0, 0.0, w) == Catch::Approx(0.33).margin(1e-12));
    CHECK(total_loss(0.0, 0.0, 0.0, 0.0, w) == 0.0);
    // lambda_phys = 0 makes any physics residual inert
    CHECK(total_loss(0.2, 0.4, 1.0, 123.0, w) == Catch::Approx(0.33).margin(1e-12));
    CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, 0.0, 0.0, w), NonFinite);
}

TEST_CASE("total_loss is linear in each component") {
    LossWeights w;
    w.lambda_phys = 0.4;
    Rng rng(51);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform(), d = rng.uniform();
        const double scale = rng.uniform(0.1, 5.0);
        REQUIRE(total_loss(scale * a, b, c, d, w) - total_loss(0.0, b, c, d, w) ==
                Catch::Approx(scale * w.lambda_seg * a).margin(1e-12));
        REQUIRE(total_loss(a, b, c, scale * d, w) - total_loss(a, b, c, 0.0, w) ==
                Catch::Approx(scale * w.lambda_phys * d).margin(1e-12));
    }
}

// ---------------------------------------------------------------------------
// Gradient verification against central differences
// ---------------------------------------------------------------------------

TEST_CASE("bce gradient matches finite differences") {
    Rng rng(101);
    const double step = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        const WallMask mask = random_mask(rng, 8);
        const ProbMap p = random_map(rng, 8, 0.05, 0.95);
        std::vector<double> target(mask.v.begin(), mask.v.end());
        auto f = [&](const std::vector<double>& x) {
            return bce(std::span<const double>(x), std::span<const double>(target));
        };
        REQUIRE(max_relative_gradient_error(f, bce_grad(p.v, target), p.v, step) < 1e-4);
    }
}

TEST_CASE("dice_loss gradient matches finite differences") {
    Rng rng(103);
    const double step = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
        const WallMask mask = random_mask(rng, 8);
        const ProbMap p = random_map(rng, 8, 0.05, 0.95);
        auto f = [&](const std::vector<double>& x) {
            ProbMap q(8, 8);
            q.v = x;
            return dice_loss(q, mask);
        };
        REQUIRE(max_relative_gradient_error(f, dice_loss_grad(p, mask), p.v, step) < 1e-4);
    }
}

TEST_CASE("smoothness_loss gradient matches finite differences off kinks") {
    Rng rng(107);
    const double step = 1e-5;
    int done = 0;
    while (done < 50) {
        const ProbMap p = random_map(rng, 8, 0.0, 1.0);
        bool off_kinks = true;
        for (int i = 0; i < 8 && off_kinks; ++i)
            for (int j = 0; j + 1 < 8 && off_kinks; ++j)
                off_kinks = std::abs(p.at(i, j + 1) - p.at(i, j)) > 1e-3;
        for (int i = 0; i + 1 < 8 && off_kinks; ++i)
            for (int j = 0; j < 8 && off_kinks; ++j)
                off_kinks = std::abs(p.at(i + 1, j) - p.at(i, j)) > 1e-3;
        if (!off_kinks) continue;
        ++done;
        auto f = [&](const std::vector<double>& x) {
            ProbMap q(8, 8);
            q.v = x;
            return smoothness_loss(q);
        };
        REQUIRE(max_relative_gradient_error(f, smoothness_loss_grad(p).v, p.v, step) < 1e-4);
    }
}

TEST_CASE("quadratic phys_loss gradients match finite differences") {
    Rng rng(109);
    const double step = 1e-5;
    for (int trial = 0; trial < 50; ++trial) {
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
        auto f_div = [&](const std::vector<double>& x) {
            DiscreteVelocityField ff;
            ff.spacing = field.spacing;
            ff.u = Grid(6, 6);
            ff.v = Grid(6, 6);
            std::copy_n(x.begin(), 36, ff.u.v.begin());
            std::copy_n(x.begin() + 36, 36, ff.v.v.begin());
            return divergence_term(ff);
        };
        REQUIRE(max_relative_gradient_error(f_div, grad, point, step) < 1e-4);

        FlowWaveform q_hat, q_dop;
        for (int k = 0; k < 9; ++k) {
            q_hat.t.push_back(0.1 * k);
            q_dop.t.push_back(0.1 * k);
            q_hat.q.push_back(rng.uniform(-1.0, 1.0));
            q_dop.q.push_back(rng.uniform(-1.0, 1.0));
        }
        auto f_bc = [&](const std::vector<double>& x) {
            FlowWaveform qq = q_hat;
            qq.q = x;
            return boundary_term(qq, q_dop);
        };
        REQUIRE(max_relative_gradient_error(f_bc, boundary_term_grad(q_hat, q_dop), q_hat.q, step) <
                1e-4);
    }
}

TEST_CASE("loss values are non-negative on random inputs") {
    Rng rng(113);
    for (int trial = 0; trial < 25; ++trial) {
        const WallMask m = random_mask(rng, 8);
        const ProbMap p = random_map(rng, 8, 0.0, 1.0);
        REQUIRE(bce(p, m) >= 0.0);
        REQUIRE(dice_loss(p, m) >= -1e-12);
        REQUIRE(smoothness_loss(p) >= 0.0);
    }
}
