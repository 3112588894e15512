#pragma once
// Carreau-Yasuda rheology, wall shear extraction from velocity profiles,
// analytic pulsatile-flow WSS in a rigid straight tube, and the TAWSS /
// OSI / RRT biomarkers.
//
// The pulsatile solution Fourier-decomposes the flow waveform; the steady
// term contributes Poiseuille wall shear 4*mu*Q/(pi*R^3) and each harmonic
// contributes the classical complex Bessel-function wall shear. The series
// is restricted to Womersley numbers alpha <= 10 per harmonic, where the
// J0/J1 power series is comfortably accurate in double precision.

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "carotid/errors.hpp"

namespace carotid {

struct CarreauYasudaParams {
    double mu0 = 0.056;     // zero-shear viscosity, Pa s
    double mu_inf = 0.00345; // infinite-shear viscosity, Pa s
    double lambda = 3.313;  // relaxation time, s
    double n = 0.3568;      // power-law index
    double a = 2.0;         // Yasuda exponent
};

struct FluidParams {
    double rho = 1060.0;  // kg/m^3
    double mu = 0.00345;  // Newtonian viscosity used by the analytic flows, Pa s
    CarreauYasudaParams carreau;
};

struct VesselSpec {
    double radius = 3e-3; // m
    double length = 0.0;  // m, informational
};

// Volumetric flow over one cardiac period; t spans exactly [0, T] and the
// waveform closes periodically, q(0) = q(T).
struct FlowWaveform {
    std::vector<double> t;
    std::vector<double> q; // m^3/s
};

// Vector-valued wall shear stress over one period (1 to 3 components).
struct WssSeries {
    std::vector<double> t;
    std::vector<std::array<double, 3>> tau; // unused components stay 0
    int components = 1;
};

inline WssSeries scalar_wss_series(std::vector<double> t, const std::vector<double>& values) {
    WssSeries s;
    s.t = std::move(t);
    s.components = 1;
    s.tau.resize(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) s.tau[k] = {values[k], 0.0, 0.0};
    return s;
}

// |tau|; single-component series use std::abs so unidirectional integrals
// stay bit-identical to the signed ones.
inline double tau_magnitude(const std::array<double, 3>& v, int components = 3) {
    if (components == 1) return std::abs(v[0]);
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

inline void validate_fluid_params(const FluidParams& f) {
    if (!(f.rho > 0.0) || !(f.mu > 0.0)) throw OutOfRange("fluid density and viscosity must be > 0");
    const auto& c = f.carreau;
    if (!(c.mu_inf > 0.0) || !(c.mu_inf <= c.mu0) || !(c.lambda > 0.0) || !(c.a > 0.0))
        throw OutOfRange("Carreau-Yasuda parameters must satisfy 0 < mu_inf <= mu0, lambda > 0, a > 0");
}

inline void validate_vessel(const VesselSpec& v) {
    if (!(v.radius > 0.0)) throw OutOfRange("vessel radius must be > 0");
}

inline void validate_waveform(const FlowWaveform& w) {
    if (w.t.size() < 3) throw TooFewSamples("flow waveform needs >= 3 samples");
    if (w.t.size() != w.q.size()) throw ShapeMismatch("waveform t/q length mismatch");
    if (w.t.front() != 0.0) throw NonPeriodicWaveform("waveform must start at t = 0");
    for (std::size_t k = 1; k < w.t.size(); ++k)
        if (!(w.t[k] > w.t[k - 1])) throw NonMonotonicGrid("waveform times must strictly increase");
    if (std::abs(w.q.front() - w.q.back()) > 1e-9)
        throw NonPeriodicWaveform("waveform does not close periodically, q(0) != q(T)");
}

inline void validate_wss_series(const WssSeries& s) {
    if (s.t.size() < 2) throw TooFewSamples("WSS series needs >= 2 samples");
    if (s.t.size() != s.tau.size()) throw ShapeMismatch("WSS series t/tau length mismatch");
    if (s.components < 1 || s.components > 3) throw OutOfRange("WSS components must be 1..3");
    for (std::size_t k = 1; k < s.t.size(); ++k)
        if (!(s.t[k] > s.t[k - 1])) throw NonMonotonicGrid("WSS times must strictly increase");
}

// ---------------------------------------------------------------------------
// Rheology and profile-based wall shear
// ---------------------------------------------------------------------------

// mu(gdot) = mu_inf + (mu0 - mu_inf) * [1 + (lambda*gdot)^a]^((n-1)/a)
inline double carreau_yasuda_viscosity(double gamma_dot, const FluidParams& f) {
    validate_fluid_params(f);
    if (gamma_dot < 0.0) throw NegativeShearRate("shear rate must be >= 0");
    const auto& c = f.carreau;
    const double base = 1.0 + std::pow(c.lambda * gamma_dot, c.a);
    return c.mu_inf + (c.mu0 - c.mu_inf) * std::pow(base, (c.n - 1.0) / c.a);
}

// tau_w = mu * |du/dr| at the wall (last grid point), one-sided
// second-order finite difference on a possibly nonuniform grid.
inline double wall_shear_from_profile(const std::vector<double>& r, const std::vector<double>& u,
                                      double mu) {
    if (r.size() < 3) throw TooFewSamples("velocity profile needs >= 3 samples");
    if (r.size() != u.size()) throw ShapeMismatch("profile r/u length mismatch");
    for (std::size_t k = 1; k < r.size(); ++k)
        if (!(r[k] > r[k - 1])) throw NonMonotonicGrid("radial grid must strictly increase");
    const std::size_t m = r.size();
    const double a = r[m - 3], b = r[m - 2], c = r[m - 1];
    const double du = u[m - 3] * (c - b) / ((a - b) * (a - c)) +
                      u[m - 2] * (c - a) / ((b - a) * (b - c)) +
                      u[m - 1] * (2.0 * c - a - b) / ((c - a) * (c - b));
    return mu * std::abs(du);
}

// ---------------------------------------------------------------------------
// Analytic pulsatile-flow wall shear
// ---------------------------------------------------------------------------

// Poiseuille surrogate: tau(t) = 4*mu*Q(t) / (pi*R^3), the zero-frequency limit.
inline WssSeries quasi_steady_wss(const FlowWaveform& w, const VesselSpec& v, const FluidParams& f) {
    validate_fluid_params(f);
    validate_vessel(v);
    validate_waveform(w);
    const double r3 = v.radius * v.radius * v.radius;
    const double coef = 4.0 * f.mu / (std::numbers::pi * r3);
    std::vector<double> tau(w.q.size());
    for (std::size_t k = 0; k < w.q.size(); ++k) tau[k] = coef * w.q[k];
    return scalar_wss_series(w.t, tau);
}

namespace detail {

// J0 and J1 by power series, adequate for |z| <= ~15. Terms are truncated
// once their magnitude falls below 1e-14.
inline std::complex<double> bessel_j0(std::complex<double> z) {
    const std::complex<double> q = -0.25 * z * z;
    std::complex<double> term{1.0, 0.0}, sum{1.0, 0.0};
    for (int m = 1; m <= 300; ++m) {
        term *= q / static_cast<double>(m * m);
        sum += term;
        if (std::abs(term) < 1e-14) break;
    }
    return sum;
}

inline std::complex<double> bessel_j1(std::complex<double> z) {
    const std::complex<double> q = -0.25 * z * z;
    std::complex<double> term{1.0, 0.0}, sum{1.0, 0.0};
    for (int m = 1; m <= 300; ++m) {
        term *= q / static_cast<double>(m * (m + 1));
        sum += term;
        if (std::abs(term) < 1e-14) break;
    }
    return 0.5 * z * sum;
}

// Complex wall-shear-per-flow transfer factor for one harmonic:
//   tau_hat / Q_hat = -mu * L^2 * J1(L) / (pi * R^3 * (L*J0(L) - 2*J1(L)))
// with L = i^{3/2} * alpha. Tends to 4*mu/(pi*R^3) as alpha -> 0.
inline std::complex<double> wall_shear_per_flow(std::complex<double> lambda, double mu, double radius) {
    const std::complex<double> j0 = bessel_j0(lambda);
    const std::complex<double> j1 = bessel_j1(lambda);
    const double r3 = radius * radius * radius;
    return -(mu * lambda * lambda * j1) / (std::numbers::pi * r3 * (lambda * j0 - 2.0 * j1));
}

} // namespace detail

inline double womersley_number(double omega, const VesselSpec& v, const FluidParams& f) {
    return v.radius * std::sqrt(omega * f.rho / f.mu);
}

inline WssSeries womersley_wss(const FlowWaveform& w, const VesselSpec& v, const FluidParams& f,
                               int n_harmonics) {
    validate_fluid_params(f);
    validate_vessel(v);
    validate_waveform(w);
    if (n_harmonics < 0) throw OutOfRange("n_harmonics must be >= 0");
    const double period = w.t.back() - w.t.front();
    const double omega = 2.0 * std::numbers::pi / period;
    if (n_harmonics >= 1) {
        const double alpha_max = womersley_number(n_harmonics * omega, v, f);
        if (alpha_max > 10.0)
            throw AlphaTooLarge("Womersley number " + std::to_string(alpha_max) +
                                " at harmonic " + std::to_string(n_harmonics) + " exceeds 10");
    }

    const std::size_t n = w.t.size();
    auto trapz = [&](auto&& fn) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t k = 0; k + 1 < n; ++k)
            acc += 0.5 * (fn(k) + fn(k + 1)) * (w.t[k + 1] - w.t[k]);
        return acc;
    };

    const double q0 = trapz([&](std::size_t k) { return std::complex<double>(w.q[k], 0.0); }).real() / period;
    const double r3 = v.radius * v.radius * v.radius;
    std::vector<double> tau(n, 4.0 * f.mu * q0 / (std::numbers::pi * r3));

    const std::complex<double> i_pow_3_2 = std::polar(1.0, 3.0 * std::numbers::pi / 4.0);
    for (int h = 1; h <= n_harmonics; ++h) {
        const double wh = h * omega;
        const std::complex<double> qh =
            trapz([&](std::size_t k) {
                return w.q[k] * std::exp(std::complex<double>(0.0, -wh * w.t[k]));
            }) / period;
        const double alpha = womersley_number(wh, v, f);
        const std::complex<double> transfer =
            detail::wall_shear_per_flow(i_pow_3_2 * alpha, f.mu, v.radius);
        for (std::size_t k = 0; k < n; ++k)
            tau[k] += 2.0 * std::real(transfer * qh * std::exp(std::complex<double>(0.0, wh * w.t[k])));
    }
    return scalar_wss_series(w.t, tau);
}

// ---------------------------------------------------------------------------
// Biomarkers
// ---------------------------------------------------------------------------

// Trapezoid is the reporting quadrature; SampleMean weights every sample
// equally and serves exact discrete fixtures.
enum class Quadrature { trapezoid, sample_mean };

namespace detail {

struct WssIntegrals {
    double abs_integral = 0.0;             // integral of |tau|
    std::array<double, 3> vec_integral{};  // componentwise integral of tau
    double period = 0.0;
};

inline WssIntegrals integrate_wss(const WssSeries& s, Quadrature q) {
    validate_wss_series(s);
    WssIntegrals out;
    out.period = s.t.back() - s.t.front();
    const std::size_t n = s.t.size();
    if (q == Quadrature::trapezoid) {
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const double dt = s.t[k + 1] - s.t[k];
            out.abs_integral +=
                0.5 * (tau_magnitude(s.tau[k], s.components) + tau_magnitude(s.tau[k + 1], s.components)) * dt;
            for (int c = 0; c < 3; ++c)
                out.vec_integral[static_cast<std::size_t>(c)] +=
                    0.5 * (s.tau[k][static_cast<std::size_t>(c)] + s.tau[k + 1][static_cast<std::size_t>(c)]) * dt;
        }
    } else {
        const double wgt = out.period / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            out.abs_integral += tau_magnitude(s.tau[k], s.components) * wgt;
            for (int c = 0; c < 3; ++c)
                out.vec_integral[static_cast<std::size_t>(c)] += s.tau[k][static_cast<std::size_t>(c)] * wgt;
        }
    }
    return out;
}

} // namespace detail

// (1/T) * integral of |tau| dt
inline double tawss(const WssSeries& s, Quadrature q = Quadrature::trapezoid) {
    const auto ig = detail::integrate_wss(s, q);
    return ig.abs_integral / ig.period;
}

// 0.5 * (1 - |integral tau| / integral |tau|), in [0, 0.5]
inline double osi(const WssSeries& s, Quadrature q = Quadrature::trapezoid) {
    const auto ig = detail::integrate_wss(s, q);
    if (!(ig.abs_integral > 0.0)) throw ZeroShearHistory("OSI undefined for all-zero shear history");
    const double ratio = tau_magnitude(ig.vec_integral, s.components) / ig.abs_integral;
    const double value = 0.5 * (1.0 - ratio);
    return std::clamp(value, 0.0, 0.5);
}

struct RrtResult {
    double value = 0.0; // 1/Pa
    bool singular = false;
};

// 1 / ((1 - 2*OSI) * TAWSS); flagged infinite near OSI = 0.5 or TAWSS = 0
// instead of dividing through.
inline RrtResult rrt(const WssSeries& s, Quadrature q = Quadrature::trapezoid) {
    const double t = tawss(s, q);
    const double o = osi(s, q);
    if (o >= 0.5 - 1e-9 || t <= 1e-12)
        return {std::numeric_limits<double>::infinity(), true};
    return {1.0 / ((1.0 - 2.0 * o) * t), false};
}

} // namespace carotid
