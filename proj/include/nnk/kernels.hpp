#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "activations.hpp"
#include "error.hpp"
#include "quadrature.hpp"
#include "special_functions.hpp"

namespace nnk {

/// Arguments of the single-layer kernel: signal scales s_i > 0, correlation rho,
/// and the weight/bias variances applied outside the expectation.
struct KernelArgs {
    double s1 = 1.0;
    double s2 = 1.0;
    double rho = 0.0;
    double sigma_w2 = 1.0;
    double sigma_b2 = 0.0;
};

inline constexpr int kDefaultNodes = 80;
inline constexpr double kRhoClamp = 1.0 - 1e-12;
inline constexpr double kEluMaxScale = 25.0;

namespace detail {

inline void validate(const KernelArgs& a) {
    if (!(a.s1 > 0.0) || !(a.s2 > 0.0) || !std::isfinite(a.s1) || !std::isfinite(a.s2))
        throw DomainError("kernel: signal scales must be finite and positive");
    if (std::isnan(a.rho) || a.rho < -1.0 || a.rho > 1.0)
        throw DomainError("kernel: correlation must lie in [-1, 1]");
    if (!(a.sigma_w2 >= 0.0) || !(a.sigma_b2 >= 0.0))
        throw DomainError("kernel: variances must be non-negative");
}

inline double clamp_rho(double rho) { return std::clamp(rho, -kRhoClamp, kRhoClamp); }

// (sin t + (pi - t) cos t) / (2 pi), the degree-one arc-cosine factor.
inline double arccos_j1(double rho) {
    rho = std::clamp(rho, -1.0, 1.0);
    const double t = std::acos(rho);
    return (std::sqrt(std::max(0.0, 1.0 - rho * rho)) + (std::numbers::pi - t) * rho) / kTwoPi;
}

// P(Z1 > 0, Z2 > 0) = (pi - t) / (2 pi).
inline double quadrant(double rho) {
    return (std::numbers::pi - std::acos(std::clamp(rho, -1.0, 1.0))) / kTwoPi;
}

inline double finite_or_throw(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite intermediate");
    return v;
}

// E[exp(a Z1 + b Z2) 1{Z1 < 0, Z2 < 0}].
inline double e4(double a, double b, double rho) {
    const double ex = std::exp(0.5 * (a * a + 2.0 * rho * a * b + b * b));
    return ex * bvn_cdf(-a - rho * b, -b - rho * a, rho);
}

// E[exp(cZ) 1{Z < 0}].
inline double half_mgf(double c) { return scaled_normal_sf(c); }

// E[psi(s1 Z1) psi(s2 Z2)] / lambda^2 for the ELU family.
inline double elu_moment(double s1, double s2, double rho, double alpha) {
    if (rho >= 1.0) {
        const double e4 = half_mgf(s1 + s2) - half_mgf(s1) - half_mgf(s2) + 0.5;
        return s1 * s2 / 2.0 + alpha * alpha * e4;
    }
    if (rho <= -1.0) return -alpha * s1 * s2 * (half_mgf(s1) + half_mgf(s2));
    rho = clamp_rho(rho);
    const double theta = std::acos(rho);
    const double e1 = s1 * s2 * arccos_j1(rho);
    auto cross = [&](double a, double b) {
        const double t = std::exp(0.5 * b * b) *
                         (rosenbaum_m(-b * rho, b, theta) + b * rho * bvn_cdf(b * rho, -b, -rho));
        return a * (t - std_normal_pdf(0.0) * (1.0 - rho) / 2.0);
    };
    const double e2 = cross(s1, s2);
    const double e3 = cross(s2, s1);
    const double e4v = e4(s1, s2, rho) - e4(s1, 0.0, rho) - e4(0.0, s2, rho) + e4(0.0, 0.0, rho);
    return e1 + alpha * (e2 + e3) + alpha * alpha * e4v;
}

// E[psi'(s1 Z1) psi'(s2 Z2)] / lambda^2 for the ELU family.
inline double elu_dot_moment(double s1, double s2, double rho, double alpha) {
    const double q = bvn_cdf(0.0, 0.0, rho);
    const double c2 = std::exp(0.5 * s2 * s2) * bvn_cdf(s2 * rho, -s2, -rho);
    const double c1 = std::exp(0.5 * s1 * s1) * bvn_cdf(s1 * rho, -s1, -rho);
    return q + alpha * (c1 + c2) + alpha * alpha * e4(s1, s2, rho);
}

inline double gelu_moment(double s1, double s2, double rho) {
    const double a = s1 * s1, b = s2 * s2;
    const double sin2 = std::max(0.0, 1.0 - rho * rho);
    const double d = 1.0 + a + b + a * b * sin2;
    const double sd = std::sqrt(d);
    const double t = (rho * rho + d) / ((1.0 + a) * (1.0 + b) * sd) +
                     rho / (s1 * s2) * std::atan(rho * s1 * s2 / sd);
    return s1 * s2 * rho / 4.0 + a * b / kTwoPi * t;
}

inline void elu_guard(const KernelArgs& a) {
    if (a.s1 > kEluMaxScale || a.s2 > kEluMaxScale)
        throw DomainError("elu kernel: signal scale above 25 overflows double range");
}

// Angular break points of a 2-D Gaussian expectation whose integrand may
// kink on the lines g1 = 0 and rho g1 + sqrt(1 - rho^2) g2 = 0.
inline std::vector<double> polar_breaks(double theta) {
    const double pi = std::numbers::pi;
    std::vector<double> b{0.0, pi / 2, 3 * pi / 2, 2 * pi};
    for (double c : {theta + pi / 2, theta - pi / 2}) {
        c = std::fmod(c + 2 * pi, 2 * pi);
        b.push_back(c);
    }
    std::sort(b.begin(), b.end());
    std::vector<double> out;
    for (double x : b)
        if (out.empty() || x - out.back() > 1e-14) out.push_back(x);
    return out;
}

inline constexpr double kRadialMax = 13.0;
inline constexpr int kRadialPanels = 13;

}  // namespace detail

/// E[f(s1 Z1, s2 Z2)] for standard normals with correlation rho, evaluated in
/// polar coordinates: Gauss-Legendre on each angular arc between kink lines
/// times a composite Gauss-Legendre radial rule. `nodes` sets the order.
template <class F>
double gaussian_expect2(F&& f, double s1, double s2, double rho, int nodes = kDefaultNodes) {
    rho = std::clamp(rho, -1.0, 1.0);
    const double theta = std::acos(rho);
    const auto breaks = detail::polar_breaks(theta);
    const auto qa = gauss_legendre(std::max(10, nodes / 2));
    const auto qr = gauss_legendre(std::max(8, nodes / 4));
    double total = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double lo = breaks[b], hi = breaks[b + 1];
        total += integrate(qa, lo, hi, [&](double phi) {
            const double c1 = s1 * std::cos(phi);
            const double c2 = s2 * std::cos(phi - theta);
            return integrate_composite(qr, 0.0, detail::kRadialMax, detail::kRadialPanels, [&](double r) {
                return f(c1 * r, c2 * r) * r * std::exp(-0.5 * r * r);
            });
        });
    }
    return total / kTwoPi;
}

/// E[f(s Z)] for a standard normal Z, folded at the origin.
template <class F>
double gaussian_expect1(F&& f, double s, int nodes = kDefaultNodes) {
    const auto q = gauss_legendre(std::max(8, nodes / 4));
    return integrate_composite(q, 0.0, detail::kRadialMax, detail::kRadialPanels, [&](double z) {
        return (f(s * z) + f(-s * z)) * std_normal_pdf(z);
    });
}

/// Quadrature oracle for sigma_w2 E[psi(s1 Z1) psi(s2 Z2)] + sigma_b2.
inline double kernel_quadrature(const Activation& act, const KernelArgs& a, int nodes = kDefaultNodes) {
    if (nodes < 20) throw DomainError("kernel_quadrature: nodes must be >= 20");
    detail::validate(a);
    if (a.sigma_w2 == 0.0) return a.sigma_b2;
    const double e = gaussian_expect2([&](double u, double v) { return eval(act, u) * eval(act, v); },
                                      a.s1, a.s2, a.rho, nodes);
    return a.sigma_w2 * e + a.sigma_b2;
}

/// Quadrature oracle for sigma_w2 E[psi'(s1 Z1) psi'(s2 Z2)].
inline double kernel_dot_quadrature(const Activation& act, const KernelArgs& a, int nodes = kDefaultNodes) {
    if (nodes < 20) throw DomainError("kernel_dot_quadrature: nodes must be >= 20");
    detail::validate(a);
    if (a.sigma_w2 == 0.0) return 0.0;
    const double e = gaussian_expect2([&](double u, double v) { return deriv(act, u) * deriv(act, v); },
                                      a.s1, a.s2, a.rho, nodes);
    return a.sigma_w2 * e;
}

/// Single-layer kernel sigma_w2 E[psi(s1 Z1) psi(s2 Z2)] + sigma_b2 in closed form.
inline double kernel(const Activation& act, const KernelArgs& a) {
    detail::validate(a);
    if (a.sigma_w2 == 0.0) return a.sigma_b2;
    const double s1 = a.s1, s2 = a.s2, rho = a.rho;
    double e = 0.0;
    switch (act.kind) {
        case ActKind::ReLU: e = s1 * s2 * detail::arccos_j1(rho); break;
        case ActKind::LReLU: {
            const double c = (1.0 - act.slope) * (1.0 - act.slope);
            e = s1 * s2 * (c * detail::arccos_j1(rho) + act.slope * rho);
            break;
        }
        case ActKind::ERF: {
            const double x = 2.0 * s1 * s2 * rho / std::sqrt((1.0 + 2.0 * s1 * s1) * (1.0 + 2.0 * s2 * s2));
            e = 2.0 / std::numbers::pi * std::asin(std::clamp(x, -1.0, 1.0));
            break;
        }
        case ActKind::GELU: e = detail::gelu_moment(s1, s2, rho); break;
        case ActKind::ELU:
        case ActKind::SELU:
            detail::elu_guard(a);
            e = act.lambda * act.lambda * detail::elu_moment(s1, s2, rho, act.alpha);
            break;
    }
    return detail::finite_or_throw(a.sigma_w2 * e + a.sigma_b2, "kernel");
}

/// Derivative kernel sigma_w2 E[psi'(s1 Z1) psi'(s2 Z2)]. GELU uses quadrature.
inline double kernel_dot(const Activation& act, const KernelArgs& a, int nodes = kDefaultNodes) {
    detail::validate(a);
    if (a.sigma_w2 == 0.0) return 0.0;
    double e = 0.0;
    switch (act.kind) {
        case ActKind::ReLU: e = detail::quadrant(a.rho); break;
        case ActKind::LReLU: {
            const double c = (1.0 - act.slope) * (1.0 - act.slope);
            e = c * detail::quadrant(a.rho) + act.slope;
            break;
        }
        case ActKind::ERF: {
            const double p = 4.0 * a.s1 * a.s1 * a.s2 * a.s2 * a.rho * a.rho;
            e = 4.0 / std::numbers::pi / std::sqrt((1.0 + 2.0 * a.s1 * a.s1) * (1.0 + 2.0 * a.s2 * a.s2) - p);
            break;
        }
        case ActKind::GELU: return kernel_dot_quadrature(act, a, nodes);
        case ActKind::ELU:
        case ActKind::SELU:
            detail::elu_guard(a);
            e = act.lambda * act.lambda * detail::elu_dot_moment(a.s1, a.s2, a.rho, act.alpha);
            break;
    }
    return detail::finite_or_throw(a.sigma_w2 * e, "kernel_dot");
}

/// Kernel of two raw inputs, Sigma = diag(sigma_w2, ..., sigma_w2, sigma_b2).
inline double kernel_from_inputs(const Activation& act, std::span<const double> x1, std::span<const double> x2,
                                 double sigma_w2, double sigma_b2) {
    if (x1.size() != x2.size() || x1.empty()) throw ShapeError("kernel_from_inputs: dimension mismatch");
    double n1 = 0.0, n2 = 0.0, d = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        n1 += x1[i] * x1[i];
        n2 += x2[i] * x2[i];
        d += x1[i] * x2[i];
    }
    const double a = sigma_w2 * n1 + sigma_b2, b = sigma_w2 * n2 + sigma_b2;
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("kernel_from_inputs: zero-norm input with sigma_b2 = 0");
    const double rho = std::clamp((sigma_w2 * d + sigma_b2) / std::sqrt(a * b), -1.0, 1.0);
    return kernel(act, {std::sqrt(a), std::sqrt(b), rho, sigma_w2, sigma_b2});
}

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Monte-Carlo estimate of sigma_w2 E[f(s1 Z1, s2 Z2)] (+ offset), single seeded stream.
template <class F>
McEstimate mc_expect2(F&& f, const KernelArgs& a, std::int64_t samples, std::uint64_t seed, double offset) {
    if (samples < 2) throw DomainError("mc: need at least two samples");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    const double rho = std::clamp(a.rho, -1.0, 1.0);
    const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    double mean = 0.0, m2 = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
        const double g1 = nd(gen), g2 = nd(gen);
        const double v = f(a.s1 * g1, a.s2 * (rho * g1 + c * g2));
        const double dlt = v - mean;
        mean += dlt / static_cast<double>(i + 1);
        m2 += dlt * (v - mean);
    }
    const double var = m2 / static_cast<double>(samples - 1);
    return {a.sigma_w2 * mean + offset, a.sigma_w2 * std::sqrt(var / static_cast<double>(samples))};
}

inline McEstimate kernel_mc(const Activation& act, const KernelArgs& a, std::int64_t samples, std::uint64_t seed) {
    if (samples < 10000) throw DomainError("kernel_mc: samples must be >= 1e4");
    detail::validate(a);
    return mc_expect2([&](double u, double v) { return eval(act, u) * eval(act, v); }, a, samples, seed,
                      a.sigma_b2);
}

inline McEstimate kernel_dot_mc(const Activation& act, const KernelArgs& a, std::int64_t samples,
                                std::uint64_t seed) {
    if (samples < 10000) throw DomainError("kernel_dot_mc: samples must be >= 1e4");
    detail::validate(a);
    return mc_expect2([&](double u, double v) { return deriv(act, u) * deriv(act, v); }, a, samples, seed, 0.0);
}

}  // namespace nnk
