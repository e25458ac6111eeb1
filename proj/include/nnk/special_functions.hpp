#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "error.hpp"
#include "quadrature.hpp"

namespace nnk {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
// |z| beyond which the normal tail underflows in double precision.
inline constexpr double kCdfClamp = 38.5;

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Upper tail 1 - Phi(z), accurate for large positive z.
inline double std_normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// exp(z^2/2) * (1 - Phi(z)); stays finite where both factors alone would not.
inline double scaled_normal_sf(double z) {
    if (z < 5.0) return std::exp(0.5 * z * z) * std_normal_sf(z);
    // Laplace continued fraction for the Mills ratio.
    double f = z;
    for (int n = 80; n >= 1; --n) f = z + n / f;
    return kInvSqrt2Pi / f;
}

namespace detail {

struct HalfRule {
    std::array<double, 10> x{};
    std::array<double, 10> w{};
    int n = 0;
};

// Positive half of an n-point Gauss-Legendre rule.
inline HalfRule half_rule(int n) {
    const auto q = gauss_legendre(n);
    HalfRule h;
    h.n = n / 2;
    for (int i = 0; i < h.n; ++i) {
        h.x[i] = q.nodes[n - 1 - i];
        h.w[i] = q.weights[n - 1 - i];
    }
    return h;
}

inline const HalfRule& bvn_rule(double abs_r) {
    static const HalfRule r6 = half_rule(6);
    static const HalfRule r12 = half_rule(12);
    static const HalfRule r20 = half_rule(20);
    if (abs_r < 0.3) return r6;
    if (abs_r < 0.75) return r12;
    return r20;
}

// P(Z1 > h, Z2 > k) with correlation r (Drezner-Wesolowsky scheme as refined by Genz).
inline double bvnu(double h, double k, double r) {
    if (h >= kCdfClamp || k >= kCdfClamp) return 0.0;
    if (h <= -kCdfClamp) return k <= -kCdfClamp ? 1.0 : std_normal_sf(k);
    if (k <= -kCdfClamp) return std_normal_sf(h);
    if (r == 0.0) return std_normal_sf(h) * std_normal_sf(k);

    const HalfRule& g = bvn_rule(std::abs(r));
    double hk = h * k;
    double bvn = 0.0;
    if (std::abs(r) < 0.925) {
        const double hs = 0.5 * (h * h + k * k);
        const double asr = 0.5 * std::asin(r);
        for (int i = 0; i < g.n; ++i) {
            for (double x : {1.0 - g.x[i], 1.0 + g.x[i]}) {
                const double sn = std::sin(asr * x);
                bvn += g.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
            }
        }
        bvn = bvn * asr / kTwoPi + std_normal_sf(h) * std_normal_sf(k);
    } else {
        if (r < 0.0) {
            k = -k;
            hk = -hk;
        }
        if (std::abs(r) < 1.0) {
            const double as = 1.0 - r * r;
            double a = std::sqrt(as);
            const double bs = (h - k) * (h - k);
            const double c = (4.0 - hk) / 8.0;
            const double d = (12.0 - hk) / 80.0;
            double asr = -0.5 * (bs / as + hk);
            if (asr > -100.0)
                bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
            if (hk > -100.0) {
                const double b = std::sqrt(bs);
                const double sp = std::sqrt(kTwoPi) * std_normal_cdf(-b / a);
                bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            double sum = 0.0;
            for (int i = 0; i < g.n; ++i) {
                for (double x : {1.0 - g.x[i], 1.0 + g.x[i]}) {
                    const double xs = (a * x) * (a * x);
                    const double asr_i = -0.5 * (bs / xs + hk);
                    if (asr_i <= -100.0) continue;
                    const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    const double rs = std::sqrt(1.0 - xs);
                    const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
                    sum += g.w[i] * std::exp(asr_i) * (sp - ep);
                }
            }
            bvn = (a * sum - bvn) / kTwoPi;
        }
        if (r > 0.0) {
            bvn += std_normal_sf(std::max(h, k));
        } else if (h >= k) {
            bvn = -bvn;
        } else {
            const double l = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h)
                                     : std_normal_sf(h) - std_normal_sf(k);
            bvn = l - bvn;
        }
    }
    return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace detail

/// P(Z1 <= h, Z2 <= k) for a standard bivariate normal with correlation rho.
/// Infinite arguments are accepted; |z| >= 38.5 is treated as infinite.
inline double bvn_cdf(double h, double k, double rho) {
    if (std::isnan(h) || std::isnan(k) || std::isnan(rho)) throw DomainError("bvn_cdf: NaN argument");
    if (rho < -1.0 || rho > 1.0) throw DomainError("bvn_cdf: correlation outside [-1, 1]");
    return detail::bvnu(-h, -k, rho);
}

/// Rosenbaum's truncated first moment E[1{Y1>h} Y1 1{Y2>k}] for corr(Y1, Y2) = -cos(theta).
inline double rosenbaum_m(double h, double k, double theta) {
    if (!(theta > 0.0 && theta < std::numbers::pi))
        throw DomainError("rosenbaum_m: theta must lie in (0, pi)");
    const double c = std::cos(theta), s = std::sin(theta);
    return std_normal_pdf(h) * std_normal_sf((k + h * c) / s) -
           c * std_normal_pdf(k) * std_normal_sf((h + k * c) / s);
}

}  // namespace nnk
