#pragma once

// Independent reference computations for the tests. Nothing here is used by the library.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

template <class F>
double gk(F f, double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

// P(Z1 <= h, Z2 <= k) by adaptive integration of the conditional normal cdf.
inline double bvn(double h, double k, double r) {
    if (r >= 1.0) return Phi(std::min(h, k));
    if (r <= -1.0) return std::max(0.0, Phi(h) - Phi(-k));
    const double c = std::sqrt(1.0 - r * r);
    const double lo = -40.0;
    return gk([&](double x) { return phi(x) * Phi((k - r * x) / c); }, lo, std::min(h, 40.0));
}

// E[f(s1 Z1, s2 Z2)], nested adaptive Gauss-Kronrod split at the kinks g1 = 0 and
// rho g1 + c g2 = 0.
template <class F>
double expect2(F f, double s1, double s2, double rho) {
    const double c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    const double R = 12.0;
    auto inner = [&](double g1) {
        auto h = [&](double g2) { return phi(g2) * f(s1 * g1, s2 * (rho * g1 + c * g2)); };
        if (c == 0.0) return f(s1 * g1, s2 * rho * g1);
        const double kink = std::clamp(-rho * g1 / c, -R, R);
        return gk(h, -R, kink) + gk(h, kink, R);
    };
    auto outer = [&](double g1) { return phi(g1) * inner(g1); };
    return gk(outer, -R, 0.0) + gk(outer, 0.0, R);
}

struct Mc {
    double mean = 0.0;
    double se = 0.0;
};

// Monte-Carlo mean and standard error of f(Y1, Y2) for standard normals with correlation r.
template <class F>
Mc mc2(F f, double r, std::int64_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    const double c = std::sqrt(1.0 - r * r);
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double a = nd(gen), b = nd(gen);
        const double v = f(a, r * a + c * b);
        s += v;
        s2 += v * v;
    }
    const double m = s / n;
    return {m, std::sqrt((s2 / n - m * m) / (n - 1))};
}

}  // namespace oracle
