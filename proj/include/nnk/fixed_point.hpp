#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "activations.hpp"
#include "deep.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "special_functions.hpp"

namespace nnk {

/// Eigenvalues of the Jacobian of the layer map at (s1^2, s2^2, rho).
struct EigenTriple {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
};

namespace detail {

inline double lambda_diag(const Activation& act, double s, double sigma_w2, int nodes) {
    const double e = gaussian_expect1([&](double z) {
        const double p = eval(act, s * z);
        return (z * z - 1.0) * p * p;
    }, 1.0, nodes);
    return sigma_w2 * e / (2.0 * s * s);
}

}  // namespace detail

/// lambda1,2 = sigma_w2 E[(Z^2 - 1) psi^2(s Z)] / (2 s^2);
/// lambda3 = sigma_w2 s1 s2 / sqrt(g1 g2) E[psi'(s1 Z1) psi'(s2 Z2)], all by quadrature.
inline EigenTriple eigenvalues(const Activation& act, double s1_sq, double s2_sq, double rho, double sigma_w2,
                               double sigma_b2, int nodes = kDefaultNodes) {
    if (!(s1_sq > 0.0) || !(s2_sq > 0.0)) throw DomainError("eigenvalues: variances must be positive");
    if (std::isnan(rho) || rho < -1.0 || rho > 1.0) throw DomainError("eigenvalues: correlation outside [-1, 1]");
    const double s1 = std::sqrt(s1_sq), s2 = std::sqrt(s2_sq);
    const double g1 = kernel(act, {s1, s1, 1.0, sigma_w2, sigma_b2});
    const double g2 = kernel(act, {s2, s2, 1.0, sigma_w2, sigma_b2});
    EigenTriple t;
    t.lambda1 = detail::lambda_diag(act, s1, sigma_w2, nodes);
    t.lambda2 = s1_sq == s2_sq ? t.lambda1 : detail::lambda_diag(act, s2, sigma_w2, nodes);
    const double e = gaussian_expect2([&](double u, double v) { return deriv(act, u) * deriv(act, v); }, s1, s2,
                                      rho, nodes);
    t.lambda3 = sigma_w2 * s1 * s2 / std::sqrt(g1 * g2) * e;
    if (!std::isfinite(t.lambda1) || !std::isfinite(t.lambda2) || !std::isfinite(t.lambda3))
        throw NumericError("eigenvalues: non-finite expectation");
    return t;
}

/// lambda3 of the leaky ReLU at the norm-preserving variance with zero bias.
inline double lambda3_lrelu(double a, double theta) {
    if (!(a >= 0.0 && a < 1.0)) throw DomainError("lambda3_lrelu: slope must lie in [0, 1)");
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw DomainError("lambda3_lrelu: theta outside [0, pi]");
    const double c = (1.0 - a) * (1.0 - a);
    return (c * (std::numbers::pi - theta) / kTwoPi + a) / (c / 2.0 + a);
}

/// Arcsine quadrant term plus the two cross-term bounds for GELU at s1 = s2 = sigma * norm.
inline double lambda3_gelu_lower(double norm, double sigma, double theta) {
    const double s = sigma * norm;
    if (!(s > 0.0)) throw DomainError("lambda3_gelu_lower: sigma * norm must be positive");
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw DomainError("lambda3_gelu_lower: theta outside [0, pi]");
    const double rho = std::cos(theta), sin2 = std::sin(theta) * std::sin(theta);
    const double s2 = s * s;
    const double det = 1.0 + 2.0 * s2 + s2 * s2 * sin2;
    const double quad = 0.25 * (1.0 + 2.0 / std::numbers::pi * std::asin(s2 * rho / (1.0 + s2)));
    const double h1 = s2 * rho / (kTwoPi * (1.0 + s2) * std::sqrt(det));
    const double dh = s2 * rho / (kTwoPi * det * std::sqrt(det));
    return sigma * sigma * (quad + 2.0 * h1 + dh);
}

/// Exact lambda3 of the ELU at s1 = s2 = sigma * norm.
inline double lambda3_elu(double norm, double sigma, double theta) {
    const double s = sigma * norm;
    if (!(s > 0.0)) throw DomainError("lambda3_elu: sigma * norm must be positive");
    if (s > kEluMaxScale) throw DomainError("lambda3_elu: sigma * norm above 25 overflows double range");
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw DomainError("lambda3_elu: theta outside [0, pi]");
    const double rho = std::cos(theta);
    const double quad = bvn_cdf(0.0, 0.0, rho);
    const double cross = std::exp(0.5 * s * s) * bvn_cdf(s * rho, -s, -rho);
    const double both = std::exp(s * s * (1.0 + rho)) * bvn_cdf(-s * (1.0 + rho), -s * (1.0 + rho), rho);
    const double v = sigma * sigma * (quad + 2.0 * cross + both);
    if (!std::isfinite(v)) throw NumericError("lambda3_elu: non-finite intermediate");
    return v;
}

/// Weight standard deviation sigma with E[psi^2(sigma * norm * Z)] = norm^2.
inline double sigma_star(const Activation& act, double norm, double tol = 1e-8) {
    if (!(norm > 0.0)) throw DomainError("sigma_star: norm must be positive");
    if (act.kind == ActKind::ReLU) return std::numbers::sqrt2;
    if (act.kind == ActKind::LReLU) return std::sqrt(2.0 / (1.0 + act.slope * act.slope));
    auto f = [&](double sigma) {
        const double s = sigma * norm;
        return kernel(act, {s, s, 1.0, 1.0, 0.0}) - norm * norm;
    };
    double lo = 0.5, hi = 3.0;
    double flo = f(lo), fhi = f(hi);
    for (int i = 0; i < 4 && flo * fhi > 0.0; ++i) {
        lo *= 0.5;
        hi *= 1.5;
        flo = f(lo);
        fhi = f(hi);
    }
    if (flo * fhi > 0.0) {
        std::ostringstream os;
        os << "sigma_star: no sign change for " << to_string(act) << " at norm " << norm << " on [" << lo << ", "
           << hi << "] (f = " << flo << ", " << fhi << ")";
        throw NumericError(os.str());
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

enum class Verdict { UniqueContraction, NotContraction, Inconclusive };

inline std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::UniqueContraction: return "unique-contraction";
        case Verdict::NotContraction: return "not-contraction";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

struct FixedPointReport {
    bool converged = false;
    LayerState final_state;
    int iterations = 0;
    std::vector<double> per_step_ratio;
    Verdict verdict = Verdict::Inconclusive;
    double sup_lambda3 = 0.0;         // over the open theta grid
    double sup_lambda3_closed = 0.0;  // grid plus the endpoints 0 and pi
};

/// lambda3 on `n` interior points of (0, pi) plus both endpoints, at fixed variances.
inline std::vector<std::pair<double, double>> lambda3_grid(const Activation& act, double s1_sq, double s2_sq,
                                                           double sigma_w2, double sigma_b2, int n = 512,
                                                           bool endpoints = true, int nodes = kDefaultNodes) {
    std::vector<double> thetas;
    if (endpoints) thetas.push_back(0.0);
    for (int j = 1; j <= n; ++j) thetas.push_back(std::numbers::pi * j / (n + 1));
    if (endpoints) thetas.push_back(std::numbers::pi);
    std::vector<std::pair<double, double>> out(thetas.size());
    parallel_for(thetas.size(), [&](std::size_t i) {
        out[i] = {thetas[i],
                  eigenvalues(act, s1_sq, s2_sq, std::cos(thetas[i]), sigma_w2, sigma_b2, nodes).lambda3};
    });
    return out;
}

/// Iterates the layer map from `start` until successive states differ by less
/// than `tol` (max norm), recording successive-difference ratios. Numerical
/// failure along the way (the variance escaping to 0 or overflow) ends the
/// iteration unconverged. lambda3 is gridded at the final state when converged,
/// otherwise at the starting variances.
inline FixedPointReport find_fixed_point(const Activation& act, double sigma_w2, double sigma_b2,
                                         const LayerState& start, double tol = 1e-10, int max_iter = 10000,
                                         int grid = 512) {
    if (!(tol > 0.0)) throw DomainError("find_fixed_point: tol must be positive");
    FixedPointReport rep;
    LayerState cur = start;
    std::vector<double> dist;
    for (int it = 1; it <= max_iter; ++it) {
        LayerState next;
        try {
            next = iterate_state(act, cur, sigma_w2, sigma_b2);
        } catch (const std::exception&) {
            break;
        }
        const double d = std::max({std::abs(next.s1_sq - cur.s1_sq), std::abs(next.s2_sq - cur.s2_sq),
                                   std::abs(next.rho - cur.rho)});
        if (!std::isfinite(d)) break;
        dist.push_back(d);
        cur = next;
        rep.iterations = it;
        if (d < tol) {
            rep.converged = true;
            break;
        }
    }
    rep.final_state = cur;
    for (std::size_t i = 1; i < dist.size(); ++i)
        rep.per_step_ratio.push_back(dist[i - 1] > 0.0 ? dist[i] / dist[i - 1] : 0.0);

    const LayerState& at = rep.converged ? cur : start;
    rep.sup_lambda3 = -1e300;
    rep.sup_lambda3_closed = -1e300;
    try {
        const auto g = lambda3_grid(act, at.s1_sq, at.s2_sq, sigma_w2, sigma_b2, grid, true);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = std::abs(g[i].second);
            rep.sup_lambda3_closed = std::max(rep.sup_lambda3_closed, v);
            if (i > 0 && i + 1 < g.size()) rep.sup_lambda3 = std::max(rep.sup_lambda3, v);
        }
    } catch (const std::exception&) {
        rep.sup_lambda3 = rep.sup_lambda3_closed = std::numeric_limits<double>::quiet_NaN();
    }
    if (rep.sup_lambda3 >= 1.0)
        rep.verdict = Verdict::NotContraction;
    else if (rep.converged && rep.sup_lambda3 < 1.0)
        rep.verdict = Verdict::UniqueContraction;
    else
        rep.verdict = Verdict::Inconclusive;
    return rep;
}

/// lambda3 against theta: closed forms for the
/// leaky ReLU family and ELU, the GELU bound, quadrature otherwise.
inline std::vector<std::pair<double, double>> lambda3_sweep(const Activation& act, double norm, double sigma,
                                                            int n = 512) {
    std::vector<std::pair<double, double>> out;
    const double s_sq = sigma * sigma * norm * norm;
    for (int j = 1; j <= n; ++j) {
        const double th = std::numbers::pi * j / (n + 1);
        double v = 0.0;
        switch (act.kind) {
            case ActKind::ReLU: v = lambda3_lrelu(0.0, th); break;
            case ActKind::LReLU: v = lambda3_lrelu(act.slope, th); break;
            case ActKind::GELU: v = lambda3_gelu_lower(norm, sigma, th); break;
            case ActKind::ELU: v = lambda3_elu(norm, sigma, th); break;
            default: v = eigenvalues(act, s_sq, s_sq, std::cos(th), sigma * sigma, 0.0).lambda3; break;
        }
        out.emplace_back(th, v);
    }
    return out;
}

}  // namespace nnk
