#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "error.hpp"

namespace nnk {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw DomainError("gauss_legendre: n must be >= 1");
    QuadratureRule q;
    q.nodes.resize(n);
    q.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        if (n == 1) {
            x = 0.0;
            dp = 1.0;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.weights[i] = w;
        q.nodes[n - 1 - i] = x;
        q.weights[n - 1 - i] = w;
    }
    return q;
}

// Integrate f over [a, b] with a fixed rule.
template <class F>
double integrate(const QuadratureRule& q, double a, double b, F&& f) {
    const double h = 0.5 * (b - a), c = 0.5 * (a + b);
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * f(c + h * q.nodes[i]);
    return s * h;
}

// Composite rule: `panels` equal panels on [a, b].
template <class F>
double integrate_composite(const QuadratureRule& q, double a, double b, int panels, F&& f) {
    const double w = (b - a) / panels;
    double s = 0.0;
    for (int p = 0; p < panels; ++p) s += integrate(q, a + p * w, a + (p + 1) * w, f);
    return s;
}

}  // namespace nnk
