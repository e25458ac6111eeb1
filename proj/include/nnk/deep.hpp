#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "activations.hpp"
#include "error.hpp"
#include "kernels.hpp"
#include "parallel.hpp"

namespace nnk {

/// Per-layer pre-activation variances and their correlation.
struct LayerState {
    double s1_sq = 1.0;
    double s2_sq = 1.0;
    double rho = 0.0;

    double k() const { return rho * std::sqrt(s1_sq * s2_sq); }
};

/// Kernel and tangent-kernel state; tau is used only by the rescaled recursion.
struct NtkState {
    double s1_sq = 1.0;
    double s2_sq = 1.0;
    double k = 0.0;
    double T = 0.0;
    double tau = 0.5;
};

/// Weight and bias variances for the input map (index 0) and each of the
/// `depth` layer updates (indices 1..depth). A single entry is shared by all.
struct NetworkHyper {
    int depth = 1;
    std::vector<double> sigma_w2{1.0};
    std::vector<double> sigma_b2{0.0};

    static NetworkHyper shared(int depth, double sw2, double sb2) { return {depth, {sw2}, {sb2}}; }

    double w(int l) const { return sigma_w2.size() == 1 ? sigma_w2[0] : sigma_w2.at(l); }
    double b(int l) const { return sigma_b2.size() == 1 ? sigma_b2[0] : sigma_b2.at(l); }

    void validate() const {
        if (depth < 1) throw DomainError("NetworkHyper: depth must be >= 1");
        for (const auto* v : {&sigma_w2, &sigma_b2}) {
            if (v->size() != 1 && v->size() != static_cast<std::size_t>(depth) + 1)
                throw DomainError("NetworkHyper: need 1 or depth+1 variances");
            for (double x : *v)
                if (!(x >= 0.0)) throw DomainError("NetworkHyper: variances must be non-negative");
        }
    }

    // Expanded to depth+1 explicit entries.
    NetworkHyper per_layer() const {
        NetworkHyper h{depth, {}, {}};
        for (int l = 0; l <= depth; ++l) {
            h.sigma_w2.push_back(w(l));
            h.sigma_b2.push_back(b(l));
        }
        return h;
    }
};

inline constexpr double kRhoOvershoot = 1e-12;

namespace detail {

inline double normalize_rho(double k, double a, double b, const char* who) {
    const double rho = k / std::sqrt(a * b);
    if (!std::isfinite(rho)) throw NumericError(std::string(who) + ": non-finite correlation");
    if (std::abs(rho) > 1.0 + kRhoOvershoot)
        throw NumericError(std::string(who) + ": normalized kernel overshoots [-1, 1] by " +
                           std::to_string(std::abs(rho) - 1.0));
    return std::clamp(rho, -1.0, 1.0);
}

inline void validate_state(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("state: variances must be positive");
}

}  // namespace detail

/// One layer of the kernel map (s1^2, s2^2, rho) -> (s1'^2, s2'^2, rho').
inline LayerState iterate_state(const Activation& act, const LayerState& st, double sigma_w2, double sigma_b2) {
    detail::validate_state(st.s1_sq, st.s2_sq);
    const double s1 = std::sqrt(st.s1_sq), s2 = std::sqrt(st.s2_sq);
    LayerState out;
    out.s1_sq = kernel(act, {s1, s1, 1.0, sigma_w2, sigma_b2});
    out.s2_sq = st.s1_sq == st.s2_sq ? out.s1_sq : kernel(act, {s2, s2, 1.0, sigma_w2, sigma_b2});
    const double k = kernel(act, {s1, s2, st.rho, sigma_w2, sigma_b2});
    out.rho = detail::normalize_rho(k, out.s1_sq, out.s2_sq, "iterate_state");
    return out;
}

/// Layer-0 state of two inputs under Sigma = diag(sigma_w2, ..., sigma_b2).
inline LayerState input_state(std::span<const double> x1, std::span<const double> x2, double sigma_w2,
                              double sigma_b2) {
    if (x1.size() != x2.size() || x1.empty()) throw ShapeError("input_state: dimension mismatch");
    double n1 = 0.0, n2 = 0.0, d = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        n1 += x1[i] * x1[i];
        n2 += x2[i] * x2[i];
        d += x1[i] * x2[i];
    }
    LayerState st{sigma_w2 * n1 + sigma_b2, sigma_w2 * n2 + sigma_b2, 0.0};
    if (!(st.s1_sq > 0.0) || !(st.s2_sq > 0.0))
        throw DomainError("input_state: zero-norm input with sigma_b2 = 0");
    st.rho = std::clamp((sigma_w2 * d + sigma_b2) / std::sqrt(st.s1_sq * st.s2_sq), -1.0, 1.0);
    return st;
}

/// Layer-0 state of two inputs of norm `norm` at angle theta0.
inline LayerState angle_state(double theta0, double norm, double sigma_w2, double sigma_b2) {
    if (!(norm > 0.0)) throw DomainError("norm must be positive");
    const double x1[2] = {norm, 0.0};
    const double x2[2] = {norm * std::cos(theta0), norm * std::sin(theta0)};
    LayerState st = input_state(x1, x2, sigma_w2, sigma_b2);
    if (theta0 == 0.0) st.rho = 1.0;
    return st;
}

/// States of layers 0..depth starting from `start` (layer 0).
inline std::vector<LayerState> deep_trajectory(const Activation& act, const LayerState& start,
                                               const NetworkHyper& hyper) {
    hyper.validate();
    std::vector<LayerState> traj{start};
    traj.reserve(hyper.depth + 1);
    for (int l = 1; l <= hyper.depth; ++l) traj.push_back(iterate_state(act, traj.back(), hyper.w(l), hyper.b(l)));
    return traj;
}

inline std::vector<LayerState> deep_trajectory(const Activation& act, std::span<const double> x1,
                                               std::span<const double> x2, const NetworkHyper& hyper) {
    return deep_trajectory(act, input_state(x1, x2, hyper.w(0), hyper.b(0)), hyper);
}

/// cos theta^(l) for l = 1..depth for two inputs of norm `norm` at angle theta0.
inline std::vector<double> deep_normalized_kernel(const Activation& act, double theta0, double norm,
                                                  const NetworkHyper& hyper) {
    const auto traj = deep_trajectory(act, angle_state(theta0, norm, hyper.w(0), hyper.b(0)), hyper);
    std::vector<double> out;
    for (std::size_t l = 1; l < traj.size(); ++l) out.push_back(traj[l].rho);
    return out;
}

/// One layer of the kernel/NTK recursion: k' from the kernel, T' = T kdot + k'.
inline NtkState ntk_iterate(const Activation& act, const NtkState& st, double sigma_w2, double sigma_b2,
                            double* kdot_out = nullptr) {
    detail::validate_state(st.s1_sq, st.s2_sq);
    const double s1 = std::sqrt(st.s1_sq), s2 = std::sqrt(st.s2_sq);
    const double rho = detail::normalize_rho(st.k, st.s1_sq, st.s2_sq, "ntk_iterate");
    const KernelArgs a{s1, s2, rho, sigma_w2, sigma_b2};
    NtkState out = st;
    out.s1_sq = kernel(act, {s1, s1, 1.0, sigma_w2, sigma_b2});
    out.s2_sq = st.s1_sq == st.s2_sq ? out.s1_sq : kernel(act, {s2, s2, 1.0, sigma_w2, sigma_b2});
    out.k = kernel(act, a);
    const double kd = (st.T == 0.0 && !kdot_out) ? 0.0 : kernel_dot(act, a);
    if (kdot_out) *kdot_out = kd;
    out.T = st.T * kd + out.k;
    return out;
}

/// Depth-rescaled tangent kernel: T' = tau((1/tau - 1) T kdot + k'), tau' = 1/(1/tau + 1).
inline NtkState scaled_ntk_iterate(const Activation& act, const NtkState& st, double sigma_w2, double sigma_b2) {
    if (!(st.tau > 0.0 && st.tau <= 0.5)) throw DomainError("scaled_ntk_iterate: tau must lie in (0, 1/2]");
    detail::validate_state(st.s1_sq, st.s2_sq);
    const double s1 = std::sqrt(st.s1_sq), s2 = std::sqrt(st.s2_sq);
    const double rho = detail::normalize_rho(st.k, st.s1_sq, st.s2_sq, "scaled_ntk_iterate");
    const KernelArgs a{s1, s2, rho, sigma_w2, sigma_b2};
    NtkState out;
    out.s1_sq = kernel(act, {s1, s1, 1.0, sigma_w2, sigma_b2});
    out.s2_sq = st.s1_sq == st.s2_sq ? out.s1_sq : kernel(act, {s2, s2, 1.0, sigma_w2, sigma_b2});
    out.k = kernel(act, a);
    out.T = st.tau * ((1.0 / st.tau - 1.0) * st.T * kernel_dot(act, a) + out.k);
    out.tau = 1.0 / (1.0 / st.tau + 1.0);
    return out;
}

/// NTK states of layers 0..depth (T = 0 at layer 0, so T^(1) = k^(1)).
/// With `scaled`, layers >= 2 use the rescaled recursion started at tau = 1/2.
inline std::vector<NtkState> ntk_trajectory(const Activation& act, const LayerState& start,
                                            const NetworkHyper& hyper, bool scaled = false) {
    hyper.validate();
    std::vector<NtkState> traj{{start.s1_sq, start.s2_sq, start.k(), 0.0, 0.5}};
    for (int l = 1; l <= hyper.depth; ++l) {
        const auto& prev = traj.back();
        if (scaled && l >= 2)
            traj.push_back(scaled_ntk_iterate(act, prev, hyper.w(l), hyper.b(l)));
        else
            traj.push_back(ntk_iterate(act, prev, hyper.w(l), hyper.b(l)));
    }
    return traj;
}

/// Depth-`hyper.depth` kernel (or NTK) between two inputs.
inline double deep_kernel(const Activation& act, std::span<const double> x1, std::span<const double> x2,
                          const NetworkHyper& hyper, bool use_ntk = false) {
    const LayerState s0 = input_state(x1, x2, hyper.w(0), hyper.b(0));
    if (use_ntk) return ntk_trajectory(act, s0, hyper).back().T;
    return deep_trajectory(act, s0, hyper).back().k();
}

namespace detail {

// Row i of X as a contiguous vector.
inline std::vector<double> row_of(const Eigen::MatrixXd& X, Eigen::Index i) {
    std::vector<double> r(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) r[j] = X(i, j);
    return r;
}

// Per-layer values (kernel or NTK) for layers 1..depth.
inline std::vector<double> layer_values(const Activation& act, std::span<const double> x1,
                                        std::span<const double> x2, const NetworkHyper& hyper, bool use_ntk) {
    const LayerState s0 = input_state(x1, x2, hyper.w(0), hyper.b(0));
    std::vector<double> out;
    if (use_ntk) {
        const auto t = ntk_trajectory(act, s0, hyper);
        for (std::size_t l = 1; l < t.size(); ++l) out.push_back(t[l].T);
    } else {
        const auto t = deep_trajectory(act, s0, hyper);
        for (std::size_t l = 1; l < t.size(); ++l) out.push_back(t[l].k());
    }
    return out;
}

}  // namespace detail

/// Kernel matrices of the rows of X at every depth 1..hyper.depth. Only the
/// upper triangle is computed; the lower is mirrored, so each is exactly symmetric.
inline std::vector<Eigen::MatrixXd> deep_kernel_matrices(const Activation& act, const Eigen::MatrixXd& X,
                                                         const NetworkHyper& hyper, bool use_ntk = false) {
    hyper.validate();
    const Eigen::Index n = X.rows();
    if (n < 1) throw ShapeError("deep_kernel_matrix: need at least one row");
    std::vector<std::vector<double>> rows(n);
    for (Eigen::Index i = 0; i < n; ++i) rows[i] = detail::row_of(X, i);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<std::vector<double>> vals(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [i, j] = pairs[p];
        try {
            vals[p] = detail::layer_values(act, rows[i], rows[j], hyper, use_ntk);
        } catch (const std::exception& e) {
            throw NumericError("deep_kernel_matrix: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                               "): " + e.what());
        }
        for (double v : vals[p])
            if (!std::isfinite(v))
                throw NumericError("deep_kernel_matrix: non-finite entry at (" + std::to_string(i) + ", " +
                                   std::to_string(j) + ")");
    });
    std::vector<Eigen::MatrixXd> out(hyper.depth, Eigen::MatrixXd(n, n));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        for (int l = 0; l < hyper.depth; ++l) {
            out[l](i, j) = vals[p][l];
            out[l](j, i) = vals[p][l];
        }
    }
    return out;
}

/// Depth-L kernel (or NTK) matrix of the rows of X.
inline Eigen::MatrixXd deep_kernel_matrix(const Activation& act, const Eigen::MatrixXd& X,
                                          const NetworkHyper& hyper, bool use_ntk = false) {
    return deep_kernel_matrices(act, X, hyper, use_ntk).back();
}

/// True when K + 1e-8 trace(K)/N I admits a Cholesky factorization.
inline bool psd_with_jitter(const Eigen::MatrixXd& K) {
    const double jitter = 1e-8 * K.trace() / static_cast<double>(K.rows());
    Eigen::MatrixXd A = K;
    A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    return llt.info() == Eigen::Success;
}

/// Gradient of the depth-L kernel with respect to every (sigma_w2, sigma_b2) pair.
struct HyperGradient {
    std::vector<double> d_sigma_w2;
    std::vector<double> d_sigma_b2;
};

/// Closed-form chain rule through the ReLU kernel map in (s1^2, s2^2, k) coordinates.
inline HyperGradient kernel_grad_relu(const Activation& act, const NetworkHyper& hyper, std::span<const double> x1,
                                      std::span<const double> x2) {
    if (!(act.kind == ActKind::ReLU || (act.kind == ActKind::LReLU && act.slope == 0.0)))
        throw DomainError("kernel_grad_relu: activation must be ReLU");
    hyper.validate();
    const auto traj = deep_trajectory(act, x1, x2, hyper);
    const int L = hyper.depth;
    HyperGradient g{std::vector<double>(L + 1), std::vector<double>(L + 1)};
    // Adjoint of (s1^2, s2^2, k) at the current layer.
    double v1 = 0.0, v2 = 0.0, vk = 1.0;
    for (int l = L; l >= 1; --l) {
        const LayerState& in = traj[l - 1];
        const LayerState& out = traj[l];
        const double sw2 = hyper.w(l), sb2 = hyper.b(l);
        const double j1 = detail::arccos_j1(in.rho);
        const double kin = in.k();
        const double root = std::sqrt(in.s1_sq * in.s2_sq);
        g.d_sigma_w2[l] = v1 * in.s1_sq / 2.0 + v2 * in.s2_sq / 2.0 + vk * root * j1;
        g.d_sigma_b2[l] = v1 + v2 + vk;
        const double kdot = sw2 * detail::quadrant(in.rho);
        const double dk_ds1 = (out.k() - sb2 - kin * kdot) / (2.0 * in.s1_sq);
        const double dk_ds2 = (out.k() - sb2 - kin * kdot) / (2.0 * in.s2_sq);
        const double n1 = v1 * sw2 / 2.0 + vk * dk_ds1;
        const double n2 = v2 * sw2 / 2.0 + vk * dk_ds2;
        vk = vk * kdot;
        v1 = n1;
        v2 = n2;
    }
    double a = 0.0, b = 0.0, d = 0.0;
    for (std::size_t i = 0; i < x1.size(); ++i) {
        a += x1[i] * x1[i];
        b += x2[i] * x2[i];
        d += x1[i] * x2[i];
    }
    g.d_sigma_w2[0] = v1 * a + v2 * b + vk * d;
    g.d_sigma_b2[0] = v1 + v2 + vk;
    return g;
}

/// Central-difference gradient of the depth-L kernel in every hyperparameter.
/// Steps are relative (h * max(1, |p|)); parameters at 0 use a one-sided
/// second-order stencil to stay non-negative.
inline HyperGradient kernel_grad_fd(const Activation& act, const NetworkHyper& hyper, std::span<const double> x1,
                                    std::span<const double> x2, double h = 1e-5, bool use_ntk = false) {
    NetworkHyper base = hyper.per_layer();
    base.validate();
    auto value = [&](const NetworkHyper& hp) { return deep_kernel(act, x1, x2, hp, use_ntk); };
    auto partial = [&](std::vector<double> NetworkHyper::*field, int l) {
        NetworkHyper hp = base;
        const double p = (base.*field)[l];
        const double step = h * std::max(1.0, std::abs(p));
        if (p - step >= 0.0) {
            (hp.*field)[l] = p + step;
            const double fp = value(hp);
            (hp.*field)[l] = p - step;
            const double fm = value(hp);
            return (fp - fm) / (2.0 * step);
        }
        const double f0 = value(base);
        (hp.*field)[l] = p + step;
        const double f1 = value(hp);
        (hp.*field)[l] = p + 2.0 * step;
        const double f2 = value(hp);
        return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step);
    };
    HyperGradient g;
    for (int l = 0; l <= base.depth; ++l) {
        g.d_sigma_w2.push_back(partial(&NetworkHyper::sigma_w2, l));
        g.d_sigma_b2.push_back(partial(&NetworkHyper::sigma_b2, l));
    }
    return g;
}

}  // namespace nnk
