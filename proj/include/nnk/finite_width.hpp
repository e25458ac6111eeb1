#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "activations.hpp"
#include "error.hpp"

namespace nnk {

namespace detail {

inline std::mt19937_64 layer_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x6e6e6bu};
    return std::mt19937_64(seq);
}

}  // namespace detail

/// Q factor of a dim x dim matrix of U[0, 1] entries, signs fixed so diag(R) > 0.
inline Eigen::MatrixXd random_rotation(int dim, std::uint64_t seed) {
    if (dim < 2) throw DomainError("random_rotation: dim must be >= 2");
    auto gen = detail::layer_rng(seed, 0xffffffffu);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd A(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) A(i, j) = u(gen);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

/// A finite-width MLP described by its seed. Weights are drawn from one
/// generator per layer while propagating and are never stored: the input layer
/// has N(0, sigma_w2) weights (so its pre-activations have variance
/// sigma_w2 |x|^2 + sigma_b2), hidden layers N(0, sigma_w2 / n), biases N(0, sigma_b2).
struct SampledNet {
    Activation act;
    int width = 3000;
    int depth = 1;
    double sigma_w2 = 1.0;
    double sigma_b2 = 0.0;
    std::uint64_t seed = 0;

    /// Empirical kernels sigma_w2 / n <psi(h_l(x_p)), psi(h_l(x_q))> + sigma_b2 of the
    /// inputs (columns of X) at layers l = 1..depth.
    std::vector<Eigen::MatrixXd> layer_kernels(const Eigen::MatrixXd& X) const {
        if (width < 1 || depth < 1) throw DomainError("SampledNet: width and depth must be >= 1");
        const Eigen::Index d = X.rows(), P = X.cols();
        std::normal_distribution<double> nd(0.0, 1.0);
        // H is width x P: pre-activations of every input.
        Eigen::MatrixXd H(width, P);
        {
            auto gen = detail::layer_rng(seed, 0);
            const double sw = std::sqrt(sigma_w2), sb = std::sqrt(sigma_b2);
            Eigen::RowVectorXd w(d);
            for (int i = 0; i < width; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) w[j] = sw * nd(gen);
                H.row(i) = w * X;
                H.row(i).array() += sb * nd(gen);
            }
        }
        std::vector<Eigen::MatrixXd> out;
        Eigen::MatrixXd A(width, P);
        Eigen::RowVectorXd w(width);
        for (int l = 1; l <= depth; ++l) {
            A = H.unaryExpr([&](double z) { return eval(act, z); });
            out.push_back(sigma_w2 / width * (A.transpose() * A));
            out.back().array() += sigma_b2;
            if (l == depth) break;
            auto gen = detail::layer_rng(seed, static_cast<std::uint64_t>(l));
            const double sw = std::sqrt(sigma_w2 / width), sb = std::sqrt(sigma_b2);
            for (int i = 0; i < width; ++i) {
                for (int j = 0; j < width; ++j) w[j] = sw * nd(gen);
                H.row(i) = w * A;
                H.row(i).array() += sb * nd(gen);
            }
        }
        return out;
    }
};

/// Empirical cos theta^(l), l = 1..depth, for each theta0: inputs norm (1, 0)
/// and norm (cos theta0, sin theta0), both rotated by random_rotation(2, seed),
/// through one sampled network. Result is thetas.size() x depth.
inline Eigen::MatrixXd empirical_normalized_kernels(const Activation& act, const std::vector<double>& thetas,
                                                    double norm, int width, int depth, double sigma_w2,
                                                    double sigma_b2, std::uint64_t seed) {
    if (width < 1) throw DomainError("empirical_normalized_kernel: width must be >= 1");
    if (!(norm > 0.0)) throw DomainError("empirical_normalized_kernel: norm must be positive");
    const Eigen::Index P = static_cast<Eigen::Index>(thetas.size()) + 1;
    Eigen::MatrixXd X(2, P);
    X(0, 0) = norm;
    X(1, 0) = 0.0;
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        X(0, t + 1) = norm * std::cos(thetas[t]);
        X(1, t + 1) = norm * std::sin(thetas[t]);
    }
    X = random_rotation(2, seed) * X;
    const SampledNet net{act, width, depth, sigma_w2, sigma_b2, seed};
    const auto Ks = net.layer_kernels(X);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(thetas.size()), depth);
    for (int l = 0; l < depth; ++l) {
        const auto& K = Ks[l];
        for (Eigen::Index t = 0; t + 1 < P; ++t) {
            out(t, l) = thetas[t] == 0.0 ? 1.0 : K(0, t + 1) / std::sqrt(K(0, 0) * K(t + 1, t + 1));
        }
    }
    return out;
}

/// Empirical cos theta^(depth) for a single angle; requires width >= 100.
inline double empirical_normalized_kernel(const Activation& act, double theta0, double norm, int width, int depth,
                                          double sigma_w2, double sigma_b2, std::uint64_t seed) {
    if (width < 100) throw DomainError("empirical_normalized_kernel: width must be >= 100");
    return empirical_normalized_kernels(act, {theta0}, norm, width, depth, sigma_w2, sigma_b2, seed)(0, depth - 1);
}

}  // namespace nnk
