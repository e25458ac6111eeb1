#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "activations.hpp"
#include "data_io.hpp"
#include "deep.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace nnk {

/// Cholesky factorization of K + noise_var I with the solved weights.
struct GpFit {
    Eigen::MatrixXd L;  // lower factor
    Eigen::VectorXd alpha;
    double noise_var = 0.0;
    double log_det = 0.0;
    double jitter = 0.0;  // extra diagonal added by the single retry, 0 if none

    Eigen::Index size() const { return L.rows(); }
};

/// Posterior mean and variance at test points.
struct Prediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    int clamped = 0;  // variances in [-1e-10, 0) set to zero
};

inline constexpr double kVarClampTol = 1e-10;

inline GpFit fit(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double noise_var) {
    if (K.rows() != K.cols() || K.rows() != y.size()) throw ShapeError("fit: K must be N x N with N targets");
    if (!(noise_var > 0.0)) throw DomainError("fit: noise variance must be strictly positive");
    if (!K.allFinite() || !y.allFinite()) throw NumericError("fit: non-finite kernel or targets");
    const Eigen::Index n = K.rows();
    Eigen::MatrixXd A = 0.5 * (K + K.transpose());
    A.diagonal().array() += noise_var;
    GpFit f;
    f.noise_var = noise_var;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) {
        f.jitter = 1e-8 * A.trace() / static_cast<double>(n);
        A.diagonal().array() += f.jitter;
        llt.compute(A);
        if (llt.info() != Eigen::Success) throw NumericError("fit: Cholesky failed after jitter retry");
    }
    f.L = llt.matrixL();
    f.alpha = llt.solve(y);
    f.log_det = 2.0 * f.L.diagonal().array().log().sum();
    return f;
}

/// K_star is M x N (test by train); kss_diag has the M prior variances.
inline Prediction predict(const GpFit& f, const Eigen::MatrixXd& K_star, const Eigen::VectorXd& kss_diag) {
    if (K_star.cols() != f.size() || K_star.rows() != kss_diag.size())
        throw ShapeError("predict: K_star must be M x N with M prior variances");
    Prediction p;
    p.mean = K_star * f.alpha;
    const Eigen::MatrixXd V = f.L.triangularView<Eigen::Lower>().solve(K_star.transpose());
    p.var = kss_diag - V.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < p.var.size(); ++i) {
        if (p.var[i] < -kVarClampTol)
            throw NumericError("predict: negative predictive variance " + std::to_string(p.var[i]) + " at row " +
                               std::to_string(i));
        if (p.var[i] < 0.0) {
            p.var[i] = 0.0;
            ++p.clamped;
        }
    }
    return p;
}

/// Negative log marginal likelihood of the targets the fit was built from.
inline double nll(const GpFit& f, const Eigen::VectorXd& y) {
    if (y.size() != f.size()) throw ShapeError("nll: target size mismatch");
    return 0.5 * y.dot(f.alpha) + 0.5 * f.log_det + 0.5 * static_cast<double>(y.size()) * std::log(kTwoPi);
}

inline double rmse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

enum class Metric { TestRmse, TrainRmse, Nll };

inline Metric parse_metric(const std::string& s) {
    if (s == "test_rmse") return Metric::TestRmse;
    if (s == "train_rmse") return Metric::TrainRmse;
    if (s == "nll") return Metric::Nll;
    throw DomainError("unknown metric '" + s + "'");
}

/// One row of the results table.
struct GridRow {
    std::string activation;
    int depth = 1;
    double sigma_w2 = 1.0;
    double sigma_b2 = 0.0;
    double noise_var = 0.1;
    int split_id = 0;  // -1 for the mean over splits
    double train_rmse = 0.0;
    double test_rmse = 0.0;
    double nll = 0.0;
};

struct GridOptions {
    int n_splits = 5;
    double train_frac = 0.8;
    std::uint64_t seed = 0;
    bool use_ntk = false;
    std::optional<double> sigma_b2;  // unset: tied to sigma_w2
};

struct GridResult {
    std::vector<GridRow> rows;    // every configuration and split
    std::vector<GridRow> ranked;  // split means, best first
};

inline double metric_of(const GridRow& r, Metric m) {
    switch (m) {
        case Metric::TestRmse: return r.test_rmse;
        case Metric::TrainRmse: return r.train_rmse;
        case Metric::Nll: return r.nll;
    }
    return r.test_rmse;
}

/// Exhaustive search over depth and sigma_w2 with seeded train/test splits of
/// an already standardized dataset. Ties rank by depth, then sigma_w2.
inline GridResult grid_search(const Dataset& ds, const Activation& act, const std::vector<int>& depths,
                              const std::vector<double>& sigma_w2s, double noise_var, Metric metric,
                              const GridOptions& opt = {}) {
    if (ds.X.rows() < 4) throw DomainError("grid_search: dataset needs at least 4 points");
    if (depths.empty() || sigma_w2s.empty()) throw DomainError("grid_search: empty parameter range");
    for (int d : depths)
        if (d < 1) throw DomainError("grid_search: depths must be >= 1");
    const int max_depth = *std::max_element(depths.begin(), depths.end());

    std::vector<std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>>> splits;
    for (int s = 0; s < opt.n_splits; ++s) splits.push_back(split_indices(ds.X.rows(), opt.train_frac, opt.seed + s));

    // One deep kernel pass per sigma_w2 over all rows; splits slice it.
    std::vector<std::vector<GridRow>> per_w(sigma_w2s.size());
    parallel_for(sigma_w2s.size(), [&](std::size_t wi) {
        const double sw2 = sigma_w2s[wi];
        const double sb2 = opt.sigma_b2.value_or(sw2);
        const auto Ks = deep_kernel_matrices(act, ds.X, NetworkHyper::shared(max_depth, sw2, sb2), opt.use_ntk);
        for (int depth : depths) {
            const Eigen::MatrixXd& K = Ks[depth - 1];
            for (int s = 0; s < opt.n_splits; ++s) {
                const auto& [tr, te] = splits[s];
                const Eigen::MatrixXd Ktr = K(tr, tr);
                const Eigen::VectorXd ytr = ds.y(tr);
                const GpFit f = fit(Ktr, ytr, noise_var);
                const Eigen::VectorXd mtr = Ktr * f.alpha;
                const Eigen::MatrixXd Kte = K(te, tr);
                const Eigen::VectorXd mte = Kte * f.alpha;
                GridRow r{to_string(act), depth, sw2, sb2, noise_var, s, rmse(mtr, ytr), rmse(mte, ds.y(te)),
                          nll(f, ytr)};
                per_w[wi].push_back(r);
            }
        }
    });

    GridResult out;
    for (const auto& v : per_w) out.rows.insert(out.rows.end(), v.begin(), v.end());
    for (std::size_t i = 0; i < out.rows.size(); i += opt.n_splits) {
        GridRow m = out.rows[i];
        m.split_id = -1;
        m.train_rmse = m.test_rmse = m.nll = 0.0;
        for (int s = 0; s < opt.n_splits; ++s) {
            m.train_rmse += out.rows[i + s].train_rmse / opt.n_splits;
            m.test_rmse += out.rows[i + s].test_rmse / opt.n_splits;
            m.nll += out.rows[i + s].nll / opt.n_splits;
        }
        out.ranked.push_back(m);
    }
    std::stable_sort(out.ranked.begin(), out.ranked.end(), [&](const GridRow& a, const GridRow& b) {
        return std::tuple(metric_of(a, metric), a.depth, a.sigma_w2) <
               std::tuple(metric_of(b, metric), b.depth, b.sigma_w2);
    });
    return out;
}

/// One (activation, depth, repetition) cell of the disc-task depth sweep.
struct SweepRow {
    std::string activation;
    int depth = 1;
    int rep = 0;
    double train_mse = 0.0;
    double test_mse = 0.0;
    double const_mse = 0.0;  // MSE of predicting the training-target mean
    double mean_std_ratio = 0.0;  // std of the test posterior mean / std of training targets
};

struct SweepOptions {
    std::string function = "sin";
    int n_train = 20;
    int n_test = 100;
    int reps = 10;
    double noise_var = 0.1;
    double sigma_b2 = 0.0;
    std::uint64_t seed = 0;
};

inline double population_std(const Eigen::VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size()));
}

/// Fits the depth-l kernel GP to noisy disc-task samples for l = 1..max_depth
/// and scores it on a uniform heading grid against the noiseless target.
inline std::vector<SweepRow> disc_depth_sweep(const Activation& act, double sigma_w2, int max_depth,
                                              const SweepOptions& opt = {}) {
    if (opt.n_train < 1 || opt.n_test < 1 || opt.reps < 1) throw DomainError("disc_depth_sweep: empty sweep");
    Eigen::MatrixXd Xte(opt.n_test, 2);
    Eigen::VectorXd fte(opt.n_test);
    for (int j = 0; j < opt.n_test; ++j) {
        const double g = 2.0 * std::numbers::pi * j / opt.n_test;
        Xte(j, 0) = std::cos(g);
        Xte(j, 1) = std::sin(g);
        fte[j] = disc_target(opt.function, g);
    }
    const auto hyper = NetworkHyper::shared(max_depth, sigma_w2, opt.sigma_b2);
    std::vector<std::vector<SweepRow>> per_rep(opt.reps);
    for (int r = 0; r < opt.reps; ++r) {
        const Dataset tr = disc_task(opt.function, opt.n_train, opt.noise_var, opt.seed + r);
        Eigen::MatrixXd X(opt.n_train + opt.n_test, 2);
        X << tr.X, Xte;
        const auto Ks = deep_kernel_matrices(act, X, hyper);
        const double cmse = (fte.array() - tr.y.mean()).square().mean();
        const double ystd = population_std(tr.y);
        for (int l = 1; l <= max_depth; ++l) {
            const Eigen::MatrixXd& K = Ks[l - 1];
            const Eigen::MatrixXd Ktr = K.topLeftCorner(opt.n_train, opt.n_train);
            const GpFit f = fit(Ktr, tr.y, opt.noise_var);
            const Eigen::VectorXd mtr = Ktr * f.alpha;
            const Eigen::VectorXd mte = K.bottomLeftCorner(opt.n_test, opt.n_train) * f.alpha;
            per_rep[r].push_back({to_string(act), l, r, (mtr - tr.y).squaredNorm() / opt.n_train,
                                  (mte - fte).squaredNorm() / opt.n_test, cmse, population_std(mte) / ystd});
        }
    }
    std::vector<SweepRow> out;
    for (const auto& v : per_rep) out.insert(out.end(), v.begin(), v.end());
    return out;
}

}  // namespace nnk
