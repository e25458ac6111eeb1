// Acceptance suite: one PASS/FAIL line per criterion. Exits 0 unless --strict
// is given, in which case any FAIL makes the exit code 1.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nnk/nnk.hpp>

using namespace nnk;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const std::vector<double> kS{0.25, 0.5, 1.0, 2.0, 5.0};
const std::vector<double> kTheta{0.05, 0.5, 1.0, std::numbers::pi / 2, 2.5, std::numbers::pi - 0.05};

Outcome closed_form_vs_oracle() {
    double worst = 0.0;
    for (const auto& act : {Activation::gelu(), Activation::elu()})
        for (double s1 : kS)
            for (double s2 : kS)
                for (double th : kTheta)
                    for (double sw2 : {0.5, 1.0, 2.0})
                        for (double sb2 : {0.0, 0.5}) {
                            const KernelArgs a{s1, s2, std::cos(th), sw2, sb2};
                            const double k = kernel(act, a);
                            worst = std::max(worst, std::abs(k - kernel_quadrature(act, a, 120)) / std::max(1.0, std::abs(k)));
                        }
    // ELU against 1e7 samples per angle, shared across the 5 x 5 scale pairs.
    const auto elu = Activation::elu();
    const std::int64_t n = 10'000'000;
    int outside = 0, total = 0;
    double worst_z = 0.0;
    for (std::size_t t = 0; t < kTheta.size(); ++t) {
        const double rho = std::cos(kTheta[t]), c = std::sqrt(1.0 - rho * rho);
        std::mt19937_64 gen(1000 + t);
        std::normal_distribution<double> nd;
        std::vector<double> sum(25, 0.0), sq(25, 0.0);
        double p1[5], p2[5];
        for (std::int64_t i = 0; i < n; ++i) {
            const double g1 = nd(gen), g2 = rho * g1 + c * nd(gen);
            for (int a = 0; a < 5; ++a) {
                p1[a] = eval(elu, kS[a] * g1);
                p2[a] = eval(elu, kS[a] * g2);
            }
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b) {
                    const double v = p1[a] * p2[b];
                    sum[a * 5 + b] += v;
                    sq[a * 5 + b] += v * v;
                }
        }
        for (int a = 0; a < 5; ++a)
            for (int b = 0; b < 5; ++b) {
                const double m = sum[a * 5 + b] / n;
                const double se = std::sqrt((sq[a * 5 + b] / n - m * m) / (n - 1));
                const double z = std::abs(kernel(elu, {kS[a], kS[b], rho}) - m) / se;
                worst_z = std::max(worst_z, z);
                outside += z > 3.0;
                ++total;
            }
    }
    const bool ok = worst <= 1e-6 && outside == 0;
    return {ok ? Status::Pass : Status::Fail,
            fmt("max rel err vs 120-node quadrature %.2e (<= 1e-6); ELU Monte-Carlo: %d/%d points beyond 3 SE, max |z| %.2f",
                worst, outside, total, worst_z)};
}

Outcome norm_preserving_roots() {
    struct Row {
        Activation act;
        double norm, expected;
    };
    const std::vector<Row> rows{{Activation::gelu(), 0.5, 1.59}, {Activation::gelu(), 1.0, 1.47},
                                {Activation::gelu(), 5.0, 1.42}, {Activation::elu(), 0.5, 1.17},
                                {Activation::elu(), 1.0, 1.26},  {Activation::elu(), 5.0, 1.40}};
    bool ok = true;
    std::string d;
    for (const auto& r : rows) {
        const double s = sigma_star(r.act, r.norm);
        const bool hit = std::abs(s - r.expected) <= 0.01;
        ok &= hit;
        d += fmt("%s(%.1f)=%.4f vs %.2f%s; ", to_string(r.act).c_str(), r.norm, s, r.expected, hit ? "" : " MISS");
    }
    const double relu = sigma_star(Activation::relu(), 1.0);
    ok &= std::abs(relu - std::sqrt(2.0)) <= 1e-8;
    d += fmt("relu=%.10f", relu);
    return {ok ? Status::Pass : Status::Fail, d};
}

Outcome eigenvalues_vs_finite_differences() {
    double worst1 = 0.0, worst3 = 0.0;
    const double sw2 = 1.5, h = 1e-5;
    for (const auto& act : {Activation::gelu(), Activation::elu(), Activation::lrelu(0.2)})
        for (double s : {0.5, 1.0, 2.0})
            for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
                const double s2 = s * s;
                const auto ev = eigenvalues(act, s2, s2, rho, sw2, 0.0);
                auto g3 = [&](double r) { return iterate_state(act, {s2, s2, r}, sw2, 0.0).rho; };
                auto g1 = [&](double v) { return iterate_state(act, {v, s2, rho}, sw2, 0.0).s1_sq; };
                const double fd3 = (g3(rho + h) - g3(rho - h)) / (2 * h);
                const double hs = h * s2;
                const double fd1 = (g1(s2 + hs) - g1(s2 - hs)) / (2 * hs);
                worst3 = std::max(worst3, std::abs(ev.lambda3 - fd3));
                worst1 = std::max(worst1, std::abs(ev.lambda1 - fd1));
            }
    const bool ok = worst1 <= 1e-4 && worst3 <= 1e-4;
    return {ok ? Status::Pass : Status::Fail,
            fmt("45 points: max |lambda1 - fd| %.2e, max |lambda3 - fd| %.2e (<= 1e-4)", worst1, worst3)};
}

Outcome fixed_point_dichotomy() {
    double lrelu_max = 0.0;
    for (double a : {0.0, 0.2})
        for (int j = 0; j <= 4096; ++j) {
            const double th = 0.01 + (std::numbers::pi - 0.01) * j / 4096;
            if (th <= 0.01) continue;
            lrelu_max = std::max(lrelu_max, lambda3_lrelu(a, th));
        }
    bool ok = lrelu_max < 1.0;
    std::string d = fmt("max lambda3_lrelu %.6f (< 1); ", lrelu_max);
    for (double norm : {0.5, 1.0, 5.0}) {
        const double se = sigma_star(Activation::elu(), norm), sg = sigma_star(Activation::gelu(), norm);
        double me = 0.0, mg = 0.0;
        for (const auto& [th, v] : lambda3_sweep(Activation::elu(), norm, se, 512)) me = std::max(me, v);
        for (const auto& [th, v] : lambda3_sweep(Activation::gelu(), norm, sg, 512)) mg = std::max(mg, v);
        ok &= me > 1.0 && mg > 1.0;
        d += fmt("|x|=%.1f: max elu %.4f, gelu bound %.4f; ", norm, me, mg);
    }
    return {ok ? Status::Pass : Status::Fail, d};
}

Outcome finite_width_agreement() {
    std::vector<double> th;
    for (int j = 0; j < 32; ++j) th.push_back(std::numbers::pi * (j + 0.5) / 32);
    bool ok = true;
    std::string d;
    for (const auto& act : {Activation::gelu(), Activation::elu()}) {
        const double sig = sigma_star(act, 1.0), sw2 = sig * sig;
        const auto emp = empirical_normalized_kernels(act, th, 1.0, 3000, 4, sw2, 0.0, 0);
        int within = 0;
        double worst = 0.0;
        for (std::size_t t = 0; t < th.size(); ++t) {
            const auto ana = deep_normalized_kernel(act, th[t], 1.0, NetworkHyper::shared(4, sw2, 0.0));
            for (int l = 0; l < 4; ++l) {
                const double e = std::abs(emp(t, l) - ana[l]);
                within += e <= 0.02;
                worst = std::max(worst, e);
            }
        }
        const double frac = within / 128.0;
        ok &= frac >= 0.9;
        d += fmt("%s: %.1f%% of 128 points within 0.02 (max dev %.3f); ", to_string(act).c_str(), 100 * frac, worst);
    }
    return {ok ? Status::Pass : Status::Fail, d + "need >= 90%"};
}

double relu_posterior_spread(std::uint64_t seed, int n_train) {
    const Dataset tr = disc_task("sin", n_train, 0.1, seed);
    const int m = 100;
    Eigen::MatrixXd X(n_train + m, 2);
    X.topRows(n_train) = tr.X;
    for (int j = 0; j < m; ++j) {
        X(n_train + j, 0) = std::cos(2 * std::numbers::pi * j / m);
        X(n_train + j, 1) = std::sin(2 * std::numbers::pi * j / m);
    }
    const auto K = deep_kernel_matrix(Activation::relu(), X, NetworkHyper::shared(64, 2.0, 0.0));
    const auto f = fit(K.topLeftCorner(n_train, n_train), tr.y, 0.1);
    const Eigen::VectorXd mean = K.bottomLeftCorner(m, n_train) * f.alpha;
    return population_std(mean) / population_std(tr.y);
}

Outcome relu_degeneracy(bool* constancy_ok) {
    double worst = 1.0;
    const auto hyper = NetworkHyper::shared(64, 2.0, 0.0);
    for (int j = 0; j <= 200; ++j) {
        const double th = 0.1 + (std::numbers::pi - 0.2) * j / 200;
        worst = std::min(worst, deep_normalized_kernel(Activation::relu(), th, 1.0, hyper).back());
    }
    const double ratio = relu_posterior_spread(0, 20);
    *constancy_ok = ratio <= 0.05;
    const bool ok = worst >= 0.98 && *constancy_ok;
    return {ok ? Status::Pass : Status::Fail,
            fmt("min rho^(64) %.5f (>= 0.98); posterior-mean std / target std %.4f (<= 0.05) on 20 training points",
                worst, ratio)};
}

Outcome ntk_consistency() {
    double worst = 0.0;
    for (const auto& act : {Activation::relu(), Activation::gelu(), Activation::elu()}) {
        const double sig = sigma_star(act, 1.0), sw2 = sig * sig, s2 = sw2;
        for (double rho : {-0.5, 0.0, 0.5, 0.9}) {
            const double k = rho * s2, T = 0.7, h = 1e-6;
            auto step = [&](double kk, double TT) { return ntk_iterate(act, {s2, s2, kk, TT}, sw2, 0.0); };
            const double dh3 = (step(k + h, T).k - step(k - h, T).k) / (2 * h);
            const double dh4 = (step(k, T + h).T - step(k, T - h).T) / (2 * h);
            const double l3 = eigenvalues(act, s2, s2, rho, sw2, 0.0).lambda3;
            worst = std::max({worst, std::abs(dh3 - l3), std::abs(dh4 - l3)});
        }
    }
    return {worst <= 1e-4 ? Status::Pass : Status::Fail,
            fmt("12 points: max |d h / d (k, T) - lambda3| %.2e (<= 1e-4)", worst)};
}

Outcome relu_gradients() {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.5, 2.5);
    const double x1[3] = {0.5, -1.0, 0.3}, x2[3] = {0.8, 0.4, -0.6};
    double worst = 0.0;
    for (int L = 1; L <= 3; ++L) {
        NetworkHyper h{L, {}, {}};
        for (int l = 0; l <= L; ++l) {
            h.sigma_w2.push_back(u(gen));
            h.sigma_b2.push_back(0.1 * u(gen));
        }
        const auto g = kernel_grad_relu(Activation::relu(), h, x1, x2);
        const auto f = kernel_grad_fd(Activation::relu(), h, x1, x2);
        for (int l = 0; l <= L; ++l) {
            worst = std::max(worst, std::abs(g.d_sigma_w2[l] - f.d_sigma_w2[l]) / std::abs(g.d_sigma_w2[l]));
            worst = std::max(worst, std::abs(g.d_sigma_b2[l] - f.d_sigma_b2[l]) / std::abs(g.d_sigma_b2[l]));
        }
    }
    return {worst <= 1e-5 ? Status::Pass : Status::Fail, fmt("depths 1-3: max rel err %.2e (<= 1e-5)", worst)};
}

Outcome gp_engine(bool constancy_ok) {
    double worst = 0.0;
    for (int n : {5, 10, 20, 35, 50}) {
        std::mt19937_64 gen(n);
        std::normal_distribution<double> nd;
        Eigen::MatrixXd X(n + 20, 3);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = nd(gen);
        const auto Kall = deep_kernel_matrix(Activation::gelu(), X, NetworkHyper::shared(3, 1.6, 0.2));
        const Eigen::MatrixXd K = Kall.topLeftCorner(n, n), Ks = Kall.bottomLeftCorner(20, n);
        const Eigen::VectorXd kss = Kall.bottomRightCorner(20, 20).diagonal();
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = nd(gen);
        const auto f = fit(K, y, 0.1);
        const auto p = predict(f, Ks, kss);
        Eigen::MatrixXd A = K;
        A.diagonal().array() += 0.1;
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        const Eigen::MatrixXd Ai = lu.inverse();
        const Eigen::VectorXd m = Ks * Ai * y;
        const Eigen::VectorXd v = kss - (Ks * Ai * Ks.transpose()).diagonal();
        const double l = 0.5 * y.dot(Ai * y) + 0.5 * std::log(lu.determinant()) + 0.5 * n * std::log(kTwoPi);
        worst = std::max({worst, (p.mean - m).lpNorm<Eigen::Infinity>(), (p.var - v).lpNorm<Eigen::Infinity>(),
                          std::abs(nll(f, y) - l)});
    }
    const bool ok = worst <= 1e-9 && constancy_ok;
    return {ok ? Status::Pass : Status::Fail,
            fmt("N <= 50: max |factorized - dense| %.2e (<= 1e-9); constancy check from criterion 6 %s", worst,
                constancy_ok ? "passes" : "fails")};
}

Outcome depth_sweep() {
    SweepOptions opt;
    opt.reps = 10;
    const auto gelu = disc_depth_sweep(Activation::gelu(), std::pow(sigma_star(Activation::gelu(), 1.0), 2), 100, opt);
    const auto relu = disc_depth_sweep(Activation::relu(), 2.0, 100, opt);
    double g4 = 0.0, g64 = 0.0, r64 = 0.0, cm = 0.0;
    for (const auto& r : gelu) {
        if (r.depth == 4) g4 += r.train_mse / opt.reps;
        if (r.depth == 64) g64 += r.train_mse / opt.reps;
    }
    for (const auto& r : relu)
        if (r.depth == 64) {
            r64 += r.test_mse / opt.reps;
            cm += r.const_mse / opt.reps;
        }
    const bool gelu_ok = g64 < g4;
    const bool relu_ok = std::abs(r64 - cm) <= 0.1 * cm;
    std::string d = fmt("GELU train MSE L=64 %.4f vs L=4 %.4f; ReLU test MSE L=64 %.4f vs constant %.4f (within 10%%: %s)",
                        g64, g4, r64, cm, relu_ok ? "yes" : "no");
    bool ok = gelu_ok && relu_ok;
    if (const char* yacht = std::getenv("NNK_YACHT")) {
        Dataset ds = standardize(load_csv(yacht, "-1"));
        std::vector<int> depths;
        for (int l = 1; l <= 32; ++l) depths.push_back(l);
        std::vector<double> ws;
        for (int i = 1; i <= 50; ++i) ws.push_back(0.1 * i);
        const auto res = grid_search(ds, Activation::relu(), depths, ws, 0.1, Metric::TestRmse);
        const double best = res.ranked.front().test_rmse;
        ok &= best <= 0.9;
        d += fmt("; Yacht ReLU best test RMSE %.3f (<= 0.9)", best);
    } else {
        d += "; Yacht part skipped (set NNK_YACHT to a local CSV)";
    }
    return {ok ? Status::Pass : Status::Fail, d};
}

}  // namespace

int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
    bool constancy_ok = false;
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"closed-form kernels vs quadrature and Monte-Carlo", closed_form_vs_oracle},
        {"norm-preserving roots", norm_preserving_roots},
        {"Jacobian eigenvalues vs finite differences", eigenvalues_vs_finite_differences},
        {"fixed-point dichotomy", fixed_point_dichotomy},
        {"finite-width agreement", finite_width_agreement},
        {"ReLU degeneracy", [&] { return relu_degeneracy(&constancy_ok); }},
        {"NTK fixed-point consistency", ntk_consistency},
        {"ReLU hyperparameter gradients", relu_gradients},
        {"GP engine correctness", [&] { return gp_engine(constancy_ok); }},
        {"disc-task depth sweep", depth_sweep},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
        failed += o.status == Status::Fail;
        std::printf("%s [%zu] %s: %s (%.1fs)\n", tag, i + 1, criteria[i].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return strict && failed ? 1 : 0;
}
