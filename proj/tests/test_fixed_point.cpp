#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include <nnk/fixed_point.hpp>

#include "oracles.hpp"

using namespace nnk;

namespace {

std::vector<Activation> smooth_and_kinked() {
    return {Activation::gelu(), Activation::elu(), Activation::lrelu(0.2), Activation::relu(), Activation::erf()};
}

double g3(const Activation& act, double s_sq, double rho, double sw2) {
    return iterate_state(act, {s_sq, s_sq, rho}, sw2, 0.0).rho;
}

}  // namespace

TEST(Eigenvalues, ReluRightAngle) {
    const auto t = eigenvalues(Activation::relu(), 1, 1, std::cos(M_PI / 2), 2.0, 0.0);
    EXPECT_NEAR(t.lambda3, 0.5, 1e-10);
    EXPECT_EQ(t.lambda1, t.lambda2);
}

TEST(Eigenvalues, LeakyReluNearUnitCorrelationTendsToOne) {
    const auto act = Activation::lrelu(0.2);
    const double sig = sigma_star(act, 1.0);
    double prev = 0.0;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
        const double l3 = eigenvalues(act, 1.3, 1.3, 1.0 - eps, sig * sig, 0.0).lambda3;
        EXPECT_GT(l3, prev);
        prev = l3;
    }
    EXPECT_NEAR(prev, 1.0, 1e-3);
    EXPECT_NEAR(eigenvalues(act, 1.3, 1.3, 1.0, sig * sig, 0.0).lambda3, 1.0, 1e-10);
}

TEST(Eigenvalues, GeluGoldenAndLowerBound) {
    const double sw2 = 1.47 * 1.47;
    EXPECT_NEAR(eigenvalues(Activation::gelu(), 1, 1, 0, sw2, 0).lambda3, 0.587928903518344, 1e-9);
    EXPECT_GT(eigenvalues(Activation::gelu(), 1, 1, 0, sw2, 0).lambda3, lambda3_gelu_lower(1.0, 1.47, M_PI / 2));
    // At the norm fixed point the lower bound is evaluated at the same state.
    const double sig = sigma_star(Activation::gelu(), 1.0);
    for (double th : {0.2, 0.8, M_PI / 2}) {
        const double q = eigenvalues(Activation::gelu(), sig * sig, sig * sig, std::cos(th), sig * sig, 0).lambda3;
        EXPECT_GE(q, lambda3_gelu_lower(1.0, sig, th) - 1e-9) << th;
    }
}

TEST(Eigenvalues, RejectsBadState) {
    EXPECT_THROW(eigenvalues(Activation::gelu(), 0.0, 1.0, 0.0, 1.0, 0.0), DomainError);
    EXPECT_THROW(eigenvalues(Activation::gelu(), 1.0, 1.0, 1.2, 1.0, 0.0), DomainError);
}

TEST(Eigenvalues, Lambda3MatchesFiniteDifferenceOfMap) {
    const double h = 1e-5;
    for (const auto& act : smooth_and_kinked())
        for (double s : {0.5, 1.0, 2.0})
            for (double rho : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
                const double sw2 = 1.4, s2 = s * s;
                const double fd = (g3(act, s2, rho + h, sw2) - g3(act, s2, rho - h, sw2)) / (2 * h);
                EXPECT_NEAR(eigenvalues(act, s2, s2, rho, sw2, 0.0).lambda3, fd, 1e-4)
                    << to_string(act) << " s=" << s << " rho=" << rho;
            }
}

TEST(Eigenvalues, Lambda1MatchesFiniteDifferenceOfMap) {
    for (const auto& act : smooth_and_kinked())
        for (double s : {0.5, 1.0, 2.0}) {
            const double sw2 = 1.4, s2 = s * s, h = 1e-5 * s2;
            auto g1 = [&](double v) { return iterate_state(act, {v, 1.0, 0.0}, sw2, 0.3).s1_sq; };
            const double fd = (g1(s2 + h) - g1(s2 - h)) / (2 * h);
            EXPECT_NEAR(eigenvalues(act, s2, 1.0, 0.0, sw2, 0.3).lambda1, fd, 1e-4) << to_string(act) << " s=" << s;
        }
}

TEST(Eigenvalues, LeakyReluScaleInvariance) {
    for (double a : {0.0, 0.2, 0.5}) {
        const auto act = Activation::lrelu(a);
        const double sw2 = 2.0 / (1.0 + a * a);
        for (double th : {0.3, 1.2, 2.5}) {
            const double ref = eigenvalues(act, 1.0, 1.0, std::cos(th), sw2, 0.0).lambda3;
            for (double s : {0.5, 5.0})
                EXPECT_NEAR(eigenvalues(act, s * s, s * s, std::cos(th), sw2, 0.0).lambda3, ref, 1e-8);
            EXPECT_NEAR(ref, lambda3_lrelu(a, th), 1e-8);
        }
    }
}

TEST(Lambda3Lrelu, Examples) {
    EXPECT_NEAR(lambda3_lrelu(0.0, M_PI / 2), 0.5, 1e-15);
    EXPECT_NEAR(lambda3_lrelu(0.2, M_PI / 2), 0.36 / 0.52, 1e-15);
    for (double a : {0.0, 0.1, 0.2, 0.5, 0.9}) EXPECT_NEAR(lambda3_lrelu(a, 0.0), 1.0, 1e-15);
    EXPECT_THROW(lambda3_lrelu(1.0, 0.3), DomainError);
}

TEST(Lambda3Lrelu, BelowOneAwayFromZero) {
    for (double a : {0.0, 0.2, 0.5})
        for (int j = 0; j <= 1000; ++j) {
            const double th = 0.01 + (M_PI - 0.01) * j / 1000;
            EXPECT_LT(lambda3_lrelu(a, th), 1.0);
        }
}

TEST(Lambda3Lrelu, MatchesMonteCarlo) {
    const auto act = Activation::lrelu(0.2);
    const double th = 1.1, sw2 = 2.0 / 1.04;
    const auto mc = oracle::mc2([&](double u, double v) { return deriv(act, u) * deriv(act, v); }, std::cos(th),
                                2'000'000, 31);
    EXPECT_NEAR(lambda3_lrelu(0.2, th), sw2 * mc.mean, 3 * sw2 * mc.se);
}

TEST(Lambda3GeluLower, RightAngleAndExceedance) {
    for (double sig : {1.0, 1.47, 2.0}) EXPECT_NEAR(lambda3_gelu_lower(1.0, sig, M_PI / 2), sig * sig / 4, 1e-15);
    double mx = 0.0;
    for (const auto& [th, v] : lambda3_sweep(Activation::gelu(), 1.0, 1.47, 512)) mx = std::max(mx, v);
    EXPECT_GT(mx, 1.0);
    const double small = 0.05;
    const double b = lambda3_gelu_lower(5.0, 1.42, small);
    EXPECT_GT(b, 1.0);
    const double s2 = 1.42 * 1.42 * 25;
    EXPECT_GE(kernel_dot_quadrature(Activation::gelu(), {std::sqrt(s2), std::sqrt(s2), std::cos(small), 1.42 * 1.42}),
              b - 1e-9);
}

TEST(Lambda3GeluLower, BoundHoldsForNonNegativeCosine) {
    for (double norm : {0.5, 1.0, 5.0})
        for (double sig : {1.0, 1.4, 1.6})
            for (int j = 1; j <= 20; ++j) {
                const double th = M_PI / 2 * j / 20;
                const double s = sig * norm;
                const double q = kernel_dot_quadrature(Activation::gelu(), {s, s, std::cos(th), sig * sig}, 120);
                EXPECT_GE(q, lambda3_gelu_lower(norm, sig, th) - 1e-9) << norm << " " << sig << " " << th;
            }
}

TEST(Lambda3Elu, Examples) {
    double mx = 0.0;
    for (const auto& [th, v] : lambda3_sweep(Activation::elu(), 1.0, 1.26, 512)) mx = std::max(mx, v);
    EXPECT_GT(mx, 1.0);
    const double q = kernel_dot_quadrature(Activation::elu(), {1.26, 1.26, -1.0, 1.26 * 1.26}, 120);
    EXPECT_NEAR(lambda3_elu(1.0, 1.26, M_PI), q, 1e-6);
    EXPECT_NEAR(lambda3_elu(1e-9, 1.3, 1.0), 1.69, 1e-6);
    EXPECT_THROW(lambda3_elu(30.0, 1.0, 1.0), DomainError);
}

TEST(Lambda3Elu, MatchesQuadratureOnStandardGrid) {
    const double sig = 1.3;
    for (double s : {0.25, 0.5, 1.0, 2.0, 5.0})
        for (double th : {0.05, 0.5, 1.0, M_PI / 2, 2.5, M_PI - 0.05}) {
            const double q = kernel_dot_quadrature(Activation::elu(), {s, s, std::cos(th), sig * sig}, 120);
            EXPECT_NEAR(lambda3_elu(s / sig, sig, th), q, 1e-6 * std::max(1.0, q)) << s << " " << th;
        }
}

TEST(SigmaStar, ReluAndLeaky) {
    for (double n : {0.5, 1.0, 5.0}) EXPECT_NEAR(sigma_star(Activation::relu(), n), std::sqrt(2.0), 1e-8);
    const auto act = Activation::lrelu(0.2);
    const double s = sigma_star(act, 1.0);
    EXPECT_NEAR(kernel(act, {s, s, 1.0}), 1.0, 1e-12);
}

TEST(SigmaStar, GeluPublishedValues) {
    EXPECT_NEAR(sigma_star(Activation::gelu(), 0.5), 1.59, 0.01);
    EXPECT_NEAR(sigma_star(Activation::gelu(), 1.0), 1.47, 0.01);
    EXPECT_NEAR(sigma_star(Activation::gelu(), 5.0), 1.42, 0.01);
}

TEST(SigmaStar, EluRoots) {
    EXPECT_NEAR(sigma_star(Activation::elu(), 0.5), 1.17, 0.01);
    EXPECT_NEAR(sigma_star(Activation::elu(), 5.0), 1.40, 0.01);
    // Frozen from the root condition; cross-checked by direct integration below.
    EXPECT_NEAR(sigma_star(Activation::elu(), 1.0), 1.277960, 1e-6);
}

TEST(SigmaStar, RootConditionByDirectIntegration) {
    for (const auto& act : {Activation::gelu(), Activation::elu()})
        for (double n : {0.5, 1.0, 5.0}) {
            const double s = sigma_star(act, n) * n;
            const double e = oracle::gk([&](double z) {
                const double p = eval(act, s * z);
                return oracle::phi(z) * p * p;
            }, -12.0, 0.0) + oracle::gk([&](double z) {
                const double p = eval(act, s * z);
                return oracle::phi(z) * p * p;
            }, 0.0, 12.0);
            EXPECT_NEAR(e, n * n, 1e-6 * n * n) << to_string(act) << " " << n;
        }
}

TEST(SigmaStar, NoSignChange) {
    // erf saturates: E[erf^2] < 1 < 25 for every sigma.
    EXPECT_THROW(sigma_star(Activation::erf(), 5.0), NumericError);
    EXPECT_THROW(sigma_star(Activation::gelu(), 0.0), DomainError);
}

TEST(FindFixedPoint, LeakyReluContracts) {
    const auto act = Activation::lrelu(0.2);
    const double sig = sigma_star(act, 1.0);
    const auto rep = find_fixed_point(act, sig * sig, 0.0, {sig * sig, sig * sig, -0.9}, 1e-10, 50000, 256);
    EXPECT_TRUE(rep.converged);
    EXPECT_NEAR(rep.final_state.rho, 1.0, 1e-5);
    EXPECT_EQ(rep.verdict, Verdict::UniqueContraction);
    EXPECT_EQ(rep.per_step_ratio.size(), static_cast<std::size_t>(rep.iterations - 1));
    double mx = 0.0;
    for (const auto& [th, v] : lambda3_grid(act, sig * sig, sig * sig, sig * sig, 0.0, 256)) mx = std::max(mx, v);
    for (double r : rep.per_step_ratio) EXPECT_LE(r, mx + 1e-6);
}

TEST(FindFixedPoint, StartAtFixedPoint) {
    const auto rep = find_fixed_point(Activation::relu(), 2.0, 0.0, {1.0, 1.0, 1.0}, 1e-10, 100, 64);
    EXPECT_TRUE(rep.converged);
    EXPECT_EQ(rep.iterations, 1);
    EXPECT_TRUE(rep.per_step_ratio.empty());
    EXPECT_EQ(rep.final_state.rho, 1.0);
}

TEST(FindFixedPoint, GeluIsNotAContraction) {
    const double sig = sigma_star(Activation::gelu(), 1.0), sw2 = sig * sig;
    const auto rep = find_fixed_point(Activation::gelu(), sw2, 0.0, {sw2, sw2, 0.0}, 1e-10, 10000, 128);
    EXPECT_EQ(rep.verdict, Verdict::NotContraction);
    EXPECT_GT(rep.sup_lambda3, 1.0);
    EXPECT_EQ(rep.per_step_ratio.size(), static_cast<std::size_t>(std::max(rep.iterations - 1, 0)));
}

TEST(FindFixedPoint, RoundedGeluVarianceDivergesWithoutThrowing) {
    // sigma = 1.47 sits above the root 1.468..., so s^2 grows until the kernel overflows.
    const double sw2 = 1.47 * 1.47;
    FixedPointReport rep;
    ASSERT_NO_THROW(rep = find_fixed_point(Activation::gelu(), sw2, 0.0, {sw2, sw2, 0.0}, 1e-10, 10000, 64));
    EXPECT_FALSE(rep.converged);
    EXPECT_LT(rep.iterations, 10000);
    EXPECT_GT(rep.final_state.s1_sq, 1e100);
    EXPECT_EQ(rep.verdict, Verdict::NotContraction);
}

TEST(FindFixedPoint, NonConvergenceIsReported) {
    const auto rep = find_fixed_point(Activation::relu(), 2.0, 0.0, {1.0, 1.0, 0.0}, 1e-14, 5, 16);
    EXPECT_FALSE(rep.converged);
    EXPECT_EQ(rep.iterations, 5);
    EXPECT_EQ(rep.verdict, Verdict::Inconclusive);
    EXPECT_THROW(find_fixed_point(Activation::relu(), 2.0, 0.0, {1, 1, 0}, 0.0), DomainError);
}

TEST(Verdict, Names) {
    EXPECT_EQ(to_string(Verdict::UniqueContraction), "unique-contraction");
    EXPECT_EQ(to_string(Verdict::NotContraction), "not-contraction");
    EXPECT_EQ(to_string(Verdict::Inconclusive), "inconclusive");
}
