#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "horo/xi.hpp"

using namespace horo;

TEST(Xi, Examples) {
    EXPECT_NEAR(xi_eval(0.0, 2.0).value, 4.0 / 3.0, 1e-15);
    EXPECT_FALSE(xi_eval(0.0, 2.0).has_critical);
    const auto info = xi_eval(3.0, 1.5);
    EXPECT_TRUE(info.has_critical);
    EXPECT_NEAR(info.critical_point, std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(info.critical_value, 8.0, 1e-13);
    EXPECT_NEAR(xi(3.0, std::sqrt(2.0)), 8.0, 1e-13);
    EXPECT_NEAR(xi_eval(-1.0, std::sqrt(3.0)).value, 1.0, 1e-15);
    EXPECT_THROW(xi_eval(0.0, 1.0), InvalidArgument);
    EXPECT_THROW(xi_eval(0.0, 0.5), InvalidArgument);
}

TEST(ConstantSeed, Examples) {
    EXPECT_NEAR(constant_seed({2, 1, -2.0, Flavor::ChristoffelMinkowski}, 1.0), std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(constant_seed({2, 0, 2.0, Flavor::ChristoffelMinkowski}, 1.0 / 16), std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(constant_seed({2, 1, 2.0, Flavor::WeingartenQuotient}, 1.0 / 9), std::sqrt(3.0), 1e-14);
}

TEST(ConstantSeed, BarrierViolations) {
    const ProblemSpec q3{2, 1, 2.0, Flavor::ChristoffelMinkowski};
    try {
        constant_seed(q3, 1.0 / 7);
        FAIL() << "expected NoAdmissibleRoot";
    } catch (const NoAdmissibleRoot& e) {
        EXPECT_NEAR(e.target(), 7.0, 1e-14);
        EXPECT_NEAR(e.threshold(), 8.0, 1e-13);
    }
    EXPECT_THROW(constant_seed({2, 0, 2.0, Flavor::ChristoffelMinkowski}, 0.3), NoAdmissibleRoot);
    EXPECT_THROW(constant_seed({2, 1, 0.0, Flavor::ChristoffelMinkowski}, 1.0), NoAdmissibleRoot);
    EXPECT_THROW(constant_seed({2, 1, 0.0, Flavor::ChristoffelMinkowski}, 0.0), InvalidArgument);
    EXPECT_THROW(constant_seed({2, 1, -3.0, Flavor::ChristoffelMinkowski}, 1.0), InvalidArgument);
}

TEST(BarrierThreshold, Values) {
    EXPECT_NEAR(barrier_threshold({2, 0, 2.0, Flavor::ChristoffelMinkowski}), 0.25, 1e-15);
    EXPECT_NEAR(barrier_threshold({2, 1, 2.0, Flavor::ChristoffelMinkowski}), 0.125, 1e-15);
    EXPECT_NEAR(barrier_threshold({2, 1, 0.0, Flavor::ChristoffelMinkowski}), 0.5, 1e-15);
    EXPECT_TRUE(std::isinf(barrier_threshold({2, 1, -1.0, Flavor::ChristoffelMinkowski})));
    EXPECT_TRUE(std::isinf(barrier_threshold({1, 0, 0.0, Flavor::ChristoffelMinkowski})));
}

// ---- properties ----

TEST(XiProperties, SeedSolvesConstantEquation) {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> ug(-3.0, 1.0);
    const ProblemSpec specs[] = {{2, 1, -2.0}, {2, 1, 0.0}, {2, 0, 2.0}, {2, 1, 2.0}, {1, 0, -7.0},
                                 {1, 0, 0.0},  {1, 0, -3.5}, {2, 0, -1.0}, {3, 1, 1.0}, {4, 2, 5.0}};
    for (const auto& spec : specs) {
        const double thr = barrier_threshold(spec);
        for (int trial = 0; trial < 200; ++trial) {
            double gamma = std::pow(10.0, ug(rng));
            if (std::isfinite(thr)) gamma = thr * std::pow(10.0, -std::abs(ug(rng)) - 1e-3);
            const double c = constant_seed(spec, gamma);
            ASSERT_GT(c, 1.0);
            const double lhs = 0.5 * (c - 1 / c);
            const double rhs = std::pow(c, spec.q()) * std::pow(gamma, 1.0 / spec.degree());
            EXPECT_LT(std::abs(lhs - rhs) / std::max(lhs, 1e-300), 1e-12);
            if (spec.q() > 1.0) {
                EXPECT_GT(c, xi_critical_point(spec.q()));
            }
        }
    }
}

TEST(XiProperties, CubicBranchSelectionAgainstFactorization) {
    // n=2, k=1, p=2: (c - 1/c)/2 = c^3 gamma  <=>  2 gamma c^4 - c^2 + 1 = 0 in c^2.
    const ProblemSpec spec{2, 1, 2.0, Flavor::ChristoffelMinkowski};
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> u(1e-6, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        const double gamma = 0.125 * u(rng) * (1 - 1e-9);
        const double disc = std::sqrt(1 - 8 * gamma);
        // roots of 2 gamma x^2 - x + 1 in x = c^2, stable forms
        const double x_big = (1 + disc) / (4 * gamma);
        const double x_small = 2 / (1 + disc);
        ASSERT_NEAR(2 * gamma * x_small * x_small - x_small + 1, 0.0, 1e-12);
        ASSERT_NEAR(x_big * x_small, 1 / (2 * gamma), 1e-9 / gamma);
        const double c = constant_seed(spec, gamma);
        ASSERT_LT(std::abs(c * c - x_big) / x_big, 1e-11) << "gamma " << gamma;
        ASSERT_GT(std::abs(c * c - x_small), 1e-6);
    }
    EXPECT_NEAR(constant_seed(spec, 1.0 / 9), std::sqrt(3.0), 1e-14);
}

TEST(XiProperties, MonotoneBranches) {
    for (double q : {-7.0, -1.0, -0.5, 0.0, 0.5, 1.0}) {
        double prev = xi(q, 1.0001);
        for (double t = 1.01; t < 50; t *= 1.1) {
            const double v = xi(q, t);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
    for (double q : {1.5, 3.0, 7.0}) {
        const double ts = xi_critical_point(q);
        const double cv = xi_critical_value(q);
        for (double t = 1.01; t < 50; t *= 1.07) EXPECT_GE(xi(q, t), cv * (1 - 1e-13));
        EXPECT_GT(xi(q, ts * 0.99), cv);
        EXPECT_GT(xi(q, ts * 1.01), cv);
    }
}

TEST(XiProperties, InverseBranchesRoundTrip) {
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> ut(0.001, 3.0);
    for (double q : {-7.0, -1.0, 0.0, 0.7, 1.0, 2.0, 3.0}) {
        for (int trial = 0; trial < 100; ++trial) {
            const double t = 1.0 + ut(rng);
            const double v = xi(q, t);
            if (q > 1.0) {
                const double ts = xi_critical_point(q);
                if (std::abs(t - ts) < 1e-3) continue;
                const double r = t < ts ? xi_inverse_decreasing(q, v) : xi_inverse_increasing(q, v);
                EXPECT_NEAR(r, t, 1e-10 * t);
            } else {
                EXPECT_NEAR(xi_inverse_decreasing(q, v), t, 1e-10 * t);
            }
        }
    }
}
