#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "horo/solver.hpp"
#include "instances.hpp"
#include "test_support.hpp"

using namespace horo;
using testing_support::random_even_function;

namespace {

struct Triple {
    int n, k;
    double p, gamma;
};

// Admissible (n, k, p, gamma) combinations used throughout.
const Triple kTriples[] = {{2, 1, -2.0, 1.0}, {2, 1, 0.0, 0.25}, {2, 0, 2.0, 1.0 / 16},
                           {2, 1, 2.0, 1.0 / 9}, {1, 0, -7.0, 1.0}, {1, 0, 0.0, 1.0}};

GridPtr grid_for(int n) { return n == 1 ? SphereGrid::circle(32) : SphereGrid::sphere(12, 24); }

ScalarField even_sample(const GridPtr& g, const std::function<double(const Eigen::VectorXd&)>& fn) {
    return even_project(ScalarField::sample(g, fn));
}

// Exact Laplacian of a smooth even test function: exp(a.z) on S^2, cos 2t + 0.3 sin 4t on S^1.
struct TestFunction {
    std::function<double(const Eigen::VectorXd&)> value, laplacian;
};

TestFunction test_function(int n) {
    if (n == 1) {
        return {[](const Eigen::VectorXd& z) {
                    const double t = instances::angle(z);
                    return std::cos(2 * t) + 0.3 * std::sin(4 * t);
                },
                [](const Eigen::VectorXd& z) {
                    const double t = instances::angle(z);
                    return -4 * std::cos(2 * t) - 4.8 * std::sin(4 * t);
                }};
    }
    const Eigen::Vector3d a(0.4, -0.3, 0.5);
    return {[a](const Eigen::VectorXd& z) { return std::cosh(a.dot(z.head<3>())); },
            [a](const Eigen::VectorXd& z) {
                // Delta e^{a.z} = (|a|^2 - (a.z)^2 - 2 a.z) e^{a.z}, even part
                const double az = a.dot(z.head<3>());
                const double ep = (a.squaredNorm() - az * az - 2 * az) * std::exp(az);
                const double em = (a.squaredNorm() - az * az + 2 * az) * std::exp(-az);
                return 0.5 * (ep + em);
            }};
}

}  // namespace

TEST(Residual, ConstantExamples) {
    for (const auto& tr : kTriples) {
        for (auto flavor : {Flavor::ChristoffelMinkowski, Flavor::WeingartenQuotient}) {
            const ProblemSpec spec{tr.n, tr.k, tr.p, flavor};
            const auto g = grid_for(tr.n);
            const auto f = ScalarField::constant(g, tr.gamma);
            const double c0 = constant_seed(spec, tr.gamma);
            EXPECT_LT(residual(ScalarField::constant(g, c0), f, spec).values().cwiseAbs().maxCoeff(), 1e-12);
            const double c = c0 * 1.1;
            const double expect = 0.5 * (c - 1 / c) - std::pow(c, spec.q()) * std::pow(tr.gamma, 1.0 / spec.degree());
            const auto r = residual(ScalarField::constant(g, c), f, spec);
            EXPECT_LT((r.values().array() - expect).abs().maxCoeff(), 1e-12);
        }
    }
}

TEST(Residual, ConeViolationPropagates) {
    const auto g = grid_for(2);
    const ProblemSpec spec{2, 0, 0.0, Flavor::WeingartenQuotient};
    const auto phi = even_sample(g, [](const Eigen::VectorXd& z) { return 1.05 + 0.2 * z(2) * z(2); });
    EXPECT_THROW(residual(phi, ScalarField::constant(g, 1.0), spec), EllipticityLoss);
}

TEST(Linearize, ConstantsMatchClosedForm) {
    for (const auto& tr : kTriples) {
        for (auto flavor : {Flavor::ChristoffelMinkowski, Flavor::WeingartenQuotient}) {
            const ProblemSpec spec{tr.n, tr.k, tr.p, flavor};
            const auto g = grid_for(tr.n);
            const double c0 = constant_seed(spec, tr.gamma);
            const double q = spec.q();
            const double kappa = (1 - q) / 2 + (1 + q) / (2 * c0 * c0);
            const auto lin = linearize(ScalarField::constant(g, c0), ScalarField::constant(g, tr.gamma), spec);

            // pointwise against the exact Laplacian of a smooth function
            const auto tf = test_function(tr.n);
            const auto eta = ScalarField::sample(g, tf.value);
            const Eigen::VectorXd applied = lin.apply(eta.values());
            for (std::size_t i = 0; i < g->size(); ++i) {
                const double expect = tf.laplacian(g->node(i)) / tr.n + kappa * eta[i];
                EXPECT_NEAR(applied(static_cast<Eigen::Index>(i)), expect, 1e-8);
            }

            // assembled matrix against a Laplacian built column by column from the differentiation routine
            const Eigen::MatrixXd mat = lin.full_matrix();
            const auto nn = static_cast<Eigen::Index>(g->size());
            Eigen::MatrixXd ref(nn, nn);
            for (Eigen::Index j = 0; j < nn; ++j) {
                const auto lap = laplace(ScalarField(g, Eigen::VectorXd::Unit(nn, j)));
                ref.col(j) = lap.values() / tr.n;
                ref(j, j) += kappa;
            }
            const double opnorm = (mat - ref).cwiseAbs().rowwise().sum().maxCoeff();
            const double scale = ref.cwiseAbs().rowwise().sum().maxCoeff();
            EXPECT_LT(opnorm / scale, 1e-8);

            // constants are eigenfunctions with eigenvalue kappa
            const Eigen::VectorXd ones = lin.apply(Eigen::VectorXd::Ones(nn));
            EXPECT_LT((ones.array() - kappa).abs().maxCoeff(), 1e-12);
            if (q >= -1) {
                EXPECT_LE(kappa, 1.0 + 1e-14);
            }
        }
    }
}

TEST(Linearize, MinusOneExampleEigenvalue) {
    const ProblemSpec spec{2, 1, -2.0};
    const auto g = grid_for(2);
    const double c0 = std::sqrt(3.0);
    const auto lin = linearize(ScalarField::constant(g, c0), ScalarField::constant(g, 1.0), spec);
    const Eigen::VectorXd v = lin.apply(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(g->size()), 1.0));
    EXPECT_NEAR(v(0), 0.5 * (1 + 1 / (c0 * c0)) - spec.q() * 0.5 * (1 - 1 / (c0 * c0)), 1e-12);
    EXPECT_NEAR(v(0), 1.0, 1e-12);
}

TEST(Newton, FixedPointAtExactConstant) {
    const ProblemSpec spec{2, 1, -2.0};
    const auto g = grid_for(2);
    const auto phi0 = ScalarField::constant(g, std::sqrt(3.0));
    const auto res = newton_solve(phi0, ScalarField::constant(g, 1.0), spec);
    EXPECT_LE(res.trace.iterations(), 1);
    EXPECT_LT((res.phi.values().array() - std::sqrt(3.0)).abs().maxCoeff(), 1e-14);
}

TEST(Newton, ReturnsToConstantFromPerturbation) {
    std::mt19937_64 rng(71);
    for (const auto& tr : kTriples) {
        for (auto flavor : {Flavor::ChristoffelMinkowski, Flavor::WeingartenQuotient}) {
            const ProblemSpec spec{tr.n, tr.k, tr.p, flavor};
            const auto g = grid_for(tr.n);
            const double c0 = constant_seed(spec, tr.gamma);
            const auto pert = random_even_function(rng, tr.n, 1e-3);
            const auto phi0 = even_sample(g, [&](const Eigen::VectorXd& z) { return c0 * (1 + pert(z)); });
            const auto res = newton_solve(phi0, ScalarField::constant(g, tr.gamma), spec, {.tol = 1e-12});
            EXPECT_LT((res.phi.values().array() - c0).abs().maxCoeff(), 1e-10)
                << "n=" << tr.n << " k=" << tr.k << " p=" << tr.p << " " << to_string(flavor);
        }
    }
}

TEST(Newton, ErrorsCarryNodeAndValue) {
    const auto g = grid_for(2);
    const ProblemSpec spec{2, 1, -2.0};
    const auto f = ScalarField::constant(g, 1.0);
    try {
        newton_solve(ScalarField::constant(g, 1.0 + 1e-9), f, spec);
        FAIL() << "expected BarrierViolation";
    } catch (const BarrierViolation& e) {
        EXPECT_NE(e.node(), kNoNode);
        EXPECT_NEAR(e.value(), 1.0 + 1e-9, 1e-15);
    }
    // q = 3: iterates below sqrt(2) are outside the admissible region
    EXPECT_THROW(newton_solve(ScalarField::constant(g, 1.3), ScalarField::constant(g, 1.0 / 9), {2, 1, 2.0}),
                 BarrierViolation);
    const auto wq = ProblemSpec{2, 0, 0.0, Flavor::WeingartenQuotient};
    const auto bad = even_sample(g, [](const Eigen::VectorXd& z) { return 1.05 + 0.2 * z(2) * z(2); });
    EXPECT_THROW(newton_solve(bad, f, wq), IterateEllipticityLoss);
    std::mt19937_64 rng(72);
    const auto pert = random_even_function(rng, 2, 0.05);
    const auto far = even_sample(g, [&](const Eigen::VectorXd& z) { return std::sqrt(3.0) * (1 + pert(z)); });
    EXPECT_THROW(newton_solve(far, f, spec, {.tol = 1e-12, .max_iter = 1}), MaxIterationsExceeded);
}

TEST(Homotopy, EndpointsAndBounds) {
    const auto g = grid_for(2);
    const auto f = instances::sphere_field(g);
    for (const ProblemSpec& spec : {ProblemSpec{2, 1, -2.0}, ProblemSpec{2, 1, -1.5}, ProblemSpec{2, 1, 0.0}}) {
        const auto f0 = homotopy_f(f, spec, 0.0);
        EXPECT_EQ(f0.min(), f.max());
        EXPECT_EQ(f0.max(), f.max());
        EXPECT_EQ(homotopy_f(f, spec, 1.0).values(), f.values());
        for (double t : {0.1, 0.25, 0.5, 0.9}) {
            const auto ft = homotopy_f(f, spec, t);
            EXPECT_EQ(ft.parity(), Parity::Even);
            for (std::size_t i = 0; i < g->size(); ++i) {
                EXPECT_LE(ft[i], f.max() * (1 + 1e-14));
                EXPECT_GE(ft[i], f.min() * (1 - 1e-14));
                if (spec.q() < 0) {
                    const double e = -1.0 / spec.degree();
                    EXPECT_GE(std::pow(ft[i], e), std::pow(f.max(), e) * (1 - 1e-14));
                }
            }
        }
    }
    EXPECT_THROW(homotopy_f(f, {2, 1, 0.0}, 1.5), InvalidArgument);
}

TEST(Continuation, BarrierRejectedBeforeSolve) {
    const auto g = grid_for(2);
    const ProblemSpec spec{2, 1, 2.0};
    try {
        continuation_solve(ScalarField::constant(g, 1.0 / 7), spec);
        FAIL() << "expected AssumptionFailure";
    } catch (const AssumptionFailure& e) {
        EXPECT_EQ(e.report().case_id, "barrier");
        EXPECT_NEAR(e.report().thresholds.at(0).second, 0.125, 1e-15);
    }
    const auto ok = continuation_solve(ScalarField::constant(g, 1.0 / 9), spec, {.tol = 1e-8});
    EXPECT_TRUE(ok.report.converged);
    EXPECT_NEAR(ok.phi.max(), std::sqrt(3.0), 1e-10);
}

TEST(Continuation, ConstantsRecovered) {
    for (const auto& tr : kTriples) {
        for (auto flavor : {Flavor::ChristoffelMinkowski, Flavor::WeingartenQuotient}) {
            const ProblemSpec spec{tr.n, tr.k, tr.p, flavor};
            const auto g = grid_for(tr.n);
            const auto res = continuation_solve(ScalarField::constant(g, tr.gamma), spec, {.tol = 1e-10});
            EXPECT_TRUE(res.report.converged);
            EXPECT_TRUE(res.report.verification.constant_recovered);
            EXPECT_LT((res.phi.values().array() - constant_seed(spec, tr.gamma)).abs().maxCoeff(), 1e-10);
            for (const auto& m : res.report.verification.minkowski) EXPECT_LT(m.residual, 1e-12);
        }
    }
}

TEST(Continuation, CircleInstanceAgainstCollocationOracle) {
    const auto g = SphereGrid::circle(64);
    const ProblemSpec spec{1, 0, -7.0};
    const auto f = instances::circle_field(g);
    const auto res = continuation_solve(f, spec, {.tol = 1e-10});
    ASSERT_TRUE(res.report.converged);
    EXPECT_LT(res.report.final_residual, 1e-10);
    EXPECT_GT(res.report.verification.margin, 0.0);

    const Eigen::VectorXd fine = instances::oracle::circle_solve(instances::circle_f, -7.0, 8 * 64);
    double worst = 0.0;
    for (int j = 0; j < 64; ++j) worst = std::max(worst, std::abs(res.phi[static_cast<std::size_t>(j)] - fine(8 * j)));
    EXPECT_LT(worst, 1e-7);
    EXPECT_TRUE(res.report.verification.apriori.passed());
    EXPECT_LT(res.report.verification.minkowski.at(0).residual, 1e-6);
}

TEST(Continuation, SphereChristoffelMinkowskiInstance) {
    const auto g = SphereGrid::sphere(16, 32);
    const ProblemSpec spec{2, 1, 0.0};
    const auto f = instances::sphere_field(g);
    ASSERT_TRUE(check_assumption_convexity(f, 2, 1, 0.0).passed());
    const auto res = continuation_solve(f, spec, {.tol = 1e-8});
    ASSERT_TRUE(res.report.converged);
    const auto& v = res.report.verification;
    EXPECT_GT(v.margin, 0.0);
    ASSERT_TRUE(v.deformation_min.has_value());
    EXPECT_GE(*v.deformation_min, -1e-10);
    EXPECT_TRUE(v.apriori.passed());
    for (const auto& m : v.minkowski) EXPECT_LT(m.residual, 1e-6);
    EXPECT_LT(v.embedding_defect, 1e-10);
    EXPECT_LT(v.weingarten_defect, 1e-8);
    EXPECT_FALSE(v.constant_recovered);
    for (const auto& s : res.report.assumptions) {
        EXPECT_NE(s.convexity, "fail");
        EXPECT_NE(s.barrier, "fail");
    }

    // quadratic tail: rerun Newton from a perturbed start and inspect the last contraction
    std::mt19937_64 rng(73);
    const auto pert = random_even_function(rng, 2, 0.01);
    const auto start = ScalarField(g, (res.phi.values().array() *
                                       ScalarField::sample(g, [&](const Eigen::VectorXd& z) { return 1 + pert(z); })
                                           .values()
                                           .array())
                                          .matrix());
    const auto nr = newton_solve(start, f, spec, {.tol = 1e-12});
    const auto& rs = nr.trace.residuals;
    ASSERT_GE(rs.size(), 3u);
    EXPECT_LT(rs[rs.size() - 1] / rs[rs.size() - 2], 0.1);
}

TEST(Continuation, SphereWeingartenInstance) {
    const auto g = SphereGrid::sphere(16, 32);
    const ProblemSpec spec{2, 1, 0.0, Flavor::WeingartenQuotient};
    const auto res = continuation_solve(instances::sphere_field(g), spec, {.tol = 1e-8});
    ASSERT_TRUE(res.report.converged);
    ASSERT_TRUE(res.report.verification.maclaurin_slack.has_value());
    EXPECT_GE(*res.report.verification.maclaurin_slack, -1e-8);
    EXPECT_GT(res.report.verification.margin, 0.0);
}

// ---- properties ----

TEST(SolverProperties, LinearizationMatchesFiniteDifferences) {
    std::mt19937_64 rng(74);
    for (const auto& tr : kTriples) {
        for (auto flavor : {Flavor::ChristoffelMinkowski, Flavor::WeingartenQuotient}) {
            const ProblemSpec spec{tr.n, tr.k, tr.p, flavor};
            const auto g = grid_for(tr.n);
            const double c0 = constant_seed(spec, tr.gamma);
            const auto pphi = random_even_function(rng, tr.n, 0.03 * (1 - 1 / (c0 * c0)));
            const auto pf = random_even_function(rng, tr.n, 0.05);
            const auto phi = even_sample(g, [&](const Eigen::VectorXd& z) { return c0 * (1 + pphi(z)); });
            const auto f = even_sample(g, [&](const Eigen::VectorXd& z) { return tr.gamma * (1 + pf(z)); });
            const auto lin = linearize(phi, f, spec);
            const double eps = 1e-6 * phi.values().cwiseAbs().maxCoeff();
            const Eigen::MatrixXd even = lin.even_matrix();
            for (int trial = 0; trial < 20; ++trial) {
                const auto dir = random_even_function(rng, tr.n, 1.0);
                const auto eta = even_sample(g, [&](const Eigen::VectorXd& z) { return 0.3 + dir(z); });
                const auto rp = residual(ScalarField(g, phi.values() + eps * eta.values()), f, spec);
                const auto rm = residual(ScalarField(g, phi.values() - eps * eta.values()), f, spec);
                const Eigen::VectorXd fd = (rp.values() - rm.values()) / (2 * eps);
                const Eigen::VectorXd an = lin.apply(eta.values());
                EXPECT_LT((fd - an).cwiseAbs().maxCoeff() / an.cwiseAbs().maxCoeff(), 1e-6);
                // the even matrix acts like the operator on even fields
                const Eigen::VectorXd via_matrix = even * g->restrict_even(eta.values());
                EXPECT_LT((via_matrix - g->restrict_even(an)).cwiseAbs().maxCoeff(), 1e-8 * an.cwiseAbs().maxCoeff());
            }
        }
    }
}

TEST(SolverProperties, HomotopyPreservesAssumptionVerdicts) {
    std::mt19937_64 rng(75);
    const auto g = grid_for(2);
    for (double p : {-2.0, -1.7, -1.2, -0.5, 0.0, 1.0}) {
        const ProblemSpec spec{2, 1, p};
        for (int trial = 0; trial < 3; ++trial) {
            const auto pf = random_even_function(rng, 2, 0.02);
            const double base = std::isfinite(barrier_threshold(spec)) ? 0.5 * barrier_threshold(spec) : 0.7;
            const auto f = even_sample(g, [&](const Eigen::VectorXd& z) { return base * (1 + pf(z)); });
            const bool conv = check_assumption_convexity(f, 2, 1, p).passed();
            const bool bar = check_barrier(f, 2, 1, p).passed();
            if (!conv || !bar) continue;
            for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
                const auto ft = homotopy_f(f, spec, t);
                EXPECT_TRUE(check_assumption_convexity(ft, 2, 1, p).passed()) << "p=" << p << " t=" << t;
                EXPECT_TRUE(check_barrier(ft, 2, 1, p).passed());
            }
        }
    }
}

TEST(SolverProperties, SeededConstantCoefficientBound) {
    std::mt19937_64 rng(76);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 1 + trial % 3;
        const int k = static_cast<int>(u(rng) * n);
        const double p_min = n == 1 ? -1.0 : -static_cast<double>(n);
        const double p = p_min + 6 * u(rng);
        const ProblemSpec spec{n, k, p};
        if (spec.q() < -1) continue;
        const double thr = barrier_threshold(spec);
        const double gamma = std::isfinite(thr) ? thr * (0.01 + 0.98 * u(rng)) : std::pow(10.0, 4 * u(rng) - 2);
        const double c0 = constant_seed(spec, gamma);
        const double q = spec.q();
        EXPECT_LE((1 - q) / 2 + (1 + q) / (2 * c0 * c0), 1.0 + 1e-12);
    }
}
