#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "horo/checks.hpp"
#include "horo/errors.hpp"
#include "horo/hconvex.hpp"
#include "horo/problem.hpp"
#include "horo/sphere.hpp"
#include "horo/symfunc.hpp"
#include "horo/xi.hpp"

namespace horo {

namespace detail {

inline void require_matching(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec) {
    if (phi.grid_ptr() != f.grid_ptr()) throw InvalidArgument("phi and f must share a grid");
    if (phi.grid().dim() != spec.n) {
        throw InvalidArgument("grid dimension " + std::to_string(phi.grid().dim()) + " does not match n = " +
                              std::to_string(spec.n));
    }
}

/// f^{1/(n-k)} per node.
inline Eigen::VectorXd f_root(const ScalarField& f, const ProblemSpec& spec) {
    return f.values().array().pow(1.0 / spec.degree()).matrix();
}

/// Curvature functional per node, raising EllipticityLoss tagged with the node.
inline FunctionalValue functional_at(const ProblemSpec& spec, const SymMatrix& a, std::size_t node) {
    try {
        return curvature_functional(spec, a);
    } catch (const EllipticityLoss& e) {
        throw EllipticityLoss(std::string(e.what()) + " at node " + std::to_string(node), e.margin(), node);
    }
}

}  // namespace detail

/// r = F(A[phi]) - phi^q f^{1/(n-k)}.
inline ScalarField residual(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec) {
    detail::require_matching(phi, f, spec);
    const auto a = a_tensor(phi);
    const Eigen::VectorXd fr = detail::f_root(f, spec);
    const double q = spec.q();
    Eigen::VectorXd r(static_cast<Eigen::Index>(phi.size()));
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        r(ii) = detail::functional_at(spec, a[i], i).value - std::pow(phi[i], q) * fr(ii);
    }
    return ScalarField(phi.grid_ptr(), std::move(r), Parity::General);
}

/// Derivative of the residual at phi, as operator coefficients and as a dense
/// matrix on the even subspace (rows and columns indexed by even representatives).
class LinearizedOperator {
public:
    LinearizedOperator(GridPtr grid, OperatorCoefficients coeffs)
        : grid_(std::move(grid)), coeffs_(std::move(coeffs)) {}

    const OperatorCoefficients& coefficients() const { return coeffs_; }
    const SphereGrid& grid() const { return *grid_; }

    /// L eta evaluated pointwise from the derivatives of eta.
    Eigen::VectorXd apply(const Eigen::VectorXd& eta) const {
        Eigen::MatrixXd g;
        FrameMatrices h;
        grid_->differentiate(eta, g, h);
        Eigen::VectorXd out(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const auto ui = static_cast<std::size_t>(i);
            out(i) = coeffs_.second[ui].mat().cwiseProduct(h[ui].mat()).sum() + coeffs_.first.row(i).dot(g.row(i)) +
                     coeffs_.zeroth(i) * eta(i);
        }
        return out;
    }

    /// Dense matrix on all nodes (N x N).
    Eigen::MatrixXd full_matrix() const {
        std::vector<std::size_t> rows(grid_->size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return grid_->assemble(coeffs_, rows);
    }

    /// Dense matrix acting on even fields, (N/2) x (N/2).
    Eigen::MatrixXd even_matrix() const {
        return grid_->fold_even_columns(grid_->assemble(coeffs_, grid_->even_representatives()));
    }

private:
    GridPtr grid_;
    OperatorCoefficients coeffs_;
};

/// eta -> F^{ij}[D^2 eta - (<D phi, D eta>/phi) sigma + (|D phi|^2/(2 phi^2) + (1 + phi^{-2})/2) eta sigma]_{ij}
///        - q phi^{q-1} f^{1/(n-k)} eta
inline LinearizedOperator linearize(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec) {
    detail::require_matching(phi, f, spec);
    const auto d = derivatives(phi);
    const auto a = a_tensor(phi, d);
    const Eigen::VectorXd fr = detail::f_root(f, spec);
    const double q = spec.q();
    const int n = spec.n;
    const auto nn = static_cast<Eigen::Index>(phi.size());
    OperatorCoefficients c;
    c.second.reserve(phi.size());
    c.first.resize(nn, n);
    c.zeroth.resize(nn);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto fv = detail::functional_at(spec, a[i], i);
        const double tr = fv.gradient.mat().trace();
        const double ph = phi[i];
        const double g2 = d.gradient.components.row(ii).squaredNorm();
        c.second.push_back(fv.gradient);
        c.first.row(ii) = -tr / ph * d.gradient.components.row(ii);
        c.zeroth(ii) = tr * (g2 / (2 * ph * ph) + 0.5 * (1.0 + 1.0 / (ph * ph))) - q * std::pow(ph, q - 1.0) * fr(ii);
    }
    return LinearizedOperator(phi.grid_ptr(), std::move(c));
}

struct NewtonOptions {
    double tol = 1e-10;
    int max_iter = 50;
    /// Iterates must stay above 1 + floor_delta.
    double floor_delta = 1e-8;
    /// Reciprocal condition estimate below which the Jacobian counts as singular.
    double min_rcond = 1e-12;
    int max_halvings = 30;
};

struct NewtonTrace {
    /// ||r||_inf before the first step and after each accepted step.
    std::vector<double> residuals;
    /// Accepted damping factors.
    std::vector<double> steps;
    int iterations() const { return static_cast<int>(steps.size()); }
};

struct NewtonResult {
    ScalarField phi;
    NewtonTrace trace;
};

namespace detail {

enum class Rejection { None, Floor, Cone };

struct Trial {
    Rejection why = Rejection::None;
    std::size_t node = kNoNode;
    double value = 0.0;
    std::optional<ScalarField> r;
};

/// Admissibility of an iterate and its residual if admissible.
inline Trial try_iterate(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec, double floor) {
    Trial t;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (!(phi[i] > floor)) {
            t.why = Rejection::Floor;
            t.node = i;
            t.value = phi[i];
            return t;
        }
    }
    try {
        t.r = residual(phi, f, spec);
    } catch (const EllipticityLoss& e) {
        t.why = Rejection::Cone;
        t.node = e.node();
        t.value = e.margin();
    }
    return t;
}

inline double sup_norm(const ScalarField& r) { return r.values().cwiseAbs().maxCoeff(); }

inline std::size_t argmax_abs(const ScalarField& r) {
    Eigen::Index i = 0;
    r.values().cwiseAbs().maxCoeff(&i);
    return static_cast<std::size_t>(i);
}

}  // namespace detail

/// Admissible floor for iterates: 1 + delta, raised to sqrt((q+1)/(q-1)) when q > 1.
inline double iterate_floor(const ProblemSpec& spec, double delta) {
    double floor = 1.0 + delta;
    if (spec.q() > 1.0) floor = std::max(floor, xi_critical_point(spec.q()));
    return floor;
}

/// Damped Newton iteration on even fields with backtracking on ||r||_inf.
inline NewtonResult newton_solve(const ScalarField& phi0, const ScalarField& f, const ProblemSpec& spec,
                                 const NewtonOptions& opt = {}) {
    spec.validate();
    detail::require_matching(phi0, f, spec);
    const double floor = iterate_floor(spec, opt.floor_delta);
    const SphereGrid& grid = phi0.grid();

    ScalarField phi = even_project(phi0);
    auto start = detail::try_iterate(phi, f, spec, floor);
    if (start.why == detail::Rejection::Floor) {
        throw BarrierViolation("initial iterate below the admissible floor " + std::to_string(floor), start.node,
                               start.value);
    }
    if (start.why == detail::Rejection::Cone) {
        throw IterateEllipticityLoss("initial iterate outside the ellipticity cone", start.node, start.value);
    }
    ScalarField r = *start.r;
    double rn = detail::sup_norm(r);
    NewtonResult out{phi, {}};
    out.trace.residuals.push_back(rn);

    for (int iter = 0;; ++iter) {
        if (rn < opt.tol) {
            out.phi = phi;
            return out;
        }
        if (iter >= opt.max_iter) {
            const auto node = detail::argmax_abs(r);
            throw MaxIterationsExceeded("Newton did not reach tolerance in " + std::to_string(opt.max_iter) +
                                            " iterations (residual " + std::to_string(rn) + ")",
                                        node, r[node]);
        }
        const Eigen::MatrixXd jac = linearize(phi, f, spec).even_matrix();
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const double rc = lu.rcond();
        if (!(rc >= opt.min_rcond)) {
            throw SingularJacobian("Jacobian is numerically singular (rcond " + std::to_string(rc) + ")", kNoNode, rc);
        }
        const Eigen::VectorXd delta = grid.expand_even(lu.solve(-grid.restrict_even(r.values())));

        double lambda = 1.0;
        detail::Trial last;
        bool accepted = false;
        for (int h = 0; h <= opt.max_halvings; ++h, lambda *= 0.5) {
            ScalarField cand = even_project(ScalarField(phi.grid_ptr(), phi.values() + lambda * delta));
            auto t = detail::try_iterate(cand, f, spec, floor);
            if (t.why == detail::Rejection::None) {
                const double cn = detail::sup_norm(*t.r);
                if (cn <= (1.0 - 1e-4 * lambda) * rn) {
                    phi = std::move(cand);
                    r = std::move(*t.r);
                    rn = cn;
                    accepted = true;
                    break;
                }
            }
            last = std::move(t);
        }
        if (!accepted) {
            if (last.why == detail::Rejection::Floor) {
                throw BarrierViolation("line search could not keep the iterate above " + std::to_string(floor),
                                       last.node, last.value);
            }
            if (last.why == detail::Rejection::Cone) {
                throw IterateEllipticityLoss("line search could not keep the iterate inside the cone", last.node,
                                             last.value);
            }
            const auto node = detail::argmax_abs(r);
            throw NewtonError("line search found no residual decrease (residual " + std::to_string(rn) + ")", node,
                              r[node]);
        }
        out.trace.steps.push_back(lambda);
        out.trace.residuals.push_back(rn);
    }
}

/// Exponent alpha of the path f_t = ((1-t) f_max^{-alpha} + t f^{-alpha})^{-1/alpha}:
/// 1/(n-k) for q < 0, 1/(n+p) for q >= 0.
inline double homotopy_exponent(const ProblemSpec& spec) {
    return spec.q() < 0.0 ? 1.0 / spec.degree() : 1.0 / (spec.n + spec.p);
}

inline ScalarField homotopy_f(const ScalarField& f, const ProblemSpec& spec, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("homotopy parameter must lie in [0, 1]");
    const double fmax = f.max();
    if (t == 0.0) return ScalarField::constant(f.grid_ptr(), fmax);
    if (t == 1.0) return f;
    const double a = homotopy_exponent(spec);
    const Eigen::ArrayXd v =
        ((1.0 - t) * std::pow(fmax, -a) + t * f.values().array().pow(-a)).pow(-1.0 / a);
    return even_project(ScalarField(f.grid_ptr(), v.matrix()));
}

struct ContinuationOptions {
    /// Residual tolerance at every accepted t.
    double tol = 1e-10;
    int t_steps = 16;
    double min_step = 1.0 / 1024.0;
    NewtonOptions newton{};
    /// Run the structural checks on f before solving.
    bool check_assumptions = true;
};

/// Assumption verdicts of f_t at one sampled t.
struct AssumptionSample {
    double t = 0.0;
    /// Empty when the convexity condition does not apply (WQ, or k = 0).
    std::string convexity;
    std::string barrier;
};

/// Invariant checks on a candidate solution at t = 1.
struct VerificationRecord {
    double residual = 0.0;
    double margin = 0.0;
    AprioriRecord apriori;
    std::vector<MinkowskiReport> minkowski;
    double embedding_defect = 0.0;
    double weingarten_defect = 0.0;
    /// min over nodes of p_n(A)^{1/n} - phi^q f^{1/(n-k)} (WQ only).
    std::optional<double> maclaurin_slack;
    /// min eigenvalue of the lemma5 deformation matrix (CM, k >= 1).
    std::optional<double> deformation_min;
    bool constant_recovered = false;
    double c0 = 0.0;
};

struct SolveReport {
    bool converged = false;
    std::vector<double> t_values;
    std::vector<double> step_sizes;
    std::vector<int> iterations;
    std::vector<double> margins;
    std::vector<AssumptionSample> assumptions;
    VerificationRecord verification;
    double final_residual = 0.0;
};

struct SolveResult {
    ScalarField phi;
    SolveReport report;
};

/// Checks that a solve must pass before it starts: barrier for q >= 1, convexity for CM with k >= 1.
inline void require_assumptions(const ScalarField& f, const ProblemSpec& spec) {
    if (spec.q() >= 1.0) {
        auto b = check_barrier(f, spec.n, spec.k, spec.p);
        if (!b.passed()) {
            const double thr = b.thresholds.empty() ? 0.0 : b.thresholds.front().second;
            throw AssumptionFailure("f violates the barrier f < " + std::to_string(thr) + " (max f = " +
                                        std::to_string(f.max()) + ")",
                                    std::move(b));
        }
    }
    if (spec.flavor == Flavor::ChristoffelMinkowski && spec.k >= 1) {
        auto c = check_assumption_convexity(f, spec.n, spec.k, spec.p);
        if (!c.passed()) {
            throw AssumptionFailure("f fails convexity case " + c.case_id + " (min eigenvalue " +
                                        std::to_string(c.global_min) + ")",
                                    std::move(c));
        }
    }
}

inline AssumptionSample sample_assumptions(const ScalarField& f, const ProblemSpec& spec, double t) {
    const auto ft = homotopy_f(f, spec, t);
    AssumptionSample s;
    s.t = t;
    if (spec.flavor == Flavor::ChristoffelMinkowski && spec.k >= 1) {
        s.convexity = std::string(to_string(check_assumption_convexity(ft, spec.n, spec.k, spec.p).verdict));
    }
    s.barrier = std::string(to_string(check_barrier(ft, spec.n, spec.k, spec.p).verdict));
    return s;
}

/// Full invariant suite on phi as a solution for f.
inline VerificationRecord verify_solution(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec) {
    detail::require_matching(phi, f, spec);
    VerificationRecord v;
    v.residual = detail::sup_norm(residual(phi, f, spec));
    const auto body = make_body(phi);
    v.margin = hconvex_margin(body.A);
    v.apriori = apriori_check(phi, f, spec);
    for (int l = 0; l < spec.n; ++l) v.minkowski.push_back(minkowski_residual(body, l));

    const auto& x = embed(body);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd xi = x.row(i).transpose();
        v.embedding_defect = std::max(v.embedding_defect, std::abs(minkowski_dot(xi, xi) + 1.0));
    }
    if (v.margin > 1e-12) {
        const auto w = shifted_weingarten(body);
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(spec.n, spec.n);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const Eigen::MatrixXd prod = w[i].mat() * (phi[i] * body.A[i].mat());
            v.weingarten_defect = std::max(v.weingarten_defect, (prod - id).cwiseAbs().maxCoeff());
        }
    } else {
        v.weingarten_defect = std::numeric_limits<double>::infinity();
    }

    const Eigen::VectorXd fr = detail::f_root(f, spec);
    if (spec.flavor == Flavor::WeingartenQuotient) {
        double s = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < phi.size(); ++i) {
            const double pn = normalized_elem_sym(spec.n, body.A[i]);
            s = std::min(s, std::pow(std::max(pn, 0.0), 1.0 / spec.n) -
                                std::pow(phi[i], spec.q()) * fr(static_cast<Eigen::Index>(i)));
        }
        v.maclaurin_slack = s;
    }
    if (spec.flavor == Flavor::ChristoffelMinkowski && spec.k >= 1) {
        v.deformation_min =
            deformation_matrix(f, phi, spec.n, spec.k, spec.p, DeformationVariant::Lemma5).global_min;
    }

    const double fmax = f.max(), fmin = f.min();
    if (fmax - fmin <= 1e-14 * fmax) {
        try {
            v.c0 = constant_seed(spec, fmax);
            v.constant_recovered = (phi.values().array() - v.c0).abs().maxCoeff() <= 1e-10;
        } catch (const NoAdmissibleRoot&) {
            v.c0 = std::numeric_limits<double>::quiet_NaN();
        }
    }
    return v;
}

/// Continues the constant solution for f_0 = f_max along homotopy_f to t = 1.
inline SolveResult continuation_solve(const ScalarField& f, const ProblemSpec& spec,
                                      const ContinuationOptions& opt = {}) {
    spec.validate();
    if (f.grid().dim() != spec.n) throw InvalidArgument("grid dimension does not match n");
    detail::require_positive_even(f);
    if (f.parity() != Parity::Even) throw InvalidArgument("prescribed f must be tagged even");
    if (opt.t_steps < 1) throw InvalidArgument("t_steps must be positive");
    if (opt.check_assumptions) require_assumptions(f, spec);

    SolveReport rep;
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) rep.assumptions.push_back(sample_assumptions(f, spec, t));

    const double c0 = constant_seed(spec, f.max());
    NewtonOptions nopt = opt.newton;
    nopt.tol = opt.tol;

    auto run = [&](const ScalarField& start, double t) { return newton_solve(start, homotopy_f(f, spec, t), spec, nopt); };

    NewtonResult cur = run(ScalarField::constant(f.grid_ptr(), c0), 0.0);
    rep.t_values.push_back(0.0);
    rep.step_sizes.push_back(0.0);
    rep.iterations.push_back(cur.trace.iterations());
    rep.margins.push_back(hconvex_margin(cur.phi));

    double t = 0.0, step = 1.0 / opt.t_steps;
    std::string last_error;
    while (t < 1.0) {
        const double t_try = std::min(1.0, t + step);
        try {
            NewtonResult next = run(cur.phi, t_try);
            cur = std::move(next);
            t = t_try;
            rep.t_values.push_back(t);
            rep.step_sizes.push_back(step);
            rep.iterations.push_back(cur.trace.iterations());
            rep.margins.push_back(hconvex_margin(cur.phi));
        } catch (const NewtonError& e) {
            last_error = e.what();
            step *= 0.5;
            if (step < opt.min_step) {
                throw ContinuationStall("continuation stalled at t = " + std::to_string(t) + " (" + last_error + ")",
                                        t, step);
            }
        }
    }

    rep.verification = verify_solution(cur.phi, f, spec);
    rep.final_residual = rep.verification.residual;
    rep.converged = rep.final_residual < opt.tol && rep.verification.margin > 0.0;
    return {cur.phi, std::move(rep)};
}

}  // namespace horo
