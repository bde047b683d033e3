#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "horo/errors.hpp"
#include "horo/hconvex.hpp"
#include "horo/problem.hpp"
#include "horo/sphere.hpp"
#include "horo/xi.hpp"

namespace horo {

enum class Verdict { Pass, Marginal, Fail };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Marginal: return "marginal";
        default: return "fail";
    }
}

/// Outcome of a structural-condition scan.
struct AssumptionReport {
    /// "1" .. "5" for the convexity cases, "barrier" or "none" for the barrier.
    std::string case_id;
    /// Per-node minimum eigenvalue (convexity) or threshold - f (barrier).
    Eigen::VectorXd node_min;
    double global_min = std::numeric_limits<double>::infinity();
    Verdict verdict = Verdict::Pass;
    /// Named constants that entered the matrix or comparison.
    std::vector<std::pair<std::string, double>> thresholds;

    /// Marginal verdicts count as passing.
    bool passed() const { return verdict != Verdict::Fail; }
};

/// A required structural condition on f does not hold.
class AssumptionFailure : public Error {
public:
    explicit AssumptionFailure(const std::string& what, AssumptionReport report)
        : Error(what), report_(std::move(report)) {}
    const AssumptionReport& report() const noexcept { return report_; }

private:
    AssumptionReport report_;
};

namespace detail {

inline void require_positive_even(const ScalarField& f) {
    for (std::size_t i = 0; i < f.size(); ++i)
        if (!(f[i] > 0.0)) throw InvalidArgument("f must be positive (node " + std::to_string(i) + ")");
}

inline Eigen::MatrixXd sym_outer(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return 0.5 * (a * b.transpose() + b * a.transpose());
}

inline ScalarField power_field(const ScalarField& f, double e) {
    return ScalarField(f.grid_ptr(), f.values().array().pow(e).matrix(), f.parity());
}

inline void scan(AssumptionReport& r, const FrameField& m) {
    r.node_min.resize(static_cast<Eigen::Index>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) r.node_min(static_cast<Eigen::Index>(i)) = least_eigenvalue(m[i]);
    r.global_min = r.node_min.size() ? r.node_min.minCoeff() : 0.0;
}

}  // namespace detail

/// Which convexity case applies to p: 1 (p = -n), 2 (-n < p <= -(n+k)/2),
/// 3 (-(n+k)/2 < p < -k), 4 (-k <= p <= n-2k), 5 (p > n-2k).
inline int convexity_case(int n, int k, double p) {
    if (p < -n) throw InvalidArgument("p below -n has no convexity case");
    if (p == -n) return 1;
    if (p <= -(n + k) / 2.0) return 2;
    if (p < -k) return 3;
    if (p <= n - 2 * k) return 4;
    return 5;
}

/// Per-node matrix of the convexity condition on f, assembled for the case selected by p.
inline FrameField convexity_matrix(const ScalarField& f, int n, int k, double p, int* case_out = nullptr) {
    if (k < 1 || k > n - 1) throw InvalidArgument("convexity condition needs 1 <= k <= n-1");
    if (f.grid().dim() != n) throw InvalidArgument("grid dimension does not match n");
    detail::require_positive_even(f);
    const int c = convexity_case(n, k, p);
    if (case_out) *case_out = c;
    const double d = n - k;
    const ScalarField g = detail::power_field(f, c <= 3 ? -1.0 / d : -1.0 / (n + p));
    const auto der = derivatives(g);
    const double fmax_root = std::pow(f.max(), 1.0 / d);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);

    FrameField out{f.grid_ptr(), {}};
    out.matrices.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double gi = g[i];
        const double dg = der.gradient.norm(i);
        const Eigen::MatrixXd& h = der.hessian[i].mat();
        Eigen::MatrixXd m;
        switch (c) {
            case 1:
                m = h - 3.0 * dg * id + gi / (2.0 + 8.0 * fmax_root) * id;
                break;
            case 2:
                m = h - ((n - 3.0 * k - 2.0 * p) / d) * dg * id + std::pow((n + p) / d, 2) * gi * id;
                break;
            case 3: {
                const double a = std::pow(n - 3.0 * k - 2.0 * p, 2) / (2.0 * (n + p) * (n + k + 2.0 * p));
                m = h - a * dg * dg / gi * id + (n + p) / (2.0 * d) * gi * id;
                break;
            }
            case 4:
                m = h - 0.5 * dg * dg / gi * id + 0.5 * gi * id;
                break;
            default:
                m = h - 0.5 * dg * dg / gi * id + (d / (n + p)) * gi * id;
                break;
        }
        out.matrices.push_back(SymMatrix::symmetrized(m));
    }
    return out;
}

/// Scans the convexity matrix; pass iff the global minimum eigenvalue is >= -tol.
inline AssumptionReport check_assumption_convexity(const ScalarField& f, int n, int k, double p,
                                                   double tol = 1e-10) {
    int c = 0;
    const auto m = convexity_matrix(f, n, k, p, &c);
    AssumptionReport r;
    r.case_id = std::to_string(c);
    detail::scan(r, m);
    r.verdict = r.global_min >= -tol ? Verdict::Pass : Verdict::Fail;
    r.thresholds = {{"tolerance", tol}};
    if (c == 1) r.thresholds.emplace_back("zeroth_order_denominator", 2.0 + 8.0 * std::pow(f.max(), 1.0 / (n - k)));
    return r;
}

/// Strict comparison f < threshold with relative margin 1e-12; "marginal" within 1e-6.
inline AssumptionReport check_barrier(const ScalarField& f, int n, int k, double p) {
    detail::require_positive_even(f);
    const ProblemSpec spec{n, k, p, Flavor::ChristoffelMinkowski};
    const double thr = barrier_threshold(spec);
    AssumptionReport r;
    if (!std::isfinite(thr)) {
        r.case_id = "none";
        r.node_min = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(f.size()),
                                               std::numeric_limits<double>::infinity());
        r.verdict = Verdict::Pass;
        return r;
    }
    r.case_id = "barrier";
    r.node_min = (thr - f.values().array()).matrix();
    r.global_min = r.node_min.minCoeff();
    r.thresholds = {{"threshold", thr}};
    const double rel = r.global_min / thr;
    r.verdict = rel > 1e-6 ? Verdict::Pass : (rel > 1e-12 ? Verdict::Marginal : Verdict::Fail);
    return r;
}

enum class DeformationVariant { Lemma4, Lemma5 };

struct DeformationReport {
    FrameField matrices;
    Eigen::VectorXd node_min;
    double global_min = 0.0;
    /// global_min >= -1e-10
    bool psd = false;
};

/// Deformation matrices built from g, l = log phi, using rank-one terms symmetrized.
///
/// Lemma4, degree d (default k), g = f^{-1/d}, t = d - p - n:
///   -D^2 g - (2t/d) sym(dg, dl) + <Dg, Dl> sigma + (t(n+p)/d^2) g dl dl
///   - ((n+p)/(2d) |D phi|^2/phi^2 + (n+p)/(2d) + (2d-p-n)/(2d phi^2)) g sigma
/// Lemma5, g = f^{-1/(n-k)}:
///   D^2 g - (2(k+p)/(n-k)) sym(dg, dl) - <Dg, Dl> sigma + ((k+p)(n+p)/(n-k)^2) g dl dl
///   + ((n+p)/(2(n-k)) |D phi|^2/phi^2 + (n+p)/(2(n-k)) + (n-2k-p)/(2(n-k) phi^2)) g sigma
inline DeformationReport deformation_matrix(const ScalarField& f, const ScalarField& phi, int n, int k, double p,
                                            DeformationVariant variant, int degree = 0) {
    detail::require_positive_even(f);
    detail::require_positive(phi);
    if (f.grid_ptr() != phi.grid_ptr()) throw InvalidArgument("f and phi must share a grid");
    if (f.grid().dim() != n) throw InvalidArgument("grid dimension does not match n");
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const auto dphi = grad(phi);

    DeformationReport rep;
    rep.matrices.grid = f.grid_ptr();
    rep.matrices.matrices.reserve(f.size());
    if (variant == DeformationVariant::Lemma4) {
        const double d = degree > 0 ? degree : k;
        if (!(d > 0)) throw InvalidArgument("lemma4 matrix needs a positive degree");
        const double t = d - p - n;
        const ScalarField g = detail::power_field(f, -1.0 / d);
        const auto dg = derivatives(g);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const Eigen::VectorXd gv = dg.gradient.components.row(r).transpose();
            const Eigen::VectorXd lv = dphi.components.row(r).transpose() / phi[i];
            const double gi = g[i], ph = phi[i];
            const double zeroth = (n + p) / (2 * d) * lv.squaredNorm() + (n + p) / (2 * d) + (2 * d - p - n) / (2 * d * ph * ph);
            Eigen::MatrixXd m = -dg.hessian[i].mat() - (2 * t / d) * detail::sym_outer(gv, lv) + gv.dot(lv) * id +
                                (t * (n + p) / (d * d)) * gi * lv * lv.transpose() - zeroth * gi * id;
            rep.matrices.matrices.push_back(SymMatrix::symmetrized(m));
        }
    } else {
        if (k < 0 || k > n - 1) throw InvalidArgument("lemma5 matrix needs 0 <= k <= n-1");
        const double d = n - k;
        const ScalarField g = detail::power_field(f, -1.0 / d);
        const auto dg = derivatives(g);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const Eigen::VectorXd gv = dg.gradient.components.row(r).transpose();
            const Eigen::VectorXd lv = dphi.components.row(r).transpose() / phi[i];
            const double gi = g[i], ph = phi[i];
            const double a = (n + p) / (2 * d);
            const double zeroth = a * lv.squaredNorm() + a + (n - 2.0 * k - p) / (2 * d * ph * ph);
            Eigen::MatrixXd m = dg.hessian[i].mat() - (2 * (k + p) / d) * detail::sym_outer(gv, lv) -
                                gv.dot(lv) * id + ((k + p) * (n + p) / (d * d)) * gi * lv * lv.transpose() +
                                zeroth * gi * id;
            rep.matrices.matrices.push_back(SymMatrix::symmetrized(m));
        }
    }
    rep.node_min.resize(static_cast<Eigen::Index>(f.size()));
    for (std::size_t i = 0; i < f.size(); ++i)
        rep.node_min(static_cast<Eigen::Index>(i)) = detail::least_eigenvalue(rep.matrices[i]);
    rep.global_min = rep.node_min.minCoeff();
    rep.psd = rep.global_min >= -1e-10;
    return rep;
}

/// Interval [lo, hi] (hi may be +inf).
struct Interval {
    double lo = 1.0;
    double hi = std::numeric_limits<double>::infinity();
    bool contains(double x, double rel_tol = 1e-8) const {
        return x >= lo - rel_tol * std::max(1.0, std::abs(lo)) &&
               (!std::isfinite(hi) || x <= hi + rel_tol * std::max(1.0, std::abs(hi)));
    }
    /// Signed distance to the nearer endpoint, negative outside.
    double slack(double x) const { return std::min(x - lo, std::isfinite(hi) ? hi - x : std::numeric_limits<double>::infinity()); }
};

/// A priori bound record for a candidate solution.
struct AprioriRecord {
    double phi_min = 0.0, phi_max = 0.0;
    /// Where the maximum and minimum of a solution must lie, from the profile xi_q and f_min, f_max.
    Interval phi_max_range, phi_min_range;
    double c0_max_slack = 0.0, c0_min_slack = 0.0;
    /// phi_min - cosh(log phi_max)
    double cosh_slack = 0.0;
    /// max |D log phi| and 1 - that value
    double gradient_max = 0.0, gradient_slack = 0.0;
    /// max over nodes of the Frobenius norm of D^2 phi (reported, no threshold)
    double hessian_norm = 0.0;
    bool c0_pass = false, cosh_pass = false, gradient_pass = false;
    bool passed() const { return c0_pass && cosh_pass && gradient_pass; }
};

/// Bound intervals from the maximum principle at the extrema of phi:
/// xi_q(phi_max) <= f_min^{-1/(n-k)} and xi_q(phi_min) >= f_max^{-1/(n-k)}.
inline std::pair<Interval, Interval> c0_intervals(const ProblemSpec& spec, double f_min, double f_max) {
    const double q = spec.q();
    const double t_min = std::pow(f_min, -1.0 / spec.degree());
    const double t_max = std::pow(f_max, -1.0 / spec.degree());
    Interval imax, imin;
    if (q <= 1.0) {
        imax.lo = xi_inverse_decreasing(q, t_min);
        imin.hi = xi_inverse_decreasing(q, t_max);
    } else {
        // solutions live on the increasing branch above the critical point
        imax.lo = xi_critical_point(q);
        imax.hi = xi_inverse_increasing(q, t_min);
        imin.lo = xi_inverse_increasing(q, t_max);
    }
    return {imax, imin};
}

inline AprioriRecord apriori_check(const ScalarField& phi, const ScalarField& f, const ProblemSpec& spec) {
    detail::require_positive(phi);
    detail::require_positive_even(f);
    AprioriRecord rec;
    rec.phi_min = phi.min();
    rec.phi_max = phi.max();
    auto [imax, imin] = c0_intervals(spec, f.min(), f.max());
    rec.phi_max_range = imax;
    rec.phi_min_range = imin;
    rec.c0_max_slack = imax.slack(rec.phi_max);
    rec.c0_min_slack = imin.slack(rec.phi_min);
    rec.c0_pass = imax.contains(rec.phi_max) && imin.contains(rec.phi_min);

    rec.cosh_slack = rec.phi_min - std::cosh(std::log(rec.phi_max));
    rec.cosh_pass = rec.cosh_slack >= -1e-8;

    const auto d = derivatives(phi);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        rec.gradient_max = std::max(rec.gradient_max, d.gradient.norm(i) / phi[i]);
        rec.hessian_norm = std::max(rec.hessian_norm, d.hessian[i].mat().norm());
    }
    rec.gradient_slack = 1.0 - rec.gradient_max;
    rec.gradient_pass = rec.gradient_max <= 1.0 - 1e-8;
    return rec;
}

}  // namespace horo
