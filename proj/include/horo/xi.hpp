#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "horo/errors.hpp"
#include "horo/problem.hpp"

namespace horo {

/// xi_q(t) = 2 t^q / (t - 1/t), the profile whose level sets give constant solutions.
struct XiInfo {
    double value = 0.0;
    /// q > 1 only: xi decreases on (1, t*] and increases on [t*, inf).
    bool has_critical = false;
    double critical_point = std::numeric_limits<double>::quiet_NaN();
    double critical_value = std::numeric_limits<double>::quiet_NaN();
};

inline double xi(double q, double t) { return 2.0 * std::pow(t, q) / (t - 1.0 / t); }

/// Critical point sqrt((q+1)/(q-1)) of xi_q, q > 1.
inline double xi_critical_point(double q) { return std::sqrt((q + 1.0) / (q - 1.0)); }

/// (q+1)^{(q+1)/2} / (q-1)^{(q-1)/2}, q > 1.
inline double xi_critical_value(double q) {
    return std::exp(0.5 * (q + 1.0) * std::log(q + 1.0) - 0.5 * (q - 1.0) * std::log(q - 1.0));
}

inline XiInfo xi_eval(double q, double t) {
    if (!(t > 1.0)) throw InvalidArgument("xi_q needs t > 1 (got " + std::to_string(t) + ")");
    XiInfo info;
    info.value = xi(q, t);
    if (q > 1.0) {
        info.has_critical = true;
        info.critical_point = xi_critical_point(q);
        info.critical_value = xi_critical_value(q);
    }
    return info;
}

namespace detail {

/// log xi_q(e^s), finite for s > 0.
inline double log_xi(double q, double s) { return std::log(2.0) + q * s - std::log(2.0 * std::sinh(s)); }

/// Bisection in s = log t for log_xi(s) = log_target on [lo, hi] given a sign change.
inline double bisect_log(double q, double log_target, double lo, double hi) {
    double flo = log_xi(q, lo) - log_target;
    for (int it = 0; it < 400 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = log_xi(q, mid) - log_target;
        if (fm == 0.0) return mid;
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Root of xi_q(t) = target on the decreasing branch: (1, inf) for q < 1, (1, 2-limit) for
/// q = 1, (1, t*] for q > 1. Throws NoAdmissibleRoot when target is below the branch range.
inline double xi_inverse_decreasing(double q, double target) {
    if (!(target > 0.0)) throw InvalidArgument("xi level must be positive");
    const double lt = std::log(target);
    double hi;
    if (q > 1.0) {
        const double cv = xi_critical_value(q);
        if (!(target > cv)) throw NoAdmissibleRoot("xi_q level below the critical value", target, cv);
        hi = std::log(xi_critical_point(q));
    } else {
        if (q == 1.0 && !(target > 2.0)) throw NoAdmissibleRoot("xi_1 level must exceed 2", target, 2.0);
        hi = 1.0;
        while (detail::log_xi(q, hi) > lt) {
            hi *= 2.0;
            if (hi > 1e6) throw NoAdmissibleRoot("xi_q level not reached", target, 0.0);
        }
    }
    // log_xi blows up as s -> 0
    double lo = std::min(hi, 1e-12);
    while (detail::log_xi(q, lo) < lt) lo *= 0.5;
    return std::exp(detail::bisect_log(q, lt, lo, hi));
}

/// Root on the increasing branch [t*, inf), q > 1.
inline double xi_inverse_increasing(double q, double target) {
    if (!(q > 1.0)) throw InvalidArgument("increasing branch exists only for q > 1");
    const double cv = xi_critical_value(q);
    if (!(target > cv)) throw NoAdmissibleRoot("xi_q level below the critical value", target, cv);
    const double lt = std::log(target);
    const double lo = std::log(xi_critical_point(q)) * (1.0 + 1e-12);
    double hi = 2.0 * lo + 1.0;
    while (detail::log_xi(q, hi) < lt) hi *= 2.0;
    return std::exp(detail::bisect_log(q, lt, lo, hi));
}

/// Largest gamma with a constant solution: none for p < n - 2k, 2^{k-n} for p = n - 2k,
/// (2k+p-n)^{(2k+p-n)/2} (n-k)^{n-k} / (n+p)^{(n+p)/2} above. Returns +inf if there is no barrier.
inline double barrier_threshold(const ProblemSpec& spec) {
    const double n = spec.n, k = spec.k, p = spec.p;
    const double edge = n - 2 * k;
    if (p < edge) return std::numeric_limits<double>::infinity();
    if (p == edge) return std::pow(2.0, k - n);
    const double a = 2 * k + p - n;
    return std::pow(a, 0.5 * a) * std::pow(n - k, n - k) / std::pow(n + p, 0.5 * (n + p));
}

/// Constant c0 > 1 with (c0 - 1/c0)/2 = c0^q gamma^{1/(n-k)}, i.e. xi_q(c0) = gamma^{-1/(n-k)}.
/// For q > 1 the increasing-branch root is returned.
inline double constant_seed(const ProblemSpec& spec, double gamma) {
    spec.validate();
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive and finite");
    const double q = spec.q();
    const double target = std::pow(gamma, -1.0 / spec.degree());
    if (q > 1.0) {
        const double cv = xi_critical_value(q);
        if (!(target > cv)) {
            throw NoAdmissibleRoot("gamma = " + std::to_string(gamma) + " violates the barrier " +
                                       std::to_string(barrier_threshold(spec)),
                                   target, cv);
        }
        return xi_inverse_increasing(q, target);
    }
    if (q == 1.0 && !(target > 2.0)) {
        throw NoAdmissibleRoot("gamma = " + std::to_string(gamma) + " violates the barrier " +
                                   std::to_string(barrier_threshold(spec)),
                               target, 2.0);
    }
    return xi_inverse_decreasing(q, target);
}

}  // namespace horo
