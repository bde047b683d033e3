#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "horo/errors.hpp"
#include "horo/sphere.hpp"
#include "horo/symfunc.hpp"

namespace horo {

namespace detail {

inline void require_positive(const ScalarField& phi) {
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (!(phi[i] > 0.0)) {
            throw InvalidBody("phi must be positive (node " + std::to_string(i) + ")", i, phi[i]);
        }
    }
}

inline double least_eigenvalue(const SymMatrix& m) {
    if (m.dim() == 1) return m(0, 0);
    if (m.dim() == 2) {
        const double a = m(0, 0), b = m(0, 1), d = m(1, 1);
        return 0.5 * (a + d) - std::hypot(0.5 * (a - d), b);
    }
    return Spectrum(m).values.minCoeff();
}

}  // namespace detail

/// A[phi] = D^2 phi - (|D phi|^2 / 2 phi) sigma + ((phi - 1/phi) / 2) sigma, from precomputed derivatives.
inline FrameField a_tensor(const ScalarField& phi, const Derivatives& d) {
    detail::require_positive(phi);
    const int n = phi.grid().dim();
    FrameField out{phi.grid_ptr(), {}};
    out.matrices.reserve(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double f = phi[i];
        const double g2 = d.gradient.components.row(static_cast<Eigen::Index>(i)).squaredNorm();
        const double shift = -g2 / (2 * f) + 0.5 * (f - 1.0 / f);
        out.matrices.push_back(
            SymMatrix::symmetrized(d.hessian[i].mat() + shift * Eigen::MatrixXd::Identity(n, n)));
    }
    return out;
}

inline FrameField a_tensor(const ScalarField& phi) {
    detail::require_positive(phi);
    return a_tensor(phi, derivatives(phi));
}

/// psi = |D phi|^2 / (2 phi) + (phi + 1/phi) / 2, the height x_{n+2} of the embedded point.
inline ScalarField psi(const ScalarField& phi, const CovectorField& dphi) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(phi.size()));
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double f = phi[i];
        const double g2 = dphi.components.row(static_cast<Eigen::Index>(i)).squaredNorm();
        v(static_cast<Eigen::Index>(i)) = g2 / (2 * f) + 0.5 * (f + 1.0 / f);
    }
    return ScalarField(phi.grid_ptr(), std::move(v), phi.parity());
}

inline ScalarField psi(const ScalarField& phi) { return psi(phi, grad(phi)); }

/// min over nodes of the least eigenvalue of A[phi].
inline double hconvex_margin(const FrameField& a) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) m = std::min(m, detail::least_eigenvalue(a[i]));
    return m;
}

inline double hconvex_margin(const ScalarField& phi) { return hconvex_margin(a_tensor(phi)); }

/// Lorentzian product x_1 y_1 + ... + x_{n+1} y_{n+1} - x_{n+2} y_{n+2}.
inline double minkowski_dot(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index m = x.size() - 1;
    return x.head(m).dot(y.head(m)) - x(m) * y(m);
}

/// An h-convex body described by phi = e^u on a grid.
struct HConvexBody {
    ScalarField phi;
    ScalarField u;
    CovectorField dphi;
    FrameField A;
    /// Hyperboloid points, one row per node, N x (n+2).
    Eigen::MatrixXd embedding;
};

/// Hyperboloid points X(z) = (phi/2)(-z,1) + (|D phi|^2/2phi + 1/2phi)(z,1) - (D phi, 0).
inline Eigen::MatrixXd embedding_points(const ScalarField& phi, const CovectorField& dphi) {
    const SphereGrid& g = phi.grid();
    const int n = g.dim();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(g.size()), n + 2);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double f = phi[i];
        const double g2 = dphi.components.row(r).squaredNorm();
        const double b = g2 / (2 * f) + 1.0 / (2 * f);
        Eigen::VectorXd space = (b - 0.5 * f) * g.node(i);
        for (int a = 0; a < n; ++a) space -= dphi.components(r, a) * g.tangent(i, a);
        x.row(r).head(n + 1) = space.transpose();
        x(r, n + 1) = 0.5 * f + b;
    }
    return x;
}

/// Builds a body; rejects phi < 1 and A[phi] with a negative eigenvalue beyond rounding.
inline HConvexBody make_body(const ScalarField& phi) {
    detail::require_positive(phi);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (phi[i] < 1.0 - 1e-12) throw InvalidBody("phi < 1 at node " + std::to_string(i), i, phi[i]);
    }
    const auto d = derivatives(phi);
    auto a = a_tensor(phi, d);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double lo = detail::least_eigenvalue(a[i]);
        const double scale = std::max(1.0, a[i].mat().cwiseAbs().maxCoeff());
        if (lo < -1e-10 * scale) {
            throw InvalidBody("A[phi] is not positive semi-definite at node " + std::to_string(i), i, lo);
        }
    }
    ScalarField u(phi.grid_ptr(), phi.values().array().log().matrix(), phi.parity());
    auto x = embedding_points(phi, d.gradient);
    return {phi, std::move(u), d.gradient, std::move(a), std::move(x)};
}

/// Embedded points of a body, after re-checking h-convexity.
inline const Eigen::MatrixXd& embed(const HConvexBody& body) {
    for (std::size_t i = 0; i < body.A.size(); ++i) {
        const double lo = detail::least_eigenvalue(body.A[i]);
        if (lo < -1e-10 * std::max(1.0, body.A[i].mat().cwiseAbs().maxCoeff())) {
            throw InvalidBody("body is not h-convex at node " + std::to_string(i), i, lo);
        }
    }
    return body.embedding;
}

/// W - I = (phi A)^{-1} per node. Requires A > 0 strictly (margin floor 1e-12).
inline FrameField shifted_weingarten(const HConvexBody& body) {
    FrameField out{body.phi.grid_ptr(), {}};
    out.matrices.reserve(body.A.size());
    for (std::size_t i = 0; i < body.A.size(); ++i) {
        const double lo = detail::least_eigenvalue(body.A[i]);
        if (!(lo > 1e-12)) {
            throw NotStrictlyHConvex("A[phi] is singular at node " + std::to_string(i), i, lo);
        }
        out.matrices.push_back(SymMatrix::symmetrized((body.phi[i] * body.A[i].mat()).inverse()));
    }
    return out;
}

/// Principal curvatures kappa_i = 1 + eig(W - I), N x n, ascending per row.
inline Eigen::MatrixXd principal_curvatures(const HConvexBody& body) {
    const auto w = shifted_weingarten(body);
    const int n = body.phi.grid().dim();
    Eigen::MatrixXd k(static_cast<Eigen::Index>(w.size()), n);
    for (std::size_t i = 0; i < w.size(); ++i) {
        k.row(static_cast<Eigen::Index>(i)) = (Spectrum(w[i]).values.array() + 1.0).matrix().transpose();
    }
    return k;
}

struct MinkowskiReport {
    int level = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    /// |lhs - rhs| / max(|lhs|, |rhs|, 1e-30)
    double residual = 0.0;
};

/// int phi^{l-n} p_{l+1}(A) = int (|D phi|^2/2phi + (phi - 1/phi)/2) phi^{l-n} p_l(A).
inline MinkowskiReport minkowski_residual(const HConvexBody& body, int level) {
    const int n = body.phi.grid().dim();
    if (level < 0 || level > n - 1) throw InvalidArgument("Minkowski level must satisfy 0 <= l <= n-1");
    const auto& w = body.phi.grid().weights();
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < body.phi.size(); ++i) {
        const double f = body.phi[i];
        const double g2 = body.dphi.components.row(static_cast<Eigen::Index>(i)).squaredNorm();
        const double weight = w(static_cast<Eigen::Index>(i)) * std::pow(f, level - n);
        const auto e = elem_sym_all(Spectrum(body.A[i]).span());
        lhs += weight * e[level + 1] / binomial(n, level + 1);
        rhs += weight * (g2 / (2 * f) + 0.5 * (f - 1.0 / f)) * e[level] / binomial(n, level);
    }
    return {level, lhs, rhs, std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-30})};
}

}  // namespace horo
