#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "horo/errors.hpp"
#include "horo/problem.hpp"

namespace horo {

/// Real symmetric n x n matrix in orthonormal-frame components.
class SymMatrix {
public:
    SymMatrix() = default;

    /// Rejects non-square input and asymmetry above 1e-14 relative.
    explicit SymMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols() || m_.rows() < 1) {
            throw InvalidArgument("SymMatrix needs a non-empty square matrix");
        }
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale) {
            throw InvalidArgument("SymMatrix input is not symmetric");
        }
    }

    /// Wraps (M + M^T)/2; for results that are symmetric up to rounding.
    static SymMatrix symmetrized(const Eigen::MatrixXd& m) {
        SymMatrix s;
        s.m_ = 0.5 * (m + m.transpose());
        return s;
    }

    static SymMatrix identity(int n) { return SymMatrix(Eigen::MatrixXd::Identity(n, n)); }
    static SymMatrix zero(int n) { return SymMatrix(Eigen::MatrixXd::Zero(n, n)); }
    static SymMatrix diagonal(std::span<const double> d) {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d.size()),
                                                  static_cast<Eigen::Index>(d.size()));
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return SymMatrix(std::move(m));
    }
    static SymMatrix diagonal(std::initializer_list<double> d) {
        return diagonal(std::span<const double>(d.begin(), d.size()));
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& mat() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

private:
    Eigen::MatrixXd m_;
};

/// Identifies the Gårding cone Gamma_m.
struct ConeLabel {
    int m = 1;
};

/// Eigen-decomposition M = Q diag(lambda) Q^T.
struct Spectrum {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;

    explicit Spectrum(const SymMatrix& m) {
        if (m.dim() == 1) {
            values = m.mat().col(0);
            vectors = Eigen::MatrixXd::Identity(1, 1);
            return;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
        values = es.eigenvalues();
        vectors = es.eigenvectors();
    }

    int dim() const { return static_cast<int>(values.size()); }
    std::span<const double> span() const { return {values.data(), static_cast<std::size_t>(values.size())}; }

    /// Q diag(d) Q^T
    SymMatrix rotate_back(const Eigen::VectorXd& d) const {
        return SymMatrix::symmetrized(vectors * d.asDiagonal() * vectors.transpose());
    }
};

/// e_0 .. e_n of lambda via the product recurrence for prod_i (1 + lambda_i t).
inline std::vector<double> elem_sym_all(std::span<const double> lambda) {
    std::vector<double> e(lambda.size() + 1, 0.0);
    e[0] = 1.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
        for (std::size_t j = i + 1; j >= 1; --j) e[j] += lambda[i] * e[j - 1];
    }
    return e;
}

/// S_k(lambda); 0 for k < 0 or k > n.
inline double elem_sym(int k, std::span<const double> lambda) {
    const int n = static_cast<int>(lambda.size());
    if (k < 0 || k > n) return 0.0;
    return elem_sym_all(lambda)[static_cast<std::size_t>(k)];
}

/// S_k(lambda | excluded): lambda with the listed entries set to zero.
inline double elem_sym_excluding(int k, std::span<const double> lambda,
                                 std::initializer_list<int> excluded) {
    std::vector<double> rest;
    rest.reserve(lambda.size());
    for (int i = 0; i < static_cast<int>(lambda.size()); ++i) {
        if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) rest.push_back(lambda[i]);
    }
    return elem_sym(k, rest);
}

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double b = 1.0;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
}

inline double elem_sym(int k, const SymMatrix& m) {
    if (k < 0 || k > m.dim()) return 0.0;
    if (k == 0) return 1.0;
    return elem_sym(k, Spectrum(m).span());
}

/// p_k = S_k / binom(n, k).
inline double normalized_elem_sym(int k, const SymMatrix& m) {
    if (k < 0 || k > m.dim()) return 0.0;
    return elem_sym(k, m) / binomial(m.dim(), k);
}

/// (S_k^{ij}) = dS_k/dA_ij, diagonal S_{k-1}(lambda|i) in the eigenbasis.
inline SymMatrix elem_sym_grad(int k, const Spectrum& s) {
    const int n = s.dim();
    if (k < 1 || k > n) throw InvalidArgument("elem_sym_grad needs 1 <= k <= n");
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d(i) = elem_sym_excluding(k - 1, s.span(), {i});
    return s.rotate_back(d);
}

inline SymMatrix elem_sym_grad(int k, const SymMatrix& m) { return elem_sym_grad(k, Spectrum(m)); }

/// Dense 4-index array T(i,j,r,s), row-major.
class Tensor4 {
public:
    explicit Tensor4(int n) : n_(n), data_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}
    int dim() const { return n_; }
    double& operator()(int i, int j, int r, int s) { return data_[index(i, j, r, s)]; }
    double operator()(int i, int j, int r, int s) const { return data_[index(i, j, r, s)]; }
    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t index(int i, int j, int r, int s) const {
        return ((static_cast<std::size_t>(i) * n_ + j) * n_ + r) * n_ + s;
    }
    int n_;
    std::vector<double> data_;
};

/// S_k^{ij,rs} = d^2 S_k / dA_ij dA_rs.
///
/// In the eigenbasis the only non-zero components are
///   (i,i,r,r), i != r : S_{k-2}(lambda | i r)
///   (i,j,j,i), i != j : -S_{k-2}(lambda | i j)
/// and the result is rotated back with Q in every slot.
inline Tensor4 elem_sym_hess(int k, const SymMatrix& m) {
    const int n = m.dim();
    if (k < 2 || k > n) throw InvalidArgument("elem_sym_hess needs 2 <= k <= n");
    const Spectrum s(m);
    Eigen::MatrixXd pair(n, n);  // S_{k-2}(lambda | i j)
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) pair(i, j) = (i == j) ? 0.0 : elem_sym_excluding(k - 2, s.span(), {i, j});

    const Eigen::MatrixXd& q = s.vectors;
    Tensor4 out(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    double v = 0.0;
                    for (int i = 0; i < n; ++i)
                        for (int r = 0; r < n; ++r) {
                            if (i == r) continue;
                            // (i,i,r,r) and (i,r,r,i) both carry S_{k-2}(lambda|ir)
                            v += pair(i, r) * (q(a, i) * q(b, i) * q(c, r) * q(d, r) -
                                               q(a, i) * q(b, r) * q(c, r) * q(d, i));
                        }
                    out(a, b, c, d) = v;
                }
    return out;
}

struct ConeMembership {
    bool inside = false;
    /// min_{1<=i<=m} S_i(lambda)
    double margin = 0.0;
};

/// lambda(M) in Gamma_m: every normalized p_i, 1 <= i <= m, exceeds `tol`.
inline ConeMembership cone_membership(ConeLabel label, std::span<const double> lambda, double tol = 1e-12) {
    const int n = static_cast<int>(lambda.size());
    if (label.m < 1 || label.m > n) throw InvalidArgument("cone label m must satisfy 1 <= m <= n");
    const auto e = elem_sym_all(lambda);
    ConeMembership out{true, e[1]};
    for (int i = 1; i <= label.m; ++i) {
        out.margin = std::min(out.margin, e[i]);
        if (e[i] / binomial(n, i) <= tol) out.inside = false;
    }
    return out;
}

inline ConeMembership cone_membership(ConeLabel label, const SymMatrix& m, double tol = 1e-12) {
    return cone_membership(label, Spectrum(m).span(), tol);
}

/// F(M) and F^{ij}(M) of the curvature functional.
struct FunctionalValue {
    double value = 0.0;
    SymMatrix gradient;
};

/// Cone in which the flavor's functional is elliptic.
inline ConeLabel ellipticity_cone(const ProblemSpec& spec) {
    return spec.flavor == Flavor::ChristoffelMinkowski ? ConeLabel{spec.n - spec.k} : ConeLabel{spec.n};
}

inline FunctionalValue curvature_functional(const ProblemSpec& spec, const Spectrum& s) {
    const int n = spec.n, k = spec.k, m = spec.degree();
    if (s.dim() != n) throw InvalidArgument("matrix dimension does not match problem dimension n");
    if (m < 1) throw InvalidArgument("curvature functional needs k <= n-1");

    const auto cone = cone_membership(ellipticity_cone(spec), s.span());
    if (!cone.inside) {
        throw EllipticityLoss("matrix outside Gamma_" + std::to_string(ellipticity_cone(spec).m) +
                                  " (margin " + std::to_string(cone.margin) + ")",
                              cone.margin);
    }

    const auto e = elem_sym_all(s.span());
    Eigen::VectorXd dlam(n);
    double value = 0.0;
    if (spec.flavor == Flavor::ChristoffelMinkowski) {
        const double pm = e[m] / binomial(n, m);
        value = std::pow(pm, 1.0 / m);
        const double outer = value / (m * pm);  // d(p^{1/m})/dp
        for (int i = 0; i < n; ++i) dlam(i) = outer * elem_sym_excluding(m - 1, s.span(), {i}) / binomial(n, m);
    } else {
        const double pn = e[n] / binomial(n, n);
        const double pk = e[k] / binomial(n, k);
        value = std::pow(pn / pk, 1.0 / m);
        for (int i = 0; i < n; ++i) {
            double logder = elem_sym_excluding(n - 1, s.span(), {i}) / e[n];
            if (k > 0) logder -= elem_sym_excluding(k - 1, s.span(), {i}) / e[k];
            dlam(i) = value / m * logder;
        }
    }
    return {value, s.rotate_back(dlam)};
}

inline FunctionalValue curvature_functional(const ProblemSpec& spec, const SymMatrix& mtx) {
    return curvature_functional(spec, Spectrum(mtx));
}

}  // namespace horo
