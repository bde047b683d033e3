#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "horo/errors.hpp"
#include "horo/symfunc.hpp"

namespace horo {

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gauss-Legendre nodes on [-1, 1], returned in decreasing order (increasing colatitude).
inline void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = z;
            for (int l = 2; l <= n; ++l) {
                const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute P_n' at the converged node for the weight
        double p0 = 1.0, p1 = z;
        for (int l = 2; l <= n; ++l) {
            const double p2 = ((2.0 * l - 1.0) * z * p1 - (l - 1.0) * p0) / l;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        x(i) = z;
        w(i) = 2.0 / ((1.0 - z * z) * dp * dp);
    }
}

/// Polynomial collocation derivative on arbitrary distinct nodes (barycentric form).
inline Eigen::MatrixXd collocation_derivative(const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd bary(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double prod = 1.0;
        for (Eigen::Index k = 0; k < n; ++k)
            if (k != j) prod *= (x(j) - x(k));
        bary(j) = 1.0 / prod;
    }
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            d(i, j) = (bary(j) / bary(i)) / (x(i) - x(j));
            diag -= d(i, j);
        }
        d(i, i) = diag;
    }
    return d;
}

/// Periodic spectral first and second derivative on N uniform nodes x_j = 2 pi j / N, N even.
inline void fourier_derivatives(int n, Eigen::MatrixXd& d1, Eigen::MatrixXd& d2) {
    const double h = 2.0 * std::numbers::pi / n;
    d1 = Eigen::MatrixXd::Zero(n, n);
    d2 = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n; ++k) {
            if (j == k) {
                d2(j, k) = -std::numbers::pi * std::numbers::pi / (3.0 * h * h) - 1.0 / 6.0;
                continue;
            }
            const int diff = j - k;
            const double sign = (diff % 2 == 0) ? 1.0 : -1.0;
            const double half = diff * h / 2.0;
            d1(j, k) = 0.5 * sign / std::tan(half);
            d2(j, k) = -0.5 * sign / (std::sin(half) * std::sin(half));
        }
    }
}

}  // namespace detail

/// Symmetric per-node matrix field in the node's orthonormal tangent frame.
using FrameMatrices = std::vector<SymMatrix>;

/// Coefficients of a second-order operator
///   eta -> sum_ab W_ab (D^2 eta)_ab + sum_a v_a (D eta)_a + c eta
/// given per node in the orthonormal frame.
struct OperatorCoefficients {
    FrameMatrices second;    ///< W, one symmetric matrix per node
    Eigen::MatrixXd first;   ///< v, N x dim
    Eigen::VectorXd zeroth;  ///< c
};

/// Nodal discretization of S^1 or S^2 with quadrature, antipodal pairing and
/// covariant differentiation in the orthonormal frame.
///
/// S^1: uniform periodic nodes, Fourier differentiation.
/// S^2: Gauss-Legendre nodes in cos(theta) x uniform longitude. Each latitude
/// ring is split into even/odd azimuthal parts with the phi -> phi + pi shift;
/// even parts are polynomials in x = cos(theta), odd parts are sin(theta) times a
/// polynomial, so Legendre collocation stays exact for band-limited data. Frame:
/// e1 = d_theta, e2 = (1/sin theta) d_phi. Poles are never nodes.
class SphereGrid {
public:
    static std::shared_ptr<const SphereGrid> circle(int n_nodes) {
        if (n_nodes < 8 || n_nodes % 2 != 0) {
            throw InvalidArgument("S^1 grid needs an even node count >= 8");
        }
        auto g = std::shared_ptr<SphereGrid>(new SphereGrid());
        g->dim_ = 1;
        g->n_theta_ = n_nodes;
        g->n_phi_ = 1;
        const int n = n_nodes;
        g->nodes_.resize(n, 2);
        g->frames_.resize(n, 2);
        g->weights_ = Eigen::VectorXd::Constant(n, 2.0 * std::numbers::pi / n);
        g->angle_.resize(n);
        for (int j = 0; j < n; ++j) {
            const double t = 2.0 * std::numbers::pi * j / n;
            g->angle_(j) = t;
            g->nodes_.row(j) << std::cos(t), std::sin(t);
            g->frames_.row(j) << -std::sin(t), std::cos(t);
        }
        detail::fourier_derivatives(n, g->d1_, g->d2_);
        g->antipode_.resize(n);
        for (int j = 0; j < n; ++j) g->antipode_[j] = static_cast<std::size_t>((j + n / 2) % n);
        g->finish();
        return g;
    }

    static std::shared_ptr<const SphereGrid> sphere(int n_theta, int n_phi) {
        if (n_theta < 8) throw InvalidArgument("S^2 grid needs n_theta >= 8");
        if (n_phi < 8 || n_phi % 2 != 0) {
            throw InvalidArgument("S^2 grid needs an even n_phi >= 8 (antipodal pairing)");
        }
        auto g = std::shared_ptr<SphereGrid>(new SphereGrid());
        g->dim_ = 2;
        g->n_theta_ = n_theta;
        g->n_phi_ = n_phi;

        Eigen::VectorXd x, wx;
        detail::gauss_legendre(n_theta, x, wx);
        g->angle_.resize(n_theta);
        g->sin_.resize(n_theta);
        g->cos_.resize(n_theta);
        for (int j = 0; j < n_theta; ++j) {
            g->cos_(j) = x(j);
            g->sin_(j) = std::sqrt((1.0 - x(j)) * (1.0 + x(j)));
            g->angle_(j) = std::acos(x(j));
        }
        g->phi_.resize(n_phi);
        for (int l = 0; l < n_phi; ++l) g->phi_(l) = 2.0 * std::numbers::pi * l / n_phi;

        const int n = n_theta * n_phi;
        g->nodes_.resize(n, 3);
        g->frames_.resize(n, 6);
        g->weights_.resize(n);
        const double dphi = 2.0 * std::numbers::pi / n_phi;
        for (int j = 0; j < n_theta; ++j) {
            const double st = g->sin_(j), ct = g->cos_(j);
            for (int l = 0; l < n_phi; ++l) {
                const double sp = std::sin(g->phi_(l)), cp = std::cos(g->phi_(l));
                const int i = j * n_phi + l;
                g->nodes_.row(i) << st * cp, st * sp, ct;
                g->frames_.row(i) << ct * cp, ct * sp, -st, -sp, cp, 0.0;
                g->weights_(i) = wx(j) * dphi;
            }
        }

        const Eigen::MatrixXd dx = detail::collocation_derivative(x);
        const Eigen::VectorXd s = g->sin_, c = g->cos_;
        g->dt_even_ = -(s.asDiagonal() * dx);
        g->dt_odd_ = (Eigen::MatrixXd(c.asDiagonal()) - s.cwiseProduct(s).asDiagonal() * dx) *
                     s.cwiseInverse().asDiagonal();
        g->dtt_even_ = g->dt_odd_ * g->dt_even_;
        g->dtt_odd_ = g->dt_even_ * g->dt_odd_;
        detail::fourier_derivatives(n_phi, g->d1_, g->d2_);

        // P_even D_phi and P_odd D_phi: average / difference with the half-turn shift
        const int half = n_phi / 2;
        g->d1_even_.resize(n_phi, n_phi);
        g->d1_odd_.resize(n_phi, n_phi);
        for (int l = 0; l < n_phi; ++l) {
            const int ls = (l + half) % n_phi;
            g->d1_even_.row(l) = 0.5 * (g->d1_.row(l) + g->d1_.row(ls));
            g->d1_odd_.row(l) = 0.5 * (g->d1_.row(l) - g->d1_.row(ls));
        }

        g->antipode_.resize(n);
        for (int j = 0; j < n_theta; ++j)
            for (int l = 0; l < n_phi; ++l)
                g->antipode_[j * n_phi + l] =
                    static_cast<std::size_t>((n_theta - 1 - j) * n_phi + (l + half) % n_phi);
        g->finish();
        return g;
    }

    int dim() const { return dim_; }
    std::size_t size() const { return static_cast<std::size_t>(nodes_.rows()); }

    /// Unit vectors in R^{dim+1}, one row per node.
    const Eigen::MatrixXd& nodes() const { return nodes_; }
    Eigen::VectorXd node(std::size_t i) const { return nodes_.row(static_cast<Eigen::Index>(i)).transpose(); }

    /// Ambient coordinates of frame vector e_a at node i.
    Eigen::VectorXd tangent(std::size_t i, int a) const {
        const int amb = dim_ + 1;
        return frames_.row(static_cast<Eigen::Index>(i)).segment(a * amb, amb).transpose();
    }

    const Eigen::VectorXd& weights() const { return weights_; }
    const std::vector<std::size_t>& antipode() const { return antipode_; }

    /// One node of every antipodal pair (i < antipode(i)), in increasing order.
    const std::vector<std::size_t>& even_representatives() const { return reps_; }

    /// S^1: node count; S^2: colatitude count.
    int n_theta() const { return n_theta_; }
    /// S^2 longitude count (1 on S^1).
    int n_phi() const { return n_phi_; }
    /// S^1: node angle; S^2: colatitude of ring j.
    double theta(int j) const { return angle_(j); }
    double longitude(int l) const { return dim_ == 2 ? phi_(l) : 0.0; }

    /// |S^n|
    double area() const { return dim_ == 1 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi; }

    /// Frame gradient (N x dim) and Hessian of nodal values.
    void differentiate(const Eigen::VectorXd& v_in, Eigen::MatrixXd& grad, FrameMatrices& hess) const {
        const std::size_t n = size();
        if (static_cast<std::size_t>(v_in.size()) != n || n == 0) throw InvalidArgument("field size does not match grid");
        // derivatives annihilate constants; removing v(0) makes that exact in floating point
        const Eigen::VectorXd v = v_in.array() - v_in(0);
        grad.resize(static_cast<Eigen::Index>(n), dim_);
        hess.clear();
        hess.reserve(n);
        if (dim_ == 1) {
            grad.col(0) = d1_ * v;
            const Eigen::VectorXd vtt = d2_ * v;
            Eigen::MatrixXd m(1, 1);
            for (std::size_t i = 0; i < n; ++i) {
                m(0, 0) = vtt(static_cast<Eigen::Index>(i));
                hess.emplace_back(m);
            }
            return;
        }
        using detail::RowMatrix;
        const int nt = n_theta_, np = n_phi_, half = n_phi_ / 2;
        Eigen::Map<const RowMatrix> V(v.data(), nt, np);
        RowMatrix shifted(nt, np);
        for (int l = 0; l < np; ++l) shifted.col(l) = V.col((l + half) % np);
        const RowMatrix ve = 0.5 * (V + shifted);
        const RowMatrix vo = 0.5 * (V - shifted);
        const RowMatrix vt = dt_even_ * ve + dt_odd_ * vo;
        const RowMatrix vtt = dtt_even_ * ve + dtt_odd_ * vo;
        const RowMatrix vp = V * d1_.transpose();
        const RowMatrix vpp = V * d2_.transpose();
        const RowMatrix vtp = dt_even_ * (ve * d1_.transpose()) + dt_odd_ * (vo * d1_.transpose());
        Eigen::Matrix2d m;
        for (int j = 0; j < nt; ++j) {
            const double s = sin_(j), cot = cos_(j) / sin_(j);
            for (int l = 0; l < np; ++l) {
                const int i = j * np + l;
                grad(i, 0) = vt(j, l);
                grad(i, 1) = vp(j, l) / s;
                const double h12 = (vtp(j, l) - cot * vp(j, l)) / s;
                m << vtt(j, l), h12, h12, vpp(j, l) / (s * s) + cot * vt(j, l);
                hess.emplace_back(Eigen::MatrixXd(m));
            }
        }
    }

    /// Dense rows of the operator described by `c`, restricted to `rows`.
    /// Result is rows.size() x N.
    Eigen::MatrixXd assemble(const OperatorCoefficients& c, std::span<const std::size_t> rows) const {
        const Eigen::Index n = static_cast<Eigen::Index>(size());
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), n);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = static_cast<Eigen::Index>(rows[r]);
            const SymMatrix& w = c.second[rows[r]];
            const auto ri = static_cast<Eigen::Index>(r);
            if (dim_ == 1) {
                out.row(ri) = w(0, 0) * d2_.row(i) + c.first(i, 0) * d1_.row(i);
                out(ri, i) += c.zeroth(i);
                continue;
            }
            const int np = n_phi_, half = n_phi_ / 2;
            const int j = static_cast<int>(i) / np, l = static_cast<int>(i) % np;
            const double s = sin_(j), cot = cos_(j) / sin_(j);
            const double w11 = w(0, 0), w12 = w(0, 1), w22 = w(1, 1);
            const double a_tt = w11;
            const double a_t = w22 * cot + c.first(i, 0);
            const double a_p = -2.0 * w12 * cot / s + c.first(i, 1) / s;
            const double a_pp = w22 / (s * s);
            const double a_tp = 2.0 * w12 / s;
            const int ls = (l + half) % np;
            for (int jj = 0; jj < n_theta_; ++jj) {
                const double te = a_tt * dtt_even_(j, jj) + a_t * dt_even_(j, jj);
                const double to = a_tt * dtt_odd_(j, jj) + a_t * dt_odd_(j, jj);
                out(ri, jj * np + l) += 0.5 * (te + to);
                out(ri, jj * np + ls) += 0.5 * (te - to);
                const double ge = a_tp * dt_even_(j, jj), go = a_tp * dt_odd_(j, jj);
                for (int ll = 0; ll < np; ++ll) out(ri, jj * np + ll) += ge * d1_even_(l, ll) + go * d1_odd_(l, ll);
            }
            for (int ll = 0; ll < np; ++ll) out(ri, j * np + ll) += a_p * d1_(l, ll) + a_pp * d2_(l, ll);
            out(ri, i) += c.zeroth(i);
        }
        return out;
    }

    /// Fold the columns of an operator block onto the even subspace: column s of
    /// the result is col(rep_s) + col(antipode(rep_s)).
    Eigen::MatrixXd fold_even_columns(const Eigen::MatrixXd& block) const {
        Eigen::MatrixXd out(block.rows(), static_cast<Eigen::Index>(reps_.size()));
        for (std::size_t s = 0; s < reps_.size(); ++s) {
            out.col(static_cast<Eigen::Index>(s)) = block.col(static_cast<Eigen::Index>(reps_[s])) +
                                                    block.col(static_cast<Eigen::Index>(antipode_[reps_[s]]));
        }
        return out;
    }

    Eigen::VectorXd restrict_even(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(reps_.size()));
        for (std::size_t s = 0; s < reps_.size(); ++s) out(static_cast<Eigen::Index>(s)) = v(static_cast<Eigen::Index>(reps_[s]));
        return out;
    }

    Eigen::VectorXd expand_even(const Eigen::VectorXd& r) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        for (std::size_t s = 0; s < reps_.size(); ++s) {
            out(static_cast<Eigen::Index>(reps_[s])) = r(static_cast<Eigen::Index>(s));
            out(static_cast<Eigen::Index>(antipode_[reps_[s]])) = r(static_cast<Eigen::Index>(s));
        }
        return out;
    }

private:
    SphereGrid() = default;

    void finish() {
        reps_.clear();
        for (std::size_t i = 0; i < antipode_.size(); ++i)
            if (i < antipode_[i]) reps_.push_back(i);
    }

    int dim_ = 0;
    int n_theta_ = 0;
    int n_phi_ = 0;
    Eigen::MatrixXd nodes_;
    Eigen::MatrixXd frames_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd angle_;
    Eigen::VectorXd phi_;
    Eigen::VectorXd sin_, cos_;
    std::vector<std::size_t> antipode_;
    std::vector<std::size_t> reps_;

    // S^1: d1_/d2_ act on nodes. S^2: d1_/d2_ act along longitude.
    Eigen::MatrixXd d1_, d2_;
    Eigen::MatrixXd d1_even_, d1_odd_;
    Eigen::MatrixXd dt_even_, dt_odd_, dtt_even_, dtt_odd_;
};

using GridPtr = std::shared_ptr<const SphereGrid>;

inline GridPtr build_grid(int dim, int n_theta, int n_phi = 0) {
    if (dim == 1) return SphereGrid::circle(n_theta);
    if (dim == 2) return SphereGrid::sphere(n_theta, n_phi);
    throw InvalidArgument("grids exist for S^1 and S^2 only");
}

enum class Parity { Even, General };

/// Values of a function on a grid, with a tracked parity tag.
class ScalarField {
public:
    ScalarField(GridPtr grid, Eigen::VectorXd values, Parity parity = Parity::General)
        : grid_(std::move(grid)), values_(std::move(values)), parity_(parity) {
        if (!grid_) throw InvalidArgument("ScalarField needs a grid");
        if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
            throw InvalidArgument("ScalarField size does not match grid");
        }
        if (parity_ == Parity::Even) {
            const auto& ap = grid_->antipode();
            for (std::size_t i = 0; i < ap.size(); ++i) {
                const double a = values_(static_cast<Eigen::Index>(i)), b = values_(static_cast<Eigen::Index>(ap[i]));
                if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)})) {
                    throw InvalidArgument("field tagged even differs at antipodal node " + std::to_string(i));
                }
            }
        }
    }

    static ScalarField constant(GridPtr grid, double c) {
        const auto n = static_cast<Eigen::Index>(grid->size());
        return ScalarField(std::move(grid), Eigen::VectorXd::Constant(n, c), Parity::Even);
    }

    /// Samples fn(z) at every node; z is the ambient unit vector.
    static ScalarField sample(GridPtr grid, const std::function<double(const Eigen::VectorXd&)>& fn,
                              Parity parity = Parity::General) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(grid->size()));
        for (std::size_t i = 0; i < grid->size(); ++i) v(static_cast<Eigen::Index>(i)) = fn(grid->node(i));
        return ScalarField(std::move(grid), std::move(v), parity);
    }

    const SphereGrid& grid() const { return *grid_; }
    const GridPtr& grid_ptr() const { return grid_; }
    const Eigen::VectorXd& values() const { return values_; }
    Parity parity() const { return parity_; }
    std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_(static_cast<Eigen::Index>(i)); }
    double min() const { return values_.minCoeff(); }
    double max() const { return values_.maxCoeff(); }

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
    Parity parity_;
};

/// Per-node gradient components in the orthonormal frame.
struct CovectorField {
    GridPtr grid;
    Eigen::MatrixXd components;  ///< N x dim

    double norm(std::size_t i) const { return components.row(static_cast<Eigen::Index>(i)).norm(); }
};

/// Per-node symmetric matrix in the orthonormal frame.
struct FrameField {
    GridPtr grid;
    FrameMatrices matrices;

    const SymMatrix& operator[](std::size_t i) const { return matrices[i]; }
    std::size_t size() const { return matrices.size(); }
};

/// First and second covariant derivatives computed together.
struct Derivatives {
    CovectorField gradient;
    FrameField hessian;
};

inline Derivatives derivatives(const ScalarField& phi) {
    Derivatives d{{phi.grid_ptr(), {}}, {phi.grid_ptr(), {}}};
    phi.grid().differentiate(phi.values(), d.gradient.components, d.hessian.matrices);
    return d;
}

inline CovectorField grad(const ScalarField& phi) { return derivatives(phi).gradient; }
inline FrameField hess(const ScalarField& phi) { return derivatives(phi).hessian; }

/// Laplace-Beltrami operator as the trace of hess.
inline ScalarField laplace(const ScalarField& phi) {
    const auto h = hess(phi);
    Eigen::VectorXd v(static_cast<Eigen::Index>(phi.size()));
    for (std::size_t i = 0; i < phi.size(); ++i) v(static_cast<Eigen::Index>(i)) = h[i].mat().trace();
    return ScalarField(phi.grid_ptr(), std::move(v), Parity::General);
}

/// Quadrature sum of w_i phi_i.
inline double integrate(const ScalarField& phi) { return phi.grid().weights().dot(phi.values()); }

/// (phi(z) + phi(-z)) / 2.
inline ScalarField even_project(const ScalarField& phi) {
    const auto& ap = phi.grid().antipode();
    Eigen::VectorXd v(static_cast<Eigen::Index>(phi.size()));
    for (std::size_t i = 0; i < ap.size(); ++i) {
        v(static_cast<Eigen::Index>(i)) = 0.5 * (phi[i] + phi[ap[i]]);
    }
    return ScalarField(phi.grid_ptr(), std::move(v), Parity::Even);
}

}  // namespace horo
