#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace horo {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: wrong sizes, out-of-range parameters, non-symmetric data.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

/// A matrix left the Gårding cone required by the curvature functional.
class EllipticityLoss : public Error {
public:
    EllipticityLoss(const std::string& what, double margin, std::size_t node = kNoNode)
        : Error(what), margin_(margin), node_(node) {}
    double margin() const noexcept { return margin_; }
    std::size_t node() const noexcept { return node_; }

private:
    double margin_;
    std::size_t node_;
};

/// A body that is not strictly h-convex where strictness is required.
class NotStrictlyHConvex : public Error {
public:
    NotStrictlyHConvex(const std::string& what, std::size_t node, double min_eigenvalue)
        : Error(what), node_(node), min_eigenvalue_(min_eigenvalue) {}
    std::size_t node() const noexcept { return node_; }
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    std::size_t node_;
    double min_eigenvalue_;
};

/// Support data that does not describe an h-convex body (phi < 1 or A not PSD).
class InvalidBody : public Error {
public:
    InvalidBody(const std::string& what, std::size_t node, double value)
        : Error(what), node_(node), value_(value) {}
    std::size_t node() const noexcept { return node_; }
    double value() const noexcept { return value_; }

private:
    std::size_t node_;
    double value_;
};

/// No constant solution in the admissible region (barrier violated).
class NoAdmissibleRoot : public Error {
public:
    NoAdmissibleRoot(const std::string& what, double target, double threshold)
        : Error(what), target_(target), threshold_(threshold) {}
    /// Level the profile had to reach, gamma^{-1/(n-k)}.
    double target() const noexcept { return target_; }
    /// Smallest admissible level.
    double threshold() const noexcept { return threshold_; }

private:
    double target_;
    double threshold_;
};

/// Failures raised inside the Newton iteration.
class NewtonError : public Error {
public:
    NewtonError(const std::string& what, std::size_t node = kNoNode,
                double value = std::numeric_limits<double>::quiet_NaN())
        : Error(what), node_(node), value_(value) {}
    std::size_t node() const noexcept { return node_; }
    double value() const noexcept { return value_; }

private:
    std::size_t node_;
    double value_;
};

class MaxIterationsExceeded : public NewtonError {
public:
    using NewtonError::NewtonError;
};

/// Line search could not keep the iterate inside the ellipticity cone.
class IterateEllipticityLoss : public NewtonError {
public:
    using NewtonError::NewtonError;
};

/// Iterate dropped below the admissible floor (1 + delta, or the q > 1 barrier).
class BarrierViolation : public NewtonError {
public:
    using NewtonError::NewtonError;
};

class SingularJacobian : public NewtonError {
public:
    using NewtonError::NewtonError;
};

/// The homotopy step underflowed before reaching t = 1.
class ContinuationStall : public Error {
public:
    ContinuationStall(const std::string& what, double t, double step)
        : Error(what), t_(t), step_(step) {}
    double t() const noexcept { return t_; }
    double step() const noexcept { return step_; }

private:
    double t_;
    double step_;
};

}  // namespace horo
