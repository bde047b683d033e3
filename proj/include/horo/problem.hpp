#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "horo/errors.hpp"

namespace horo {

/// Which curvature functional closes the equation F(A[phi]) = phi^q f^{1/(n-k)}.
enum class Flavor {
    ChristoffelMinkowski,  ///< F = p_{n-k}^{1/(n-k)}, ellipticity cone Gamma_{n-k}
    WeingartenQuotient,    ///< F = (p_n / p_k)^{1/(n-k)}, ellipticity cone Gamma_n
};

inline std::string_view to_string(Flavor f) {
    return f == Flavor::ChristoffelMinkowski ? "CM" : "WQ";
}

inline Flavor parse_flavor(std::string_view s) {
    if (s == "CM" || s == "cm") return Flavor::ChristoffelMinkowski;
    if (s == "WQ" || s == "wq") return Flavor::WeingartenQuotient;
    throw InvalidArgument("unknown operator flavor '" + std::string(s) + "' (expected CM or WQ)");
}

/// Parameters of one equation instance (the prescribed datum f is carried separately).
struct ProblemSpec {
    int n = 2;
    int k = 1;
    double p = 0.0;
    Flavor flavor = Flavor::ChristoffelMinkowski;

    /// Exponent of phi on the right-hand side.
    double q() const { return (n + p) / (n - k) - 1.0; }

    /// Degree n - k of the curvature functional.
    int degree() const { return n - k; }

    /// Range rules: n >= 1, 0 <= k <= n-1, p >= -n (n >= 2) or p >= -7 (n = 1).
    void validate() const {
        if (n < 1) throw InvalidArgument("n must be >= 1");
        if (k < 0 || k > n - 1) throw InvalidArgument("k must satisfy 0 <= k <= n-1");
        if (!std::isfinite(p)) throw InvalidArgument("p must be finite");
        const double p_min = (n == 1) ? -7.0 : -static_cast<double>(n);
        if (p < p_min) {
            throw InvalidArgument("p = " + std::to_string(p) + " is below the admissible minimum " +
                                  std::to_string(p_min));
        }
    }
};

}  // namespace horo
