#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "tensorlift/errors.hpp"

namespace tensorlift {

/// Norm orders are plain doubles in [1, inf]; use this for the infinite case.
inline constexpr double inf_norm = std::numeric_limits<double>::infinity();

inline void require_norm_order(double p) {
    if (!(p >= 1.0))
        throw InvalidParameters("norm order must satisfy p >= 1 (use inf_norm for the sup norm)");
}

/// Entrywise p-norm of any Eigen expression, with p = inf meaning max |x_i|.
template <typename Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& x, double p) {
    require_norm_order(p);
    if (std::isinf(p)) return x.derived().cwiseAbs().maxCoeff();
    if (p == 1.0) return x.derived().cwiseAbs().sum();
    if (p == 2.0) return x.derived().norm();
    return std::pow(x.derived().cwiseAbs().array().pow(p).sum(), 1.0 / p);
}

/// x^(1/p) with the convention x^(1/inf) = 1 for x > 0.
inline double root_pow(double x, double p) {
    if (std::isinf(p)) return 1.0;
    return std::pow(x, 1.0 / p);
}

/// a <= b up to a tiny relative slack, for comparing analytically equal floats.
inline bool leq_with_slack(double a, double b, double rel = 1e-12) {
    if (a <= b) return true;
    return a - b <= rel * std::max(std::abs(a), std::abs(b));
}

} // namespace tensorlift
