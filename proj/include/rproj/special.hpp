#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace rproj::special {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// 1 - Phi(z) without cancellation for large z.
inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

/// Inverse standard normal CDF.
inline double normal_quantile(double p) {
    if (p <= 0.0) {
        return -INFINITY;
    }
    if (p >= 1.0) {
        return INFINITY;
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Volume of the Euclidean ball of radius r in R^dim.
inline double ball_volume(int dim, double r) {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) * std::pow(r, dim) / (dim * std::tgamma(0.5 * dim));
}

} // namespace rproj::special
