#pragma once

// Distances between finitely supported measures and from a measure to the
// centered Gaussian sigma Z: the exact 1-D Wasserstein distance, exact optimal
// transport, the bounded-Lipschitz LP and Monte Carlo Gaussian references.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rproj/data.hpp"
#include "rproj/error.hpp"
#include "rproj/rng.hpp"
#include "rproj/special.hpp"
#include "rproj/transport.hpp"

namespace rproj {

enum class DistanceMethod { w1_1d_exact, ot_lp, bl_lp };

inline std::string to_string(DistanceMethod m) {
    switch (m) {
    case DistanceMethod::w1_1d_exact:
        return "w1-1d-exact";
    case DistanceMethod::ot_lp:
        return "ot-lp";
    case DistanceMethod::bl_lp:
        return "bl-lp";
    }
    return "unknown";
}

enum class DistanceKind { w1, bl };

struct DistanceEstimate {
    double value = 0.0;
    DistanceMethod method = DistanceMethod::ot_lp;
    int ref_sample_size = 0;
    int reps = 0;
    std::uint64_t seed = 0;
    std::optional<double> std_error;
    /// Certified optimality gap of the LP solve(s); zero for closed forms.
    double lp_gap = 0.0;
};

inline nlohmann::json to_json(const DistanceEstimate& e) {
    nlohmann::json j;
    j["value"] = e.value;
    j["method"] = to_string(e.method);
    j["m"] = e.ref_sample_size;
    j["reps"] = e.reps;
    j["seed"] = e.seed;
    j["std_error"] = e.std_error ? nlohmann::json(*e.std_error) : nlohmann::json(nullptr);
    return j;
}

namespace detail {

// Euclidean ground cost between rows of two k-column matrices, optionally
// truncated at a cap.
struct EuclideanCost {
    const double* x;
    const double* y;
    std::int64_t k;
    double cap;

    double operator()(std::int64_t i, std::int64_t j) const {
        const double* a = x + i * k;
        const double* b = y + j * k;
        double s = 0.0;
        for (std::int64_t r = 0; r < k; ++r) {
            const double t = a[r] - b[r];
            s += t * t;
        }
        return std::min(std::sqrt(s), cap);
    }
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline TransportSolution transport_between(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, double cap) {
    require(mu.dim() == nu.dim(), ErrorKind::invalid_input,
            "distance: measures live in different dimensions (" + std::to_string(mu.dim()) + " vs " +
                std::to_string(nu.dim()) + ")");
    const RowMatrix x = mu.support();
    const RowMatrix y = nu.support();
    const double reach = x.rowwise().norm().maxCoeff() + y.rowwise().norm().maxCoeff();
    EuclideanCost cost{x.data(), y.data(), mu.dim(), cap};
    return solve_transport(mu.weights(), nu.weights(), cost, std::min(reach, cap));
}

inline void check_gap(const TransportSolution& s) {
    require(s.gap <= 1e-9 * std::max(1.0, s.cost), ErrorKind::numerical,
            "distance: LP optimality gap " + std::to_string(s.gap) + " above tolerance");
}

} // namespace detail

/// W1 between mu (k = 1) and N(0, sigma^2): the integral of |F_mu - Phi_sigma|
/// evaluated piecewise in closed form. Between consecutive atoms F_mu is a
/// constant c, and int Phi_sigma = t Phi(t/sigma) + sigma phi(t/sigma).
inline DistanceEstimate w1_exact_1d(const EmpiricalMeasure& mu, double sigma) {
    detail::require(mu.dim() == 1, ErrorKind::invalid_dimension, "w1_exact_1d: measure must be one-dimensional");
    detail::require(sigma > 0.0, ErrorKind::invalid_input, "w1_exact_1d: sigma must be positive");

    const int n = mu.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto& s = mu.support();
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s(a, 0) < s(b, 0); });

    auto antiderivative = [sigma](double t) {
        const double z = t / sigma;
        return t * special::normal_cdf(z) + sigma * special::normal_pdf(z);
    };
    // int_a^b |c - Phi_sigma(t)| dt for constant c in (0,1).
    auto piece = [&](double a, double b, double c) {
        if (b <= a) {
            return 0.0;
        }
        const double cross = sigma * special::normal_quantile(c);
        auto below = [&](double lo, double hi) { return c * (hi - lo) - (antiderivative(hi) - antiderivative(lo)); };
        auto above = [&](double lo, double hi) { return (antiderivative(hi) - antiderivative(lo)) - c * (hi - lo); };
        if (cross <= a) {
            return above(a, b);
        }
        if (cross >= b) {
            return below(a, b);
        }
        return below(a, cross) + above(cross, b);
    };

    const double first = s(order.front(), 0);
    const double last = s(order.back(), 0);
    double total = antiderivative(first);
    const double zl = last / sigma;
    total += sigma * (special::normal_pdf(zl) - zl * special::normal_sf(zl));

    double cum = 0.0;
    double comp = 0.0;
    for (int idx = 0; idx + 1 < n; ++idx) {
        const double w = mu.weights()(order[idx]);
        const double t = cum + w;
        comp += (cum >= w) ? (cum - t) + w : (w - t) + cum;
        cum = t;
        const double c = std::clamp(cum + comp, 0.0, 1.0);
        const double a = s(order[idx], 0);
        const double b = s(order[idx + 1], 0);
        if (c <= 0.0) {
            total += antiderivative(b) - antiderivative(a);
        } else if (c >= 1.0) {
            total += (b - a) - (antiderivative(b) - antiderivative(a));
        } else {
            total += piece(a, b, c);
        }
    }

    DistanceEstimate e;
    e.value = std::max(0.0, total);
    e.method = DistanceMethod::w1_1d_exact;
    return e;
}

/// Exact Kantorovich W1 with Euclidean ground cost.
inline DistanceEstimate w1_discrete(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const auto sol = detail::transport_between(mu, nu, std::numeric_limits<double>::infinity());
    detail::check_gap(sol);
    DistanceEstimate e;
    e.value = std::max(0.0, sol.cost);
    e.method = DistanceMethod::ot_lp;
    e.lp_gap = sol.gap;
    return e;
}

/// Bounded-Lipschitz distance: max sum_s f_s (mu_s - nu_s) over |f_s| <= 1 and
/// |f_s - f_t| <= |z_s - z_t|. Its LP dual is optimal transport with ground
/// cost min(|x - y|, 2) (mass may detour through a unit-cost sink and source),
/// which is what gets solved.
inline DistanceEstimate bl_discrete(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
    const auto sol = detail::transport_between(mu, nu, 2.0);
    detail::check_gap(sol);
    DistanceEstimate e;
    e.value = std::clamp(sol.cost, 0.0, 2.0);
    e.method = DistanceMethod::bl_lp;
    e.lp_gap = sol.gap;
    return e;
}

/// m iid N(0, sigma^2 I_k) points with weight 1/m.
inline EmpiricalMeasure gaussian_sample(int k, double sigma, int m, std::uint64_t seed) {
    detail::require(k >= 1, ErrorKind::invalid_dimension, "gaussian_sample: k must be >= 1");
    detail::require(m >= 1, ErrorKind::invalid_input, "gaussian_sample: m must be >= 1");
    detail::require(sigma > 0.0, ErrorKind::degenerate, "gaussian_sample: sigma must be positive");
    CounterRng rng(seed);
    Eigen::MatrixXd z(m, k);
    for (int i = 0; i < m; ++i) {
        for (int r = 0; r < k; ++r) {
            z(i, r) = sigma * rng.normal();
        }
    }
    return EmpiricalMeasure::uniform(std::move(z));
}

/// Seed of the r-th Gaussian reference sample drawn by dist_to_gaussian.
inline std::uint64_t reference_seed(std::uint64_t seed, int rep) {
    return derive_seed(seed, {static_cast<std::uint64_t>(rep)});
}

struct GaussianDistanceOptions {
    int m = 4096;
    int reps = 8;
    /// For k = 1 and kind = w1, use the closed form instead of references.
    bool exact_1d = true;
};

/// Distance from mu to sigma Z. Exact for (k = 1, w1); otherwise the mean over
/// reps independent size-m Gaussian references of the exact discrete distance,
/// with a jackknife standard error across reps. The Monte Carlo version
/// estimates d(mu, gamma_m), which is within E d(gamma_m, gamma) of the target.
inline DistanceEstimate dist_to_gaussian(const EmpiricalMeasure& mu, double sigma, DistanceKind kind,
                                         const GaussianDistanceOptions& opt, std::uint64_t seed) {
    detail::require(sigma > 0.0, ErrorKind::invalid_input, "dist_to_gaussian: sigma must be positive");
    detail::require(opt.m >= 1 && opt.reps >= 1, ErrorKind::invalid_input, "dist_to_gaussian: need m, reps >= 1");
    if (kind == DistanceKind::w1 && mu.dim() == 1 && opt.exact_1d) {
        auto e = w1_exact_1d(mu, sigma);
        e.seed = seed;
        return e;
    }
    std::vector<double> values(opt.reps);
    double worst_gap = 0.0;
    for (int r = 0; r < opt.reps; ++r) {
        const auto ref = gaussian_sample(mu.dim(), sigma, opt.m, reference_seed(seed, r));
        const auto d = (kind == DistanceKind::w1) ? w1_discrete(mu, ref) : bl_discrete(mu, ref);
        values[r] = d.value;
        worst_gap = std::max(worst_gap, d.lp_gap);
    }
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    const double mean = total / opt.reps;

    DistanceEstimate e;
    e.value = mean;
    e.method = (kind == DistanceKind::w1) ? DistanceMethod::ot_lp : DistanceMethod::bl_lp;
    e.ref_sample_size = opt.m;
    e.reps = opt.reps;
    e.seed = seed;
    e.lp_gap = worst_gap;
    if (opt.reps >= 2) {
        const double r = opt.reps;
        double ss = 0.0;
        for (double v : values) {
            const double loo = (total - v) / (r - 1.0);
            ss += (loo - mean) * (loo - mean);
        }
        e.std_error = std::sqrt((r - 1.0) / r * ss);
    }
    return e;
}

} // namespace rproj
