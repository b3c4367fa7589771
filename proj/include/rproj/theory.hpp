#pragma once

// Closed-form bound calculators for random projections: the annealed
// Wasserstein bound, concentration tails on the Stiefel manifold, the mean
// bounded-Lipschitz bound and its proof chain, covering numbers of smooth
// function classes and the Dudley entropy integral.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include "json.hpp"

#include "rproj/csv.hpp"
#include "rproj/error.hpp"
#include "rproj/special.hpp"

namespace rproj {

struct BoundInputs {
    int d = 0;
    int k = 0;
    double sigma = 0.0;
    double a_stat = 0.0;
    double b_stat = 0.0;
    /// The unspecified absolute constant C > 1; no default on purpose.
    std::optional<double> c_const;
    double eps = 0.0;
};

struct SmoothnessClassSpec {
    int m = 2;
    int dim = 1;
    double radius = 1.0;
    double m_norm = 1.0;
    double lip_const = 1.0;
};

enum class TailCenter { median, mean };
enum class CoverNorm { sup, c1 };
enum class ChainStage { finalX, simpler1, simpler2, simplest };

inline std::string to_string(ChainStage s) {
    switch (s) {
    case ChainStage::finalX:
        return "finalX";
    case ChainStage::simpler1:
        return "simpler1";
    case ChainStage::simpler2:
        return "simpler2";
    case ChainStage::simplest:
        return "simplest";
    }
    return "unknown";
}

namespace detail {

inline std::string num(double v) { return csv::format_double(v); }

inline void check_inputs(const BoundInputs& in) {
    require(in.d >= 1 && in.k >= 1, ErrorKind::invalid_dimension, "bounds: d and k must be positive");
    require(in.sigma > 0.0, ErrorKind::invalid_input, "bounds: sigma must be positive");
    require(in.a_stat >= 0.0, ErrorKind::invalid_input, "bounds: A must be nonnegative");
    require(in.b_stat > 0.0, ErrorKind::invalid_input, "bounds: B must be positive");
    require(!in.c_const || *in.c_const > 1.0, ErrorKind::invalid_input, "bounds: C must exceed 1");
}

inline double need_c(const BoundInputs& in) {
    require(in.c_const.has_value(), ErrorKind::invalid_input, "bounds: the constant C is required");
    return *in.c_const;
}

inline void check_d2(int d) { require(d >= 2, ErrorKind::invalid_dimension, "bounds: need d >= 2"); }

// C^k B / d^{2/(9k+4)}: first term of the mean bounded-Lipschitz bound and
// the last stage of the bound chain.
inline double bl_leading_term(double b, int d, int k, double c) {
    return std::pow(c, k) * b / std::pow(static_cast<double>(d), 2.0 / (9.0 * k + 4.0));
}

inline double sqrt_k_gamma(int k) { return std::sqrt(k * std::tgamma(0.5 * k)); }

} // namespace detail

/// (sigma sqrt(k) (A+1) + sigma k) / (d-1).
inline double mean_w1_bound(const BoundInputs& in) {
    detail::check_inputs(in);
    detail::check_d2(in.d);
    const double k = in.k;
    return (in.sigma * std::sqrt(k) * (in.a_stat + 1.0) + in.sigma * k) / (in.d - 1.0);
}

inline double conc_threshold(const BoundInputs& in) {
    detail::check_inputs(in);
    return 2.0 * std::numbers::pi * std::sqrt(in.b_stat / in.d);
}

/// sqrt(pi/2) exp(-d eps^2 / (32 B)), for eps > 2 pi sqrt(B/d).
inline double conc_tail(const BoundInputs& in) {
    const double thr = conc_threshold(in);
    detail::require(in.eps > thr, ErrorKind::out_of_regime,
                    "conc_tail: eps = " + detail::num(in.eps) + " must exceed 2*pi*sqrt(B/d) = " + detail::num(thr));
    return std::sqrt(std::numbers::pi / 2.0) * std::exp(-in.d * in.eps * in.eps / (32.0 * in.b_stat));
}

inline double mean_bl_bound(const BoundInputs& in) {
    detail::check_inputs(in);
    detail::check_d2(in.d);
    return detail::bl_leading_term(in.b_stat, in.d, in.k, detail::need_c(in)) + mean_w1_bound(in);
}

/// Smallest eps at which the combined tail applies: twice the mean BL bound.
inline double combined_threshold(const BoundInputs& in) {
    detail::check_inputs(in);
    detail::check_d2(in.d);
    const double k = in.k;
    return 2.0 * detail::bl_leading_term(in.b_stat, in.d, in.k, detail::need_c(in)) +
           (2.0 * in.sigma * std::sqrt(k) * (in.a_stat + 1.0) + 2.0 * in.sigma * k) / (in.d - 1.0);
}

/// Tail of d_BL(X_theta, sigma Z) itself: sqrt(pi/2) exp(-d eps^2 / (128 B)).
inline double combined_tail(const BoundInputs& in) {
    const double thr = combined_threshold(in);
    detail::require(in.eps >= thr, ErrorKind::out_of_regime,
                    "combined_tail: eps = " + detail::num(in.eps) + " is below the threshold " + detail::num(thr));
    return std::sqrt(std::numbers::pi / 2.0) * std::exp(-in.d * in.eps * in.eps / (128.0 * in.b_stat));
}

/// Concentration of an L-Lipschitz function on the Stiefel manifold about its
/// median or its mean.
inline double lipschitz_conc_tail(double eps, int d, double lip, TailCenter about) {
    detail::require(d >= 1, ErrorKind::invalid_dimension, "lipschitz_conc_tail: d must be positive");
    detail::require(eps > 0.0 && lip > 0.0, ErrorKind::invalid_input,
                    "lipschitz_conc_tail: eps and L must be positive");
    double denom = 8.0;
    if (about == TailCenter::mean) {
        const double thr = 2.0 * std::numbers::pi * lip / std::sqrt(static_cast<double>(d));
        detail::require(eps > thr, ErrorKind::out_of_regime,
                        "lipschitz_conc_tail: eps = " + detail::num(eps) + " must exceed 2*pi*L/sqrt(d) = " +
                            detail::num(thr));
        denom = 32.0;
    }
    return std::sqrt(std::numbers::pi / 2.0) * std::exp(-d * eps * eps / (denom * lip * lip));
}

/// log N(C^m_1(B_R), eps) under the sup norm or the C^1 norm, B_R in R^dim.
inline double covering_log_bound(const SmoothnessClassSpec& spec, double eps, CoverNorm norm) {
    detail::require(spec.dim >= 1, ErrorKind::invalid_dimension, "covering_log_bound: dim must be positive");
    detail::require(spec.radius > 0.0, ErrorKind::invalid_input, "covering_log_bound: R must be positive");
    detail::require(spec.m >= 2, ErrorKind::out_of_regime, "covering_log_bound: need m >= 2");
    detail::require(eps > 0.0 && eps < 2.0, ErrorKind::out_of_regime, "covering_log_bound: need 0 < eps < 2");
    const double m = spec.m;
    const double dim = spec.dim;
    const double vol = special::ball_volume(spec.dim, spec.radius + 1.0);
    const double scale = std::exp(dim + m - 2.0);
    const double log5 = std::log(5.0);
    if (norm == CoverNorm::sup) {
        const double c0 = vol * (m + 4.0) * std::numbers::ln2 * std::pow(5.0, dim / m);
        return (2.0 * log5 - std::log(eps) + c0 / std::pow(eps, dim / m)) * scale;
    }
    const double c1 = vol * (m + 4.0) * std::numbers::ln2 * std::pow(5.0, dim / (m - 1.0));
    return (3.0 * log5 - m / (m - 1.0) * std::log(eps) + c1 / std::pow(eps, dim / (m - 1.0))) * scale;
}

/// c * int_0^D sqrt(log_cover(eps)) d eps.
///
/// The interval is cut into dyadic pieces [D 2^{-j-1}, D 2^{-j}] so the
/// singularity at 0 never sits inside a Gauss-Kronrod panel; pieces are added
/// until the geometric tail estimate is negligible. Pieces that stop
/// shrinking mean the integral diverges.
inline double dudley_bound(const std::function<double(double)>& log_cover, double diameter, double c_const) {
    detail::require(diameter > 0.0, ErrorKind::invalid_input, "dudley_bound: diameter must be positive");
    detail::require(c_const > 0.0, ErrorKind::invalid_input, "dudley_bound: constant must be positive");
    auto integrand = [&](double e) {
        const double v = log_cover(e);
        if (!std::isfinite(v)) {
            detail::fail(ErrorKind::numerical,
                         "dudley_bound: log covering number is not finite at eps = " + detail::num(e) +
                             "; entropy integral diverges");
        }
        detail::require(v >= 0.0, ErrorKind::invalid_input, "dudley_bound: log covering number is negative");
        return std::sqrt(v);
    };
    using Gk = boost::math::quadrature::gauss_kronrod<double, 21>;
    constexpr int min_pieces = 30;
    constexpr int max_pieces = 1000;
    double total = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int j = 0; j < max_pieces; ++j) {
        const double hi = std::ldexp(diameter, -j);
        const double lo = 0.5 * hi;
        if (lo == 0.0) {
            break;
        }
        double err = 0.0;
        const double piece = Gk::integrate(integrand, lo, hi, 15, 1e-12, &err);
        total += piece;
        stalled = (piece > 0.0 && piece >= 0.75 * prev) ? stalled + 1 : 0;
        if (stalled >= 40) {
            detail::fail(ErrorKind::numerical, "dudley_bound: entropy integral diverges at 0");
        }
        if (j + 1 >= min_pieces) {
            // Remaining pieces shrink at least like the last ratio.
            const double ratio = (prev > 0.0 && std::isfinite(prev)) ? piece / prev : 0.0;
            const double tail = ratio < 1.0 ? piece * ratio / (1.0 - ratio) : std::numeric_limits<double>::infinity();
            if (tail <= 1e-7 * total || (piece == 0.0 && total == 0.0)) {
                return c_const * total;
            }
        }
        prev = piece;
    }
    detail::fail(ErrorKind::numerical, "dudley_bound: entropy integral did not converge");
}

/// sqrt(B/d) M C^{k+m} R^{k/2} m^{3/2} / ((2m-k-2) sqrt(k Gamma(k/2))), k = spec.dim.
inline double smooth_class_sup_bound(double b_stat, int d, const SmoothnessClassSpec& spec, double c_const) {
    detail::require(d >= 1 && spec.dim >= 1, ErrorKind::invalid_dimension, "smooth_class_sup_bound: bad dimension");
    detail::require(b_stat > 0.0 && spec.radius > 0.0 && spec.m_norm >= 0.0 && c_const > 0.0,
                    ErrorKind::invalid_input, "smooth_class_sup_bound: B, R, C must be positive and M >= 0");
    const int k = spec.dim;
    const int m = spec.m;
    detail::require(2 * m > k + 2, ErrorKind::out_of_regime,
                    "smooth_class_sup_bound: need 2m > k + 2 (m = " + std::to_string(m) + ", k = " +
                        std::to_string(k) + ")");
    return std::sqrt(b_stat / d) * spec.m_norm * std::pow(c_const, k + m) * std::pow(spec.radius, 0.5 * k) *
           std::pow(m, 1.5) / ((2.0 * m - k - 2.0) * detail::sqrt_k_gamma(k));
}

struct ChainParams {
    std::optional<double> radius;
    std::optional<double> t;
    std::optional<int> m;
};

struct ChainResult {
    double value = 0.0;
    double radius = 0.0;
    double t = 0.0;
    int m = 0;
};

/// The radius that turns the m = k stage into C^k B / d^{2/(9k+4)}.
inline double chain_radius(int d, int k) {
    return std::pow(d / std::pow(static_cast<double>(k), 1.5 * k - 2.0), 1.0 / (9.0 * k + 4.0));
}

/// Successive upper bounds on E sup_f X_f over C^1_1(R^k), from the smoothed
/// and truncated form down to C^k B / d^{2/(9k+4)}.
///
/// finalX needs R, t, m; simpler1 (t = k/R^2) needs R, m; simpler2 (m = k)
/// needs R and defaults it to chain_radius; simplest needs nothing.
inline ChainResult bl_bound_chain(double b_stat, int d, int k, double c_const, ChainStage stage,
                                  const ChainParams& p = {}) {
    detail::check_d2(d);
    detail::require(k >= 1, ErrorKind::invalid_dimension, "bl_bound_chain: k must be positive");
    detail::require(b_stat > 0.0, ErrorKind::invalid_input, "bl_bound_chain: B must be positive");
    detail::require(c_const > 1.0, ErrorKind::invalid_input, "bl_bound_chain: C must exceed 1");
    const double kk = k;
    const double root = std::sqrt(b_stat / d);

    ChainResult r;
    if (stage == ChainStage::simpler2 || stage == ChainStage::simplest) {
        detail::require(k > 2, ErrorKind::out_of_regime,
                        "bl_bound_chain: stage " + to_string(stage) +
                            " sets m = k, which needs k > 2 for 2m > k + 2 (the derivation applies it regardless)");
        r.m = k;
        if (stage == ChainStage::simplest) {
            r.radius = chain_radius(d, k);
            r.t = kk / (r.radius * r.radius);
            r.value = detail::bl_leading_term(b_stat, d, k, c_const);
            return r;
        }
        r.radius = p.radius.value_or(chain_radius(d, k));
        detail::require(r.radius > 0.0, ErrorKind::invalid_input, "bl_bound_chain: R must be positive");
        r.t = kk / (r.radius * r.radius);
        r.value = (2.0 * b_stat + 8.0) * kk / (r.radius * r.radius) +
                  root * std::pow(c_const * std::pow(kk, 0.75), kk) * std::pow(r.radius, 4.5 * kk);
        return r;
    }

    detail::require(p.radius.has_value() && p.m.has_value(), ErrorKind::invalid_input,
                    "bl_bound_chain: stage " + to_string(stage) + " needs R and m");
    r.radius = *p.radius;
    r.m = *p.m;
    detail::require(r.radius > 0.0, ErrorKind::invalid_input, "bl_bound_chain: R must be positive");
    detail::require(2 * r.m > k + 2, ErrorKind::out_of_regime,
                    "bl_bound_chain: need 2m > k + 2 (m = " + std::to_string(r.m) + ", k = " + std::to_string(k) +
                        ")");
    const double m = r.m;
    const double common =
        root * std::pow(c_const, kk + m) * std::pow(m, 2.0 * m) * std::pow(m, 1.5) /
        ((2.0 * m - kk - 2.0) * detail::sqrt_k_gamma(k));
    if (stage == ChainStage::finalX) {
        detail::require(p.t.has_value() && *p.t > 0.0, ErrorKind::invalid_input,
                        "bl_bound_chain: stage finalX needs t > 0");
        r.t = *p.t;
        r.value = 2.0 * b_stat * kk / (r.radius * r.radius) + 8.0 * r.t +
                  common * std::pow(r.radius, 0.5 * kk) / std::pow(r.t, m);
        return r;
    }
    r.t = kk / (r.radius * r.radius);
    r.value = (2.0 * b_stat + 8.0) * kk / (r.radius * r.radius) +
              common * std::pow(r.radius, 2.0 * m + 0.5 * kk) / std::pow(kk, m);
    return r;
}

/// Every bound that is in regime for the inputs, with out-of-regime entries
/// replaced by their error message.
inline nlohmann::json bound_report(const BoundInputs& in, const std::optional<SmoothnessClassSpec>& smooth = {}) {
    detail::check_inputs(in);
    nlohmann::json j;
    j["inputs"] = {{"d", in.d},
                   {"k", in.k},
                   {"sigma", in.sigma},
                   {"A", in.a_stat},
                   {"B", in.b_stat},
                   {"C", in.c_const ? nlohmann::json(*in.c_const) : nlohmann::json(nullptr)},
                   {"eps", in.eps}};
    nlohmann::json bounds = nlohmann::json::object();
    auto add = [&](const std::string& name, double vacuous_at, const std::function<double()>& f) {
        try {
            const double v = f();
            bounds[name] = {{"value", v}, {"is_vacuous", v >= vacuous_at}};
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::out_of_regime && e.kind() != ErrorKind::invalid_dimension) {
                throw;
            }
            bounds[name] = {{"value", nullptr}, {"out_of_regime", e.what()}};
        }
    };
    add("mean_w1_bound", std::numeric_limits<double>::infinity(), [&] { return mean_w1_bound(in); });
    add("conc_tail", 1.0, [&] { return conc_tail(in); });
    if (in.c_const) {
        add("mean_bl_bound", 2.0, [&] { return mean_bl_bound(in); });
        add("combined_tail", 1.0, [&] { return combined_tail(in); });
        add("bl_bound_chain_simplest", 2.0, [&] {
            return bl_bound_chain(in.b_stat, in.d, in.k, *in.c_const, ChainStage::simplest).value;
        });
        if (smooth) {
            add("smooth_class_sup_bound", std::numeric_limits<double>::infinity(),
                [&] { return smooth_class_sup_bound(in.b_stat, in.d, *smooth, *in.c_const); });
        }
    }
    if (smooth) {
        add("covering_log_bound_sup", std::numeric_limits<double>::infinity(),
            [&] { return covering_log_bound(*smooth, in.eps, CoverNorm::sup); });
        add("covering_log_bound_c1", std::numeric_limits<double>::infinity(),
            [&] { return covering_log_bound(*smooth, in.eps, CoverNorm::c1); });
        add("lipschitz_conc_tail_median", 1.0,
            [&] { return lipschitz_conc_tail(in.eps, in.d, smooth->lip_const, TailCenter::median); });
        add("lipschitz_conc_tail_mean", 1.0,
            [&] { return lipschitz_conc_tail(in.eps, in.d, smooth->lip_const, TailCenter::mean); });
    }
    j["bounds"] = bounds;
    return j;
}

} // namespace rproj
