#pragma once

// Monte Carlo checks of the exchangeable-pair expansions used for Gaussian
// approximation of random projections: the drift and quadratic moments of
// X_{theta,eps} - X_theta, the moments of Q = K C K^T, and the matrix F.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rproj/data.hpp"
#include "rproj/error.hpp"
#include "rproj/parallel.hpp"
#include "rproj/rng.hpp"
#include "rproj/stiefel.hpp"
#include "rproj/theory.hpp"

namespace rproj {

/// -(eps^2/d) x_theta.
inline Eigen::VectorXd predicted_drift(const Eigen::VectorXd& x_theta, double eps, int d) {
    detail::require(eps >= 0.0 && eps < 1.0, ErrorKind::invalid_input, "predicted_drift: eps must lie in [0,1)");
    detail::require(d >= 1, ErrorKind::invalid_dimension, "predicted_drift: d must be positive");
    return -(eps * eps / d) * x_theta;
}

/// (2 eps^2 / (d(d-1))) (|x|^2 I_k - x_theta x_theta^T).
inline Eigen::MatrixXd predicted_quadratic(const Eigen::VectorXd& x, const Eigen::VectorXd& x_theta, double eps,
                                           int d) {
    detail::require(eps >= 0.0 && eps < 1.0, ErrorKind::invalid_input,
                    "predicted_quadratic: eps must lie in [0,1)");
    detail::require(d >= 2, ErrorKind::invalid_dimension, "predicted_quadratic: need d >= 2");
    const auto k = x_theta.size();
    const double scale = 2.0 * eps * eps / (static_cast<double>(d) * (d - 1.0));
    return scale * (x.squaredNorm() * Eigen::MatrixXd::Identity(k, k) - x_theta * x_theta.transpose());
}

struct PairMomentReport {
    double eps = 0.0;
    std::int64_t trials = 0;
    Eigen::VectorXd drift_observed;
    Eigen::VectorXd drift_predicted;
    Eigen::VectorXd drift_stderr;
    Eigen::MatrixXd quad_observed;
    Eigen::MatrixXd quad_predicted;
    Eigen::MatrixXd quad_stderr;
    /// eps = 0: the pair is identical and every moment is zero.
    bool degenerate = false;
};

namespace detail {

inline nlohmann::json vec_json(const Eigen::VectorXd& v) {
    return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline nlohmann::json mat_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        rows.push_back(vec_json(m.row(i).transpose()));
    }
    return rows;
}

// First two columns of a Haar orthogonal matrix: Gram-Schmidt on two
// Gaussian vectors, which is QR with a positive diagonal.
inline void haar_pair(CounterRng& rng, int d, Eigen::VectorXd& k1, Eigen::VectorXd& k2) {
    for (int r = 0; r < d; ++r) {
        k1(r) = rng.normal();
    }
    for (int r = 0; r < d; ++r) {
        k2(r) = rng.normal();
    }
    k1 /= k1.norm();
    k2 -= k1.dot(k2) * k1;
    k2 /= k2.norm();
}

inline double mean_stderr(double sum, double sumsq, double n) {
    if (n < 2.0) {
        return 0.0;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sumsq - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
}

inline constexpr std::int64_t kTrialBlock = 1 << 14;

} // namespace detail

inline nlohmann::json to_json(const PairMomentReport& r) {
    return {{"eps", r.eps},
            {"trials", r.trials},
            {"degenerate", r.degenerate},
            {"drift_observed", detail::vec_json(r.drift_observed)},
            {"drift_predicted", detail::vec_json(r.drift_predicted)},
            {"drift_stderr", detail::vec_json(r.drift_stderr)},
            {"quad_observed", detail::mat_json(r.quad_observed)},
            {"quad_predicted", detail::mat_json(r.quad_predicted)},
            {"quad_stderr", detail::mat_json(r.quad_stderr)}};
}

/// Pair moments for several amplitudes from one stream of rotations U, so the
/// estimates share their randomness (common random numbers).
///
/// With K = (k1, k2) the first two columns of U, U A_eps U^T = I + (c-1) K K^T
/// + eps K C K^T with c = sqrt(1 - eps^2), so each trial needs only K. Every
/// draw of K is used together with (k1, -k2), which is also Haar; the pair is
/// one Monte Carlo unit.
inline std::vector<PairMomentReport> estimate_pair_moments_grid(const Eigen::VectorXd& x, const Frame& theta,
                                                                const std::vector<double>& eps_list,
                                                                std::int64_t trials, std::uint64_t seed,
                                                                int threads = 1) {
    const int d = theta.dim();
    const int k = theta.size();
    detail::require(x.size() == d, ErrorKind::invalid_input, "estimate_pair_moments: x and theta differ in dimension");
    detail::require(d >= 2, ErrorKind::invalid_dimension, "estimate_pair_moments: need d >= 2");
    detail::require(trials >= 1, ErrorKind::invalid_input, "estimate_pair_moments: trials must be >= 1");
    detail::require(!eps_list.empty(), ErrorKind::invalid_input, "estimate_pair_moments: no amplitudes given");
    for (double e : eps_list) {
        detail::require(e >= 0.0 && e < 1.0, ErrorKind::invalid_input, "estimate_pair_moments: eps must lie in [0,1)");
    }
    const std::size_t ne = eps_list.size();
    const Eigen::VectorXd x_theta = theta.rows() * x;

    // Per block and amplitude: sums and sums of squares of the drift and of
    // the upper triangle of the quadratic moment.
    struct Sums {
        Eigen::VectorXd drift, drift_sq;
        Eigen::MatrixXd quad, quad_sq;
    };
    const std::int64_t blocks = (trials + detail::kTrialBlock - 1) / detail::kTrialBlock;
    std::vector<std::vector<Sums>> partial(blocks);

    parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t b) {
        std::vector<Sums> acc(ne, Sums{Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, k),
                                       Eigen::MatrixXd::Zero(k, k)});
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
        const std::int64_t begin = static_cast<std::int64_t>(b) * detail::kTrialBlock;
        const std::int64_t end = std::min(trials, begin + detail::kTrialBlock);
        Eigen::VectorXd k1(d), k2(d), a(k), bb(k), plus(k), minus(k), unit(k);
        Eigen::MatrixXd qunit(k, k);
        for (std::int64_t t = begin; t < end; ++t) {
            detail::haar_pair(rng, d, k1, k2);
            a.noalias() = theta.rows() * k1;
            bb.noalias() = theta.rows() * k2;
            const double p = k1.dot(x);
            const double q = k2.dot(x);
            for (std::size_t e = 0; e < ne; ++e) {
                const double eps = eps_list[e];
                const double cm1 = -eps * eps / (1.0 + std::sqrt(1.0 - eps * eps));
                // Under k2 -> -k2 the rotation term changes sign and the rest is unchanged.
                const Eigen::VectorXd sym = cm1 * (p * a + q * bb);
                const Eigen::VectorXd rot = eps * (p * bb - q * a);
                plus = sym + rot;
                minus = sym - rot;
                unit = 0.5 * (plus + minus);
                auto& s = acc[e];
                s.drift += unit;
                s.drift_sq += unit.cwiseProduct(unit);
                for (int j = 0; j < k; ++j) {
                    for (int l = j; l < k; ++l) {
                        qunit(j, l) = 0.5 * (plus(j) * plus(l) + minus(j) * minus(l));
                        s.quad(j, l) += qunit(j, l);
                        s.quad_sq(j, l) += qunit(j, l) * qunit(j, l);
                    }
                }
            }
        }
        partial[b] = std::move(acc);
    });

    std::vector<PairMomentReport> out(ne);
    const double n = static_cast<double>(trials);
    for (std::size_t e = 0; e < ne; ++e) {
        Sums tot{Eigen::VectorXd::Zero(k), Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Zero(k, k),
                 Eigen::MatrixXd::Zero(k, k)};
        for (const auto& blk : partial) {
            tot.drift += blk[e].drift;
            tot.drift_sq += blk[e].drift_sq;
            tot.quad += blk[e].quad;
            tot.quad_sq += blk[e].quad_sq;
        }
        auto& r = out[e];
        r.eps = eps_list[e];
        r.trials = trials;
        r.degenerate = (r.eps == 0.0);
        r.drift_observed = tot.drift / n;
        r.drift_predicted = predicted_drift(x_theta, r.eps, d);
        r.drift_stderr.resize(k);
        r.quad_observed.resize(k, k);
        r.quad_stderr.resize(k, k);
        for (int j = 0; j < k; ++j) {
            r.drift_stderr(j) = detail::mean_stderr(tot.drift(j), tot.drift_sq(j), n);
            for (int l = j; l < k; ++l) {
                r.quad_observed(j, l) = r.quad_observed(l, j) = tot.quad(j, l) / n;
                r.quad_stderr(j, l) = r.quad_stderr(l, j) = detail::mean_stderr(tot.quad(j, l), tot.quad_sq(j, l), n);
            }
        }
        r.quad_predicted = predicted_quadratic(x, x_theta, r.eps, d);
    }
    return out;
}

inline PairMomentReport estimate_pair_moments(const Eigen::VectorXd& x, const Frame& theta, double eps,
                                              std::int64_t trials, std::uint64_t seed, int threads = 1) {
    return estimate_pair_moments_grid(x, theta, {eps}, trials, seed, threads).front();
}

/// |drift_observed - drift_predicted| / eps^4 for each amplitude, Euclidean norm.
inline std::vector<double> drift_remainder_ratios(const std::vector<PairMomentReport>& reports) {
    std::vector<double> out;
    out.reserve(reports.size());
    for (const auto& r : reports) {
        detail::require(r.eps > 0.0, ErrorKind::invalid_input, "drift_remainder_ratios: eps must be positive");
        out.push_back((r.drift_observed - r.drift_predicted).norm() / std::pow(r.eps, 4));
    }
    return out;
}

struct QMomentReport {
    int d = 0;
    std::int64_t trials = 0;
    Eigen::MatrixXd q_mean, q_stderr;
    Eigen::MatrixXd kk_mean, kk_stderr;
    /// Row r*d+s, column t*d+v holds E[q_rs q_tv].
    Eigen::MatrixXd qq_mean, qq_stderr;
    std::int64_t diagonal_nonzero = 0;

    double qq(int r, int s, int t, int v) const { return qq_mean(r * d + s, t * d + v); }
    double qq_se(int r, int s, int t, int v) const { return qq_stderr(r * d + s, t * d + v); }
};

inline double q_expected(int, int) { return 0.0; }
inline double kk_expected(int d, int r, int s) { return r == s ? 2.0 / d : 0.0; }
inline double qq_expected(int d, int r, int s, int t, int v) {
    return 2.0 / (static_cast<double>(d) * (d - 1.0)) * ((r == t && s == v ? 1.0 : 0.0) - (r == v && s == t ? 1.0 : 0.0));
}

/// Deviation in standard errors; zero when estimate and target agree exactly.
inline double z_score(double est, double target, double se) {
    const double dev = std::abs(est - target);
    if (dev == 0.0) {
        return 0.0;
    }
    return se > 0.0 ? dev / se : std::numeric_limits<double>::infinity();
}

struct ZSummary {
    double max_z = 0.0;
    std::int64_t count = 0;
    std::int64_t over4 = 0;
    double frac_over4() const { return count ? static_cast<double>(over4) / count : 0.0; }
};

inline constexpr double kMaxQTuples = 1e7;

inline QMomentReport q_moment_check(int d, std::int64_t trials, std::uint64_t seed, int threads = 1) {
    detail::require(d >= 3, ErrorKind::invalid_dimension, "q_moment_check: need d >= 3");
    detail::require(std::pow(static_cast<double>(d), 4) <= kMaxQTuples, ErrorKind::size_limit,
                    "q_moment_check: d = " + std::to_string(d) + " needs d^4 > 1e7 index tuples");
    detail::require(trials >= 1, ErrorKind::invalid_input, "q_moment_check: trials must be >= 1");
    const int dd = d * d;
    struct Sums {
        Eigen::MatrixXd q, q_sq, kk, kk_sq, qq, qq_sq;
        std::int64_t diag = 0;
    };
    const std::int64_t blocks = (trials + detail::kTrialBlock - 1) / detail::kTrialBlock;
    std::vector<Sums> partial(blocks);
    parallel_for(static_cast<std::size_t>(blocks), threads, [&](std::size_t b) {
        Sums s{Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(d, d),
               Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(dd, dd), Eigen::MatrixXd::Zero(dd, dd)};
        CounterRng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
        const std::int64_t begin = static_cast<std::int64_t>(b) * detail::kTrialBlock;
        const std::int64_t end = std::min(trials, begin + detail::kTrialBlock);
        Eigen::VectorXd k1(d), k2(d);
        Eigen::MatrixXd q(d, d), kk(d, d), outer(dd, dd);
        for (std::int64_t t = begin; t < end; ++t) {
            detail::haar_pair(rng, d, k1, k2);
            q.noalias() = k1 * k2.transpose();
            q -= q.transpose().eval();
            kk.noalias() = k1 * k1.transpose();
            kk.noalias() += k2 * k2.transpose();
            for (int r = 0; r < d; ++r) {
                s.diag += (q(r, r) != 0.0);
            }
            s.q += q;
            s.q_sq += q.cwiseProduct(q);
            s.kk += kk;
            s.kk_sq += kk.cwiseProduct(kk);
            const Eigen::Map<const Eigen::VectorXd> v(q.data(), dd);
            outer.noalias() = v * v.transpose();
            s.qq += outer;
            s.qq_sq += outer.cwiseProduct(outer);
        }
        partial[b] = std::move(s);
    });

    Sums tot{Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(d, d),
             Eigen::MatrixXd::Zero(d, d),   Eigen::MatrixXd::Zero(dd, dd), Eigen::MatrixXd::Zero(dd, dd)};
    for (const auto& p : partial) {
        tot.q += p.q;
        tot.q_sq += p.q_sq;
        tot.kk += p.kk;
        tot.kk_sq += p.kk_sq;
        tot.qq += p.qq;
        tot.qq_sq += p.qq_sq;
        tot.diag += p.diag;
    }
    const double n = static_cast<double>(trials);
    auto se = [n](const Eigen::MatrixXd& sum, const Eigen::MatrixXd& sumsq) {
        Eigen::MatrixXd out(sum.rows(), sum.cols());
        for (Eigen::Index i = 0; i < sum.size(); ++i) {
            out(i) = detail::mean_stderr(sum(i), sumsq(i), n);
        }
        return out;
    };

    // Q is stored column-major, so entry (r, s) sits at r + s*d; re-index to r*d + s.
    Eigen::MatrixXd qq_mean(dd, dd), qq_se(dd, dd);
    const Eigen::MatrixXd raw_se = se(tot.qq, tot.qq_sq);
    for (int r = 0; r < d; ++r) {
        for (int s = 0; s < d; ++s) {
            for (int t = 0; t < d; ++t) {
                for (int v = 0; v < d; ++v) {
                    qq_mean(r * d + s, t * d + v) = tot.qq(r + s * d, t + v * d) / n;
                    qq_se(r * d + s, t * d + v) = raw_se(r + s * d, t + v * d);
                }
            }
        }
    }

    QMomentReport rep;
    rep.d = d;
    rep.trials = trials;
    rep.q_mean = tot.q / n;
    rep.q_stderr = se(tot.q, tot.q_sq);
    rep.kk_mean = tot.kk / n;
    rep.kk_stderr = se(tot.kk, tot.kk_sq);
    rep.qq_mean = std::move(qq_mean);
    rep.qq_stderr = std::move(qq_se);
    rep.diagonal_nonzero = tot.diag;
    return rep;
}

inline ZSummary summarize_q(const QMomentReport& r) {
    ZSummary z;
    for (int i = 0; i < r.d; ++i) {
        for (int j = 0; j < r.d; ++j) {
            const double s = z_score(r.q_mean(i, j), q_expected(i, j), r.q_stderr(i, j));
            z.max_z = std::max(z.max_z, s);
            z.over4 += (s > 4.0);
            ++z.count;
        }
    }
    return z;
}

inline ZSummary summarize_kk(const QMomentReport& r) {
    ZSummary z;
    for (int i = 0; i < r.d; ++i) {
        for (int j = 0; j < r.d; ++j) {
            const double s = z_score(r.kk_mean(i, j), kk_expected(r.d, i, j), r.kk_stderr(i, j));
            z.max_z = std::max(z.max_z, s);
            z.over4 += (s > 4.0);
            ++z.count;
        }
    }
    return z;
}

inline ZSummary summarize_qq(const QMomentReport& rep) {
    ZSummary z;
    const int d = rep.d;
    for (int r = 0; r < d; ++r) {
        for (int s = 0; s < d; ++s) {
            for (int t = 0; t < d; ++t) {
                for (int v = 0; v < d; ++v) {
                    const double sc = z_score(rep.qq(r, s, t, v), qq_expected(d, r, s, t, v), rep.qq_se(r, s, t, v));
                    z.max_z = std::max(z.max_z, sc);
                    z.over4 += (sc > 4.0);
                    ++z.count;
                }
            }
        }
    }
    return z;
}

inline nlohmann::json to_json(const ZSummary& z) {
    return {{"max_z", std::isfinite(z.max_z) ? nlohmann::json(z.max_z) : nlohmann::json("inf")},
            {"tuples", z.count},
            {"over_4_stderr", z.over4},
            {"fraction_over_4_stderr", z.frac_over4()}};
}

inline nlohmann::json to_json(const QMomentReport& r) {
    return {{"d", r.d},
            {"trials", r.trials},
            {"diagonal_nonzero", r.diagonal_nonzero},
            {"E_Q", to_json(summarize_q(r))},
            {"E_KKt", to_json(summarize_kk(r))},
            {"E_qq", to_json(summarize_qq(r))}};
}

/// A k x k symmetric matrix.
class FMatrix {
  public:
    explicit FMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
        detail::require(m_.rows() == m_.cols(), ErrorKind::invalid_input, "FMatrix must be square");
        detail::require(m_ == m_.transpose(), ErrorKind::invalid_input, "FMatrix must be symmetric");
    }
    const Eigen::MatrixXd& matrix() const { return m_; }

  private:
    Eigen::MatrixXd m_;
};

/// (1/(d-1)) [(|x|^2 - sigma^2 d + sigma^2) I_k - x_theta x_theta^T].
inline FMatrix f_matrix(const Eigen::VectorXd& x, const Frame& theta, double sigma) {
    const int d = theta.dim();
    detail::require(x.size() == d, ErrorKind::invalid_input, "f_matrix: x and theta differ in dimension");
    detail::require(d >= 2, ErrorKind::invalid_dimension, "f_matrix: need d >= 2");
    const Eigen::VectorXd xt = theta.rows() * x;
    const int k = theta.size();
    const double diag = x.squaredNorm() - sigma * sigma * d + sigma * sigma;
    Eigen::MatrixXd f = diag * Eigen::MatrixXd::Identity(k, k) - xt * xt.transpose();
    return FMatrix(f / (d - 1.0));
}

/// sqrt(sum m_ij^2).
inline double hs_norm(const Eigen::MatrixXd& m) {
    detail::require(m.rows() == m.cols(), ErrorKind::invalid_input, "hs_norm: matrix must be square");
    return m.norm();
}

struct FBoundCheck {
    double empirical_mean = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    int samples = 0;

    bool holds() const { return empirical_mean <= bound * (1.0 + 1e-6) + 4.0 * std_error; }
};

/// Mean of (1/sigma) |F|_HS over a uniformly drawn data point and an
/// independent Haar k-frame, next to the annealed Wasserstein bound.
inline FBoundCheck f_bound_check(const PointCloud& cloud, int k, int frames, std::uint64_t seed) {
    detail::require(frames >= 1, ErrorKind::invalid_input, "f_bound_check: frames must be >= 1");
    const int d = cloud.dim();
    detail::require(k >= 1 && k <= d, ErrorKind::invalid_dimension, "f_bound_check: need 1 <= k <= d");
    const CloudStats st = compute_stats(cloud);
    double sum = 0.0;
    double sumsq = 0.0;
    for (int f = 0; f < frames; ++f) {
        const Frame theta = sample_haar_frame(d, k, derive_seed(seed, {0, static_cast<std::uint64_t>(f)}));
        CounterRng pick(derive_seed(seed, {1, static_cast<std::uint64_t>(f)}));
        const auto i = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(cloud.size())));
        const Eigen::VectorXd x = cloud.points().row(i).transpose();
        const double v = hs_norm(f_matrix(x, theta, st.sigma).matrix()) / st.sigma;
        sum += v;
        sumsq += v * v;
    }
    BoundInputs in;
    in.d = d;
    in.k = k;
    in.sigma = st.sigma;
    in.a_stat = st.a_stat;
    in.b_stat = st.b_stat;
    FBoundCheck out;
    out.samples = frames;
    out.empirical_mean = sum / frames;
    out.std_error = detail::mean_stderr(sum, sumsq, frames);
    out.bound = mean_w1_bound(in);
    return out;
}

} // namespace rproj
