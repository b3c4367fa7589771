#pragma once

// Point clouds, their summary statistics (sigma, A, B), the Diaconis-Freedman
// condition fractions, synthetic generators and projection onto a frame.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "rproj/csv.hpp"
#include "rproj/error.hpp"
#include "rproj/rng.hpp"
#include "rproj/stiefel.hpp"

namespace rproj {

/// Neumaier-compensated sum, so long uniform weight vectors still total 1 to
/// within a few ulps.
inline double compensated_sum(const Eigen::VectorXd& v) {
    double sum = 0.0;
    double comp = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double t = sum + v(i);
        comp += (std::abs(sum) >= std::abs(v(i))) ? (sum - t) + v(i) : (v(i) - t) + sum;
        sum = t;
    }
    return sum + comp;
}

/// n deterministic vectors in R^d, one per row.
class PointCloud {
  public:
    explicit PointCloud(Eigen::MatrixXd points) : points_(std::move(points)) {
        detail::require(points_.rows() >= 1 && points_.cols() >= 1, ErrorKind::degenerate, "point cloud is empty");
        detail::require(points_.allFinite(), ErrorKind::invalid_input, "point cloud has non-finite entries");
        detail::require(points_.cwiseAbs().maxCoeff() > 0.0, ErrorKind::degenerate, "all points are zero");
    }

    int size() const { return static_cast<int>(points_.rows()); }
    int dim() const { return static_cast<int>(points_.cols()); }
    const Eigen::MatrixXd& points() const { return points_; }

    bool operator==(const PointCloud& other) const { return points_ == other.points_; }

  private:
    Eigen::MatrixXd points_;
};

struct CloudStats {
    double sigma = 0.0;
    double a_stat = 0.0;
    double b_stat = 0.0;
    int d = 0;
    int n = 0;
};

/// A finitely supported probability measure on R^k. Support points are rows;
/// duplicates are allowed and kept.
class EmpiricalMeasure {
  public:
    EmpiricalMeasure(Eigen::MatrixXd support, Eigen::VectorXd weights)
        : support_(std::move(support)), weights_(std::move(weights)) {
        detail::require(support_.rows() >= 1 && support_.cols() >= 1, ErrorKind::invalid_input,
                        "measure needs at least one support point");
        detail::require(weights_.size() == support_.rows(), ErrorKind::invalid_input,
                        "measure: weight and support lengths differ");
        detail::require((weights_.array() > 0.0).all(), ErrorKind::invalid_input, "measure weights must be positive");
        detail::require(std::abs(compensated_sum(weights_) - 1.0) <= 1e-12, ErrorKind::invalid_input,
                        "measure weights must sum to 1");
        detail::require(support_.allFinite(), ErrorKind::invalid_input, "measure support is not finite");
    }

    static EmpiricalMeasure uniform(Eigen::MatrixXd support) {
        const auto n = support.rows();
        detail::require(n >= 1, ErrorKind::invalid_input, "measure needs at least one support point");
        return EmpiricalMeasure(std::move(support), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    }

    int size() const { return static_cast<int>(support_.rows()); }
    int dim() const { return static_cast<int>(support_.cols()); }
    const Eigen::MatrixXd& support() const { return support_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Support points mapped by x -> a x.
    EmpiricalMeasure scaled(double a) const { return EmpiricalMeasure(support_ * a, weights_); }

  private:
    Eigen::MatrixXd support_;
    Eigen::VectorXd weights_;
};

/// sigma^2 = (1/(n d)) sum |x_i|^2, A = (1/n) sum |sigma^-2 |x_i|^2 - d|, and B the
/// top eigenvalue of the second-moment matrix (1/n) sum x_i x_i^T.
inline CloudStats compute_stats(const PointCloud& cloud) {
    const auto& x = cloud.points();
    const int n = cloud.size();
    const int d = cloud.dim();
    const Eigen::VectorXd sq = x.rowwise().squaredNorm();
    const double sigma2 = sq.sum() / (static_cast<double>(n) * d);
    detail::require(sigma2 > 0.0, ErrorKind::degenerate, "compute_stats: all points are zero");

    CloudStats s;
    s.n = n;
    s.d = d;
    s.sigma = std::sqrt(sigma2);
    s.a_stat = (sq.array() / sigma2 - d).abs().sum() / n;

    // The nonzero spectrum of X^T X / n equals that of X X^T / n; use the smaller.
    Eigen::MatrixXd m = (d <= n) ? Eigen::MatrixXd(x.transpose() * x) : Eigen::MatrixXd(x * x.transpose());
    m /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    detail::require(es.info() == Eigen::Success, ErrorKind::numerical, "compute_stats: eigensolver failed");
    s.b_stat = es.eigenvalues().maxCoeff();
    return s;
}

struct ConditionFractions {
    double f_len = 0.0;
    double f_inner = 0.0;
};

/// Fractions of points violating the length condition and of ordered pairs
/// (diagonal included) violating the near-orthogonality condition at level eps.
inline ConditionFractions df_condition_fractions(const PointCloud& cloud, double eps) {
    detail::require(eps > 0.0, ErrorKind::invalid_input, "df_condition_fractions: eps must be positive");
    const CloudStats s = compute_stats(cloud);
    const auto& x = cloud.points();
    const int n = cloud.size();
    const double d = cloud.dim();
    const double level = eps * d;
    const double target = s.sigma * s.sigma * d;

    std::int64_t len_bad = 0;
    for (int i = 0; i < n; ++i) {
        if (std::abs(x.row(i).squaredNorm() - target) > level) {
            ++len_bad;
        }
    }
    const Eigen::MatrixXd gram = x * x.transpose();
    const std::int64_t inner_bad = (gram.array().abs() > level).count();

    ConditionFractions f;
    f.f_len = static_cast<double>(len_bad) / n;
    f.f_inner = static_cast<double>(inner_bad) / (static_cast<double>(n) * n);
    return f;
}

/// mu^theta: mass 1/n at (<theta_1,x_i>, ..., <theta_k,x_i>) for every point.
inline EmpiricalMeasure project(const PointCloud& cloud, const Frame& theta) {
    detail::require(cloud.dim() == theta.dim(), ErrorKind::invalid_input,
                    "project: cloud dimension " + std::to_string(cloud.dim()) + " != frame dimension " +
                        std::to_string(theta.dim()));
    return EmpiricalMeasure::uniform(cloud.points() * theta.rows().transpose());
}

inline PointCloud gen_gaussian(int n, int d, std::uint64_t seed) {
    detail::require(n >= 1 && d >= 1, ErrorKind::invalid_input, "gen_gaussian: need n, d >= 1");
    CounterRng rng(seed);
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < d; ++r) {
            x(i, r) = rng.normal();
        }
    }
    return PointCloud(std::move(x));
}

/// Uniform directions scaled to norm sigma*sqrt(d), so A = 0.
inline PointCloud gen_sphere(int n, int d, double sigma, std::uint64_t seed) {
    detail::require(n >= 1 && d >= 1, ErrorKind::invalid_input, "gen_sphere: need n, d >= 1");
    detail::require(sigma > 0.0, ErrorKind::invalid_input, "gen_sphere: sigma must be positive");
    CounterRng rng(seed);
    Eigen::MatrixXd x(n, d);
    const double radius = sigma * std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        double norm = 0.0;
        do {
            for (int r = 0; r < d; ++r) {
                x(i, r) = rng.normal();
            }
            norm = x.row(i).norm();
        } while (norm == 0.0);
        x.row(i) *= radius / norm;
    }
    return PointCloud(std::move(x));
}

/// Two antipodal clusters: row i is (+/-) separation * (1,...,1)/sqrt(d) plus
/// N(0, I_d) noise, with the sign alternating in i.
inline PointCloud gen_clustered(int n, int d, double separation, std::uint64_t seed) {
    detail::require(n >= 1 && d >= 1, ErrorKind::invalid_input, "gen_clustered: need n, d >= 1");
    detail::require(separation > 0.0, ErrorKind::invalid_input, "gen_clustered: separation must be positive");
    CounterRng rng(seed);
    Eigen::MatrixXd x(n, d);
    const double offset = separation / std::sqrt(static_cast<double>(d));
    for (int i = 0; i < n; ++i) {
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        for (int r = 0; r < d; ++r) {
            x(i, r) = sign * offset + rng.normal();
        }
    }
    return PointCloud(std::move(x));
}

inline std::string matrix_to_csv(const Eigen::MatrixXd& m) {
    std::ostringstream out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) {
                out << ',';
            }
            out << csv::format_double(m(i, j));
        }
        out << '\n';
    }
    return out.str();
}

inline void save_cloud(const PointCloud& cloud, const std::string& path) {
    csv::write_text(path, matrix_to_csv(cloud.points()));
}

inline PointCloud load_cloud(const std::string& path) {
    const auto rows = csv::read_table(path);
    detail::require(!rows.empty(), ErrorKind::degenerate, path + ": no data rows");
    Eigen::MatrixXd x(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t r = 0; r < rows[i].size(); ++r) {
            x(i, r) = rows[i][r];
        }
    }
    return PointCloud(std::move(x));
}

/// k+1 columns per row; the last is the weight.
inline void save_measure(const EmpiricalMeasure& mu, const std::string& path) {
    Eigen::MatrixXd m(mu.size(), mu.dim() + 1);
    m << mu.support(), mu.weights();
    csv::write_text(path, matrix_to_csv(m));
}

inline EmpiricalMeasure load_measure(const std::string& path) {
    const auto rows = csv::read_table(path);
    detail::require(!rows.empty(), ErrorKind::degenerate, path + ": no data rows");
    detail::require(rows.front().size() >= 2, ErrorKind::parse, path + ": measure rows need k+1 >= 2 columns");
    const auto k = rows.front().size() - 1;
    Eigen::MatrixXd support(rows.size(), k);
    Eigen::VectorXd w(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t r = 0; r < k; ++r) {
            support(i, r) = rows[i][r];
        }
        w(i) = rows[i][k];
    }
    return EmpiricalMeasure(std::move(support), std::move(w));
}

} // namespace rproj
