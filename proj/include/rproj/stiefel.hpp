#pragma once

// Haar sampling and geometry on the Stiefel manifold W(d,k) of ordered
// orthonormal k-frames in R^d, plus the small random rotations used to build
// exchangeable pairs.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "rproj/csv.hpp"
#include "rproj/error.hpp"
#include "rproj/rng.hpp"

namespace rproj {

inline constexpr double kOrthonormalTol = 1e-10;

/// Largest entrywise deviation of M M^T from the identity.
inline double gram_defect(const Eigen::MatrixXd& rows) {
    const Eigen::MatrixXd g = rows * rows.transpose();
    return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

/// k orthonormal vectors in R^d, stored as the rows of a k x d matrix.
class Frame {
  public:
    explicit Frame(Eigen::MatrixXd rows) : rows_(std::move(rows)) {
        detail::require(rows_.rows() >= 1 && rows_.rows() <= rows_.cols(), ErrorKind::invalid_dimension,
                        "frame needs 1 <= k <= d");
        detail::require(gram_defect(rows_) <= kOrthonormalTol, ErrorKind::invalid_input,
                        "frame rows are not orthonormal");
    }

    int dim() const { return static_cast<int>(rows_.cols()); }
    int size() const { return static_cast<int>(rows_.rows()); }
    const Eigen::MatrixXd& rows() const { return rows_; }
    Eigen::VectorXd vector(int j) const { return rows_.row(j).transpose(); }

    bool operator==(const Frame& other) const { return rows_ == other.rows_; }

  private:
    Eigen::MatrixXd rows_;
};

class OrthogonalMatrix {
  public:
    explicit OrthogonalMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
        detail::require(m_.rows() == m_.cols() && m_.rows() >= 1, ErrorKind::invalid_dimension,
                        "orthogonal matrix must be square");
        detail::require(gram_defect(m_.transpose()) <= kOrthonormalTol, ErrorKind::invalid_input,
                        "matrix is not orthogonal");
    }

    int dim() const { return static_cast<int>(m_.rows()); }
    const Eigen::MatrixXd& matrix() const { return m_; }

  private:
    Eigen::MatrixXd m_;
};

/// The rotation U A_eps U^T with A_eps a planar rotation by amplitude eps in
/// the first two coordinates.
struct PairPerturbation {
    PairPerturbation(double eps_, OrthogonalMatrix u_) : eps(eps_), u(std::move(u_)) {
        detail::require(eps >= 0.0 && eps < 1.0, ErrorKind::invalid_input, "rotation amplitude must lie in [0,1)");
        detail::require(u.dim() >= 2, ErrorKind::invalid_dimension, "rotation needs d >= 2");
    }

    double eps;
    OrthogonalMatrix u;
};

/// d x k matrix whose columns are Haar-distributed orthonormal vectors.
///
/// Gaussian fill (column by column) followed by Householder QR; each column of
/// Q is multiplied by the sign of the matching diagonal entry of R so the
/// factorization is unique and the law is exactly Haar.
inline Eigen::MatrixXd haar_columns(CounterRng& rng, int d, int k) {
    Eigen::MatrixXd g(d, k);
    for (int c = 0; c < k; ++c) {
        for (int r = 0; r < d; ++r) {
            g(r, c) = rng.normal();
        }
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
    const auto& r = qr.matrixQR();
    for (int c = 0; c < k; ++c) {
        if (r(c, c) < 0.0) {
            q.col(c) = -q.col(c);
        }
    }
    return q;
}

inline Frame sample_haar_frame(int d, int k, std::uint64_t seed) {
    detail::require(k >= 1 && d >= 1 && k <= d, ErrorKind::invalid_dimension,
                    "sample_haar_frame: need 1 <= k <= d, got d=" + std::to_string(d) + " k=" + std::to_string(k));
    CounterRng rng(seed);
    return Frame(haar_columns(rng, d, k).transpose());
}

inline OrthogonalMatrix sample_orthogonal(int d, std::uint64_t seed) {
    detail::require(d >= 2, ErrorKind::invalid_dimension, "sample_orthogonal: need d >= 2");
    CounterRng rng(seed);
    return OrthogonalMatrix(haar_columns(rng, d, d));
}

/// rho(a, b) = [sum_j |a_j - b_j|^2]^{1/2}.
inline double frame_distance(const Frame& a, const Frame& b) {
    detail::require(a.dim() == b.dim() && a.size() == b.size(), ErrorKind::invalid_input,
                    "frame_distance: frames differ in shape");
    return (a.rows() - b.rows()).norm();
}

/// The d x d rotation U A_eps U^T.
inline Eigen::MatrixXd rotation_matrix(const PairPerturbation& p) {
    const int d = p.u.dim();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(d, d);
    const double c = std::sqrt(1.0 - p.eps * p.eps);
    a(0, 0) = c;
    a(0, 1) = p.eps;
    a(1, 0) = -p.eps;
    a(1, 1) = c;
    const auto& u = p.u.matrix();
    return u * a * u.transpose();
}

inline Frame perturb_frame(const Frame& theta, const PairPerturbation& p) {
    detail::require(theta.dim() == p.u.dim(), ErrorKind::invalid_input, "perturb_frame: dimension mismatch");
    if (p.eps == 0.0) {
        return theta;
    }
    return Frame(theta.rows() * rotation_matrix(p).transpose());
}

/// Q = K C K^T, K the first two columns of u and C = [[0,1],[-1,0]].
inline Eigen::MatrixXd q_matrix(const OrthogonalMatrix& u) {
    const int d = u.dim();
    detail::require(d >= 2, ErrorKind::invalid_dimension, "q_matrix: need d >= 2");
    const auto k1 = u.matrix().col(0);
    const auto k2 = u.matrix().col(1);
    Eigen::MatrixXd q = k1 * k2.transpose();
    // a - a^T is antisymmetric bit for bit, with an exact zero diagonal.
    q -= q.transpose().eval();
    return q;
}

inline std::string frame_to_csv(const Frame& f) {
    std::ostringstream out;
    for (int j = 0; j < f.size(); ++j) {
        for (int r = 0; r < f.dim(); ++r) {
            if (r) {
                out << ',';
            }
            out << csv::format_double(f.rows()(j, r));
        }
        out << '\n';
    }
    return out.str();
}

inline void save_frame(const Frame& f, const std::string& path) { csv::write_text(path, frame_to_csv(f)); }

inline Frame load_frame(const std::string& path) {
    const auto rows = csv::read_table(path);
    detail::require(!rows.empty(), ErrorKind::degenerate, path + ": empty frame file");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
        for (std::size_t r = 0; r < rows[j].size(); ++r) {
            m(j, r) = rows[j][r];
        }
    }
    return Frame(std::move(m));
}

} // namespace rproj
