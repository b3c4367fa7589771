#pragma once

// Independent reference computations used only by the tests: a two-sample
// Kolmogorov-Smirnov test and brute-force vertex enumeration for the small
// transport and bounded-Lipschitz linear programs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Two-sample KS statistic and its asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

inline double kolmogorov_sf(double lambda) {
    if (lambda < 1e-3) {
        return 1.0;
    }
    double sum = 0.0;
    for (int j = 1; j <= 200; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-18) {
            break;
        }
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = a.size();
    const double nb = b.size();
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double t = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= t) {
            ++i;
        }
        while (j < b.size() && b[j] <= t) {
            ++j;
        }
        d = std::max(d, std::abs(i / na - j / nb));
    }
    const double ne = na * nb / (na + nb);
    const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
    return {d, kolmogorov_sf(lambda)};
}

// Calls fn on every subset of {0..n-1} of size r (as an index vector).
inline void for_each_subset(int n, int r, const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> idx(r);
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == r) {
            fn(idx);
            return;
        }
        for (int i = start; i < n; ++i) {
            idx[depth] = i;
            rec(i + 1, depth + 1);
        }
    };
    rec(0, 0);
}

inline double dist(const Eigen::MatrixXd& x, int i, const Eigen::MatrixXd& y, int j) {
    return (x.row(i) - y.row(j)).norm();
}

/// Minimum transport cost between (x, a) and (y, b) with ground cost
/// min(|x_i - y_j|, cap), over every vertex of the coupling polytope.
inline double transport_by_vertices(const Eigen::MatrixXd& x, const Eigen::VectorXd& a, const Eigen::MatrixXd& y,
                                    const Eigen::VectorXd& b, double cap) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    const int vars = n * m;
    Eigen::MatrixXd eq = Eigen::MatrixXd::Zero(n + m, vars);
    Eigen::VectorXd rhs(n + m);
    rhs << a, b;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            eq(i, i * m + j) = 1.0;
            eq(n + j, i * m + j) = 1.0;
        }
    }
    double best = std::numeric_limits<double>::infinity();
    for (int r = 1; r <= vars; ++r) {
        for_each_subset(vars, r, [&](const std::vector<int>& s) {
            Eigen::MatrixXd sub(n + m, r);
            for (int c = 0; c < r; ++c) {
                sub.col(c) = eq.col(s[c]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
            if (lu.rank() != r) {
                return;
            }
            const Eigen::VectorXd sol = lu.solve(rhs);
            if ((sub * sol - rhs).norm() > 1e-12 || sol.minCoeff() < -1e-12) {
                return;
            }
            double cost = 0.0;
            for (int c = 0; c < r; ++c) {
                const int i = s[c] / m;
                const int j = s[c] % m;
                cost += sol(c) * std::min(dist(x, i, y, j), cap);
            }
            best = std::min(best, cost);
        });
    }
    return best;
}

/// max sum_s f_s (mu_s - nu_s) with |f_s| <= 1 and f_s - f_t <= |z_s - z_t|
/// over the combined support z = (x, y), by enumerating every basis.
inline double bl_by_vertices(const Eigen::MatrixXd& x, const Eigen::VectorXd& a, const Eigen::MatrixXd& y,
                             const Eigen::VectorXd& b) {
    const int n = static_cast<int>(a.size());
    const int p = n + static_cast<int>(b.size());
    Eigen::MatrixXd z(p, x.cols());
    z << x, y;
    Eigen::VectorXd obj(p);
    obj << a, -b;

    // Constraint rows g^T f <= h.
    std::vector<Eigen::VectorXd> g;
    std::vector<double> h;
    for (int s = 0; s < p; ++s) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
        e(s) = 1.0;
        g.push_back(e);
        h.push_back(1.0);
        g.push_back(-e);
        h.push_back(1.0);
    }
    for (int s = 0; s < p; ++s) {
        for (int t = 0; t < p; ++t) {
            if (s == t) {
                continue;
            }
            Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
            e(s) = 1.0;
            e(t) = -1.0;
            g.push_back(e);
            h.push_back((z.row(s) - z.row(t)).norm());
        }
    }
    const int rows = static_cast<int>(g.size());
    double best = -std::numeric_limits<double>::infinity();
    for_each_subset(rows, p, [&](const std::vector<int>& s) {
        Eigen::MatrixXd sys(p, p);
        Eigen::VectorXd rhs(p);
        for (int r = 0; r < p; ++r) {
            sys.row(r) = g[s[r]].transpose();
            rhs(r) = h[s[r]];
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
        if (lu.rank() != p) {
            return;
        }
        const Eigen::VectorXd f = lu.solve(rhs);
        for (int r = 0; r < rows; ++r) {
            if (g[r].dot(f) > h[r] + 1e-10) {
                return;
            }
        }
        best = std::max(best, obj.dot(f));
    });
    return best;
}

} // namespace oracle
