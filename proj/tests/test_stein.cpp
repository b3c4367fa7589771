#include <cmath>

#include <gtest/gtest.h>

#include "rproj/stein.hpp"

using namespace rproj;

namespace {

template <class Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
    try {
        fn();
        ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), kind) << e.what();
    }
}

Eigen::VectorXd fixed_x(int d) {
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) {
        x(i) = std::cos(1.0 + 0.7 * i) * 1.5;
    }
    return x;
}

} // namespace

TEST(PredictedDrift, Values) {
    const Eigen::Vector2d v = predicted_drift(Eigen::Vector2d(1.0, 2.0), 0.1, 10);
    EXPECT_NEAR(v(0), -0.001, 1e-15);
    EXPECT_NEAR(v(1), -0.002, 1e-15);
    EXPECT_TRUE(predicted_drift(Eigen::Vector2d::Zero(), 0.3, 10).isZero(0.0));
    const Eigen::Vector2d w = predicted_drift(Eigen::Vector2d(1.0, 2.0), 0.2, 10);
    EXPECT_NEAR(w(1), 4.0 * v(1), 1e-15);
}

TEST(PredictedQuadratic, Values) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(5);
    x(0) = 5.0;
    const auto q = predicted_quadratic(x, Eigen::VectorXd::Constant(1, 3.0), 0.1, 5);
    EXPECT_NEAR(q(0, 0), 0.016, 1e-15);
    const auto z = predicted_quadratic(x, Eigen::VectorXd::Constant(1, 5.0), 0.1, 5);
    EXPECT_EQ(z(0, 0), 0.0);
}

TEST(PredictedQuadratic, SymmetricPsd) {
    const Eigen::VectorXd x = fixed_x(8);
    const Frame theta = sample_haar_frame(8, 3, 1);
    const Eigen::MatrixXd q = predicted_quadratic(x, theta.rows() * x, 0.2, 8);
    EXPECT_TRUE(q == q.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-15);
}

TEST(PairMoments, ZeroAmplitudeIsDegenerate) {
    const Eigen::VectorXd x = fixed_x(6);
    const auto r = estimate_pair_moments(x, sample_haar_frame(6, 2, 2), 0.0, 1000, 3);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(r.drift_observed.isZero(0.0));
    EXPECT_TRUE(r.quad_observed.isZero(0.0));
    EXPECT_TRUE(r.drift_predicted.isZero(0.0));
}

TEST(PairMoments, MatchPredictionAtSmallEps) {
    const int d = 10;
    const Eigen::VectorXd x = fixed_x(d);
    const Frame theta = sample_haar_frame(d, 2, 5);
    const double eps = 0.05;
    const auto r = estimate_pair_moments(x, theta, eps, 1000000, 6);
    const double xn = x.norm();
    for (int j = 0; j < 2; ++j) {
        const double tol = std::max(4.0 * r.drift_stderr(j), 10.0 * std::pow(eps, 4) * xn);
        EXPECT_NEAR(r.drift_observed(j), r.drift_predicted(j), tol);
        for (int l = 0; l < 2; ++l) {
            const double qtol = std::max(4.0 * r.quad_stderr(j, l), 10.0 * std::pow(eps, 3) * xn * xn);
            EXPECT_NEAR(r.quad_observed(j, l), r.quad_predicted(j, l), qtol);
        }
    }
    EXPECT_LE((r.quad_observed - r.quad_observed.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(r.quad_predicted == r.quad_predicted.transpose());
    EXPECT_TRUE((r.drift_stderr.array() >= 0.0).all());
}

// Independent estimate through the full d x d rotation of the stiefel module.
TEST(PairMoments, AgreeWithExplicitRotationOracle) {
    const int d = 6;
    const int k = 2;
    const Eigen::VectorXd x = fixed_x(d);
    const Frame theta = sample_haar_frame(d, k, 9);
    const double eps = 0.3;
    const int n = 100000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd qsum = Eigen::MatrixXd::Zero(k, k);
    const Eigen::VectorXd xt = theta.rows() * x;
    for (int t = 0; t < n; ++t) {
        const PairPerturbation p(eps, sample_orthogonal(d, derive_seed(404, {static_cast<std::uint64_t>(t)})));
        const Eigen::VectorXd delta = perturb_frame(theta, p).rows() * x - xt;
        sum += delta;
        sumsq += delta.cwiseProduct(delta);
        qsum += delta * delta.transpose();
    }
    const auto r = estimate_pair_moments(x, theta, eps, 200000, 10);
    for (int j = 0; j < k; ++j) {
        const double m = sum(j) / n;
        const double se = std::sqrt((sumsq(j) / n - m * m) / n);
        EXPECT_NEAR(r.drift_observed(j), m, 4.0 * std::hypot(se, r.drift_stderr(j)));
        for (int l = 0; l < k; ++l) {
            EXPECT_NEAR(r.quad_observed(j, l), qsum(j, l) / n, 5.0 * r.quad_stderr(j, l) + 0.02 * std::abs(qsum(j, l) / n));
        }
    }
}

TEST(PairMoments, DeterministicAndThreadIndependent) {
    const Eigen::VectorXd x = fixed_x(7);
    const Frame theta = sample_haar_frame(7, 2, 11);
    const auto a = estimate_pair_moments(x, theta, 0.1, 40000, 12, 1);
    const auto b = estimate_pair_moments(x, theta, 0.1, 40000, 12, 3);
    EXPECT_TRUE(a.drift_observed == b.drift_observed);
    EXPECT_TRUE(a.quad_observed == b.quad_observed);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(PairMoments, RemainderRatiosStayBounded) {
    const int d = 10;
    const Eigen::VectorXd x = fixed_x(d);
    const Frame theta = sample_haar_frame(d, 2, 13);
    const auto reps = estimate_pair_moments_grid(x, theta, {0.2, 0.1}, 1000000, 14);
    const auto ratios = drift_remainder_ratios(reps);
    ASSERT_EQ(ratios.size(), 2u);
    EXPECT_GT(ratios[0], 0.0);
    EXPECT_LE(ratios[1] / ratios[0], 32.0);
    EXPECT_GE(ratios[1] / ratios[0], 1.0 / 32.0);
}

TEST(PairMoments, InputValidation) {
    expect_error(ErrorKind::invalid_input,
                 [] { estimate_pair_moments(fixed_x(5), sample_haar_frame(6, 2, 1), 0.1, 10, 1); });
    expect_error(ErrorKind::invalid_input,
                 [] { estimate_pair_moments(fixed_x(6), sample_haar_frame(6, 2, 1), 1.0, 10, 1); });
    expect_error(ErrorKind::invalid_input,
                 [] { estimate_pair_moments(fixed_x(6), sample_haar_frame(6, 2, 1), 0.1, 0, 1); });
}

TEST(QMoments, IdentitiesAtDFive) {
    const auto r = q_moment_check(5, 1000000, 21);
    EXPECT_EQ(r.diagonal_nonzero, 0);
    EXPECT_NEAR(r.qq(0, 1, 0, 1), 0.1, 4.0 * r.qq_se(0, 1, 0, 1));
    EXPECT_NEAR(r.qq(0, 1, 2, 3), 0.0, 4.0 * r.qq_se(0, 1, 2, 3));
    EXPECT_NEAR(r.qq(0, 1, 1, 0), -0.1, 4.0 * r.qq_se(0, 1, 1, 0));
    EXPECT_LE(summarize_qq(r).frac_over4(), 0.01);
    EXPECT_LE(summarize_q(r).frac_over4(), 0.01);
    EXPECT_LE(summarize_kk(r).frac_over4(), 0.01);
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(r.kk_mean(i, i), 0.4, 4.0 * r.kk_stderr(i, i));
    }
}

TEST(QMoments, SizeLimits) {
    expect_error(ErrorKind::size_limit, [] { q_moment_check(57, 10, 1); });
    expect_error(ErrorKind::invalid_dimension, [] { q_moment_check(2, 10, 1); });
}

TEST(FMatrix, Values) {
    Eigen::VectorXd x(3);
    x << 1.0, 1.0, 1.0;
    const Frame e1(Eigen::MatrixXd::Identity(1, 3));
    EXPECT_EQ(f_matrix(x, e1, 1.0).matrix()(0, 0), 0.0);
    const Frame f1(Eigen::MatrixXd::Identity(1, 2));
    EXPECT_EQ(f_matrix(Eigen::Vector2d(2.0, 0.0), f1, 1.0).matrix()(0, 0), -1.0);
}

TEST(FMatrix, OrthogonalPointGivesScaledIdentity) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
    x(5) = 3.0;
    const Frame theta(Eigen::MatrixXd::Identity(2, 6));
    const double sigma = 1.2;
    const auto f = f_matrix(x, theta, sigma).matrix();
    const double c = (9.0 - sigma * sigma * 6 + sigma * sigma) / 5.0;
    EXPECT_NEAR(hs_norm(f), std::sqrt(2.0) * std::abs(c), 1e-14);
    EXPECT_NEAR(f(0, 1), 0.0, 0.0);
}

TEST(FMatrix, HsNormInvariantUnderFrameRotation) {
    const Eigen::VectorXd x = fixed_x(9);
    const Frame theta = sample_haar_frame(9, 3, 30);
    const auto o = sample_orthogonal(3, 31).matrix();
    const Frame rotated(o * theta.rows());
    EXPECT_NEAR(hs_norm(f_matrix(x, theta, 1.1).matrix()), hs_norm(f_matrix(x, rotated, 1.1).matrix()), 1e-10);
}

TEST(HsNorm, Values) {
    EXPECT_DOUBLE_EQ(hs_norm(Eigen::MatrixXd::Identity(2, 2)), std::sqrt(2.0));
    EXPECT_EQ(hs_norm(Eigen::MatrixXd::Zero(3, 3)), 0.0);
    Eigen::Matrix2d m;
    m << 3, 4, 0, 0;
    EXPECT_DOUBLE_EQ(hs_norm(m), 5.0);
    expect_error(ErrorKind::invalid_input, [] { hs_norm(Eigen::MatrixXd::Zero(2, 3)); });
}

TEST(FBoundCheck, SphereCloudHolds) {
    const auto cloud = gen_sphere(300, 50, 1.0, 40);
    for (int k : {1, 3}) {
        const auto r = f_bound_check(cloud, k, 2000, 41);
        EXPECT_TRUE(r.holds()) << r.empirical_mean << " vs " << r.bound;
        EXPECT_EQ(r.samples, 2000);
    }
}

TEST(FBoundCheck, GaussianCloudHolds) {
    const auto r = f_bound_check(gen_gaussian(300, 40, 42), 2, 2000, 43);
    EXPECT_TRUE(r.holds()) << r.empirical_mean << " vs " << r.bound;
}

TEST(FBoundCheck, ZeroFramesIsError) {
    expect_error(ErrorKind::invalid_input, [] { f_bound_check(gen_gaussian(5, 4, 1), 1, 0, 1); });
}
