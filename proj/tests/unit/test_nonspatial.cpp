#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "doctest.h"
#include "mbym2/distributions.hpp"
#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/nonspatial.hpp"
#include "oracles.hpp"

using namespace mbym2;

TEST_CASE("default_sigma0") {
  SUBCASE("exact fit is degenerate") {
    Rng rng(1);
    const MatrixXd X = oracle::random_design(10, 1, rng);
    const MatrixXd Y = X * MatrixXd{{1.0, 2.0}, {0.5, -1.0}};
    CHECK_THROWS_WITH_AS(default_sigma0(Y, X), doctest::Contains("degenerate scale"), InvalidArgument);
  }
  SUBCASE("unit vector against an intercept") {
    const Index n = 7;
    MatrixXd Y = MatrixXd::Zero(n, 1);
    Y(0, 0) = 1.0;
    const MatrixXd S = default_sigma0(Y, MatrixXd::Ones(n, 1));
    CHECK(S(0, 0) == doctest::Approx((1.0 - 1.0 / n) / (n - 1)).epsilon(1e-12));
  }
  SUBCASE("brute force residuals") {
    Rng rng(2);
    const MatrixXd X = oracle::random_design(30, 2, rng);
    const MatrixXd Y = standard_normal(30, 3, rng);
    const MatrixXd H = X * (X.transpose() * X).inverse() * X.transpose();
    const MatrixXd R = (MatrixXd::Identity(30, 30) - H) * Y;
    const MatrixXd S = default_sigma0(Y, X);
    for (Index j = 0; j < 3; ++j) CHECK(std::abs(S(j, j) - R.col(j).squaredNorm() / 27.0) < 1e-12);
    CHECK(S(0, 1) == 0.0);
  }
  SUBCASE("too few rows") {
    CHECK_THROWS_AS(default_sigma0(MatrixXd::Ones(2, 1), MatrixXd::Ones(2, 2)), InvalidArgument);
  }
}

TEST_CASE("fit_nonspatial") {
  Rng rng(3);
  const MatrixXd X = oracle::random_design(10, 1, rng);
  const MatrixXd B0{{1.0, -2.0}, {0.25, 3.0}};
  CHECK(fit_nonspatial(X * B0 + 1e-3 * standard_normal(10, 2, rng), X, 2.0, MatrixXd::Identity(2, 2))
            .B_hat.isApprox(B0, 1e-2));
  CHECK(fit_nonspatial(X * B0, X, 2.0, MatrixXd::Identity(2, 2)).B_hat.isApprox(B0, 1e-12));

  const MatrixXd Y = standard_normal(10, 2, rng);
  const MatrixXd S0{{1.0, 0.2}, {0.2, 0.5}};
  const auto post = fit_nonspatial(Y, X, 3.0, S0);
  const MatrixXd b = (X.transpose() * X).inverse() * X.transpose() * Y;
  const MatrixXd res = Y - X * b;
  CHECK((post.Sigma_star - (3.0 * S0 + res.transpose() * res)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(post.v_star == 13.0);
  // per-column least squares
  for (Index j = 0; j < 2; ++j) {
    const VectorXd bj = X.householderQr().solve(Y.col(j));
    CHECK((post.B_hat.col(j) - bj).cwiseAbs().maxCoeff() < 1e-12);
  }
  // B̂ does not depend on the prior
  CHECK((fit_nonspatial(Y, X, 7.0, 4.0 * S0).B_hat - post.B_hat).cwiseAbs().maxCoeff() < 1e-14);

  MatrixXd rank_deficient = X;
  rank_deficient.col(1) = 2.0 * X.col(0);
  CHECK_THROWS_AS(fit_nonspatial(Y, rank_deficient, 3.0, S0), InvalidArgument);
  CHECK_THROWS_AS(fit_nonspatial(Y, X, 0.5, S0), InvalidArgument);
}

TEST_CASE("inverse-Wishart convention") {
  // prior (v, vΣ0) gives E[Σ^{-1}] = Σ0^{-1}
  Rng rng(4);
  const MatrixXd S0{{2.0, 0.3}, {0.3, 0.7}};
  const double v = 5.0;
  MatrixXd mean_inv = MatrixXd::Zero(2, 2);
  const int N = 100000;
  for (int s = 0; s < N; ++s) mean_inv += sample_inverse_wishart(v, v * S0, rng).inverse();
  mean_inv /= N;
  CHECK(relative_frobenius(mean_inv, S0.inverse()) < 0.01);

  // normalised density integrates to one (k = 1: inverse gamma)
  const double dof = 4.0, scale = 3.0;
  double total = 0.0;
  const double h = 1e-3;
  for (double x = h / 2; x < 200.0; x += h) total += std::exp(inverse_wishart_log_density(MatrixXd::Constant(1, 1, x), dof, MatrixXd::Constant(1, 1, scale))) * h;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("sample_nonspatial moments") {
  Rng rng(5);
  const MatrixXd X = oracle::random_design(12, 1, rng);
  const MatrixXd Y = standard_normal(12, 2, rng);
  const auto post = fit_nonspatial(Y, X, 2.0, default_sigma0(Y, X));
  const Index N = 50000;
  const auto draws = sample_nonspatial(post, N, rng);
  std::vector<VectorXd> b;
  MatrixXd sigma_mean = MatrixXd::Zero(2, 2);
  for (Index s = 0; s < N; ++s) {
    b.push_back(vec(draws.B[static_cast<std::size_t>(s)]));
    sigma_mean += draws.Sigma[static_cast<std::size_t>(s)];
  }
  sigma_mean /= static_cast<double>(N);
  const auto m = oracle::moments(b);
  for (Index i = 0; i < 4; ++i) {
    CHECK(std::abs(m.mean(i) - vec(post.B_hat)(i)) < 4.0 * std::sqrt(m.cov(i, i) / N));
  }
  CHECK(relative_frobenius(m.cov, post.coefficient_covariance()) < 0.03);
  CHECK(relative_frobenius(sigma_mean, post.expected_sigma()) < 0.03);

  Rng a(77), c(77);
  CHECK(sample_nonspatial(post, 3, a).B[2] == sample_nonspatial(post, 3, c).B[2]);
}

TEST_CASE("single outcome slope is Student-t") {
  Rng rng(6);
  const MatrixXd X = oracle::random_design(15, 1, rng);
  const MatrixXd Y = X * MatrixXd{{1.0}, {2.0}} + standard_normal(15, 1, rng);
  const auto post = fit_nonspatial(Y, X, 1.0, MatrixXd::Constant(1, 1, 0.8));
  const auto draws = sample_nonspatial(post, 20000, rng);
  std::vector<double> slope;
  for (const auto& b : draws.B) slope.push_back(b(1, 0));
  // Σ ~ IG(v*/2, S*/2), slope | Σ ~ N(b̂, Σ (XᵀX)^{-1}_22)  =>  t with v* dof
  const double scale = std::sqrt(post.Sigma_star(0, 0) / post.v_star * post.XtX_inv(1, 1));
  const boost::math::students_t t(post.v_star);
  const double centre = post.B_hat(1, 0);
  CHECK(oracle::ks_test(slope, [&](double x) { return boost::math::cdf(t, (x - centre) / scale); }) > 0.01);
  double mean = 0.0;
  for (double s : slope) mean += s;
  mean /= static_cast<double>(slope.size());
  const double sd = scale * std::sqrt(post.v_star / (post.v_star - 2.0));
  CHECK(std::abs(mean - centre) < 4.0 * sd / std::sqrt(20000.0));
}
