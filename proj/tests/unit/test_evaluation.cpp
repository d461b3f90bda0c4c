#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "mbym2/datagen.hpp"
#include "mbym2/error.hpp"
#include "mbym2/evaluation.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/mcmc.hpp"
#include "mbym2/nonspatial.hpp"
#include "oracles.hpp"

using namespace mbym2;

namespace {

std::vector<double> normals(std::size_t count, Rng& rng) {
  std::vector<double> out(count);
  std::normal_distribution<double> z;
  for (double& x : out) x = z(rng);
  return out;
}

KroneckerGaussian random_kronecker(Index n, Index k, Rng& rng, bool singular_iid = false) {
  const MatrixXd M = oracle::random_upper(k, rng);
  VectorXd r = oracle::random_proportions(k, rng);
  if (singular_iid) r(0) = 1.0;
  return analysis_kronecker(oracle::random_design(n, 1, rng), standard_normal(2, k, rng), M, r);
}

}  // namespace

TEST_CASE("hpd_interval") {
  Rng rng(1);
  SUBCASE("constant draws") {
    const auto [lo, hi] = hpd_interval(std::vector<double>(500, 2.5), 0.9);
    CHECK(lo == 2.5);
    CHECK(hi == 2.5);
  }
  SUBCASE("standard normal") {
    const auto [lo, hi] = hpd_interval(normals(100000, rng), 0.95);
    CHECK(std::abs(lo + 1.959964) < 0.03);
    CHECK(std::abs(hi - 1.959964) < 0.03);
  }
  SUBCASE("skewed draws hug the mode") {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> x(50000);
    for (double& v : x) v = e(rng);
    const auto [lo, hi] = hpd_interval(x, 0.9);
    CHECK(lo < 0.001);
    CHECK(std::abs(hi - std::log(10.0)) < 0.05);
    // equal-tailed interval is [-log .95, -log .05]
    CHECK(hi - lo < std::log(0.95 / 0.05));
  }
  SUBCASE("exact count of draws") {
    std::vector<double> x(200);
    for (int i = 0; i < 200; ++i) x[static_cast<std::size_t>(i)] = i;
    const auto [lo, hi] = hpd_interval(x, 0.5);
    CHECK(hi - lo == 99.0);
    CHECK(lo == 0.0);
  }
  CHECK_THROWS_AS(hpd_interval(std::vector<double>(99, 1.0), 0.95), InvalidArgument);
  CHECK_THROWS_AS(hpd_interval(std::vector<double>(200, 1.0), 1.0), InvalidArgument);
}

TEST_CASE("rhat_ess") {
  Rng rng(2);
  SUBCASE("independent chains") {
    std::vector<std::vector<double>> chains;
    for (int c = 0; c < 4; ++c) chains.push_back(normals(2000, rng));
    const auto d = rhat_ess(chains);
    CHECK(d.rhat < 1.005);
    CHECK(d.ess > 0.5 * 8000);
  }
  SUBCASE("separated chains") {
    std::vector<std::vector<double>> chains;
    for (int c = 0; c < 4; ++c) {
      auto x = normals(1000, rng);
      for (double& v : x) v += 3.0 * c;
      chains.push_back(x);
    }
    CHECK(rhat_ess(chains).rhat > 1.5);
  }
  SUBCASE("autoregressive chains") {
    const double phi = 0.9;
    std::vector<std::vector<double>> chains;
    for (int c = 0; c < 4; ++c) {
      auto z = normals(20000, rng);
      double x = z[0] / std::sqrt(1.0 - phi * phi);
      for (double& v : z) {
        x = phi * x + v;
        v = x;
      }
      chains.push_back(z);
    }
    const auto d = rhat_ess(chains);
    const double expected = (1.0 - phi) / (1.0 + phi) * 80000.0;
    CHECK(d.ess > expected / 1.5);
    CHECK(d.ess < expected * 1.5);
    CHECK(d.rhat < 1.01);
  }
  SUBCASE("constant chains") {
    const auto d = rhat_ess({std::vector<double>(10, 1.0), std::vector<double>(10, 1.0)});
    CHECK(std::isnan(d.rhat));
    CHECK(std::isnan(d.ess));
  }
  CHECK_THROWS_AS(rhat_ess({{1.0, 2.0, 3.0}}), InvalidArgument);
  CHECK_THROWS_AS(rhat_ess({{1.0, 2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0, 5.0}}), InvalidArgument);
}

TEST_CASE("frequentist_eval") {
  const MatrixXd F{{0.5, 2.5}, {1.3, 3.3}};
  std::vector<ReplicateRecord> records;
  for (int i = 0; i < 30; ++i) records.push_back({F, F.array() - 0.1, F.array() + 0.1, MatrixXd::Constant(2, 2, 0.02)});
  auto rep = frequentist_eval(records, F);
  CHECK(rep.mse.isZero());
  CHECK(rep.coverage.isApprox(MatrixXd::Ones(2, 2)));
  CHECK(rep.avg_posterior_variance.isApprox(MatrixXd::Constant(2, 2, 0.02)));
  CHECK(rep.replicate_count == 30);

  // half the replicates off by one in one cell, missing the truth
  for (int i = 0; i < 15; ++i) {
    records[static_cast<std::size_t>(i)].estimate(1, 0) += 1.0;
    records[static_cast<std::size_t>(i)].lower(1, 0) += 1.0;
    records[static_cast<std::size_t>(i)].upper(1, 0) += 1.0;
  }
  rep = frequentist_eval(records, F);
  CHECK(rep.mse(1, 0) == doctest::Approx(0.5));
  CHECK(rep.coverage(1, 0) == doctest::Approx(0.5));
  CHECK(rep.coverage(0, 1) == 1.0);

  CHECK_THROWS_AS(frequentist_eval(std::span(records).first(29), F), InvalidArgument);
  CHECK(frequentist_eval(std::span(records).first(1), F, 1).replicate_count == 1);
  records[3].lower = MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(frequentist_eval(records, F), InvalidArgument);
}

TEST_CASE("gaussian_kl") {
  Rng rng(3);
  const MatrixXd A = standard_normal(4, 4, rng);
  const GaussianSpec p{standard_normal(4, 1, rng).col(0), A * A.transpose() + MatrixXd::Identity(4, 4)};
  CHECK(gaussian_kl(p, p) == doctest::Approx(0.0).epsilon(1e-12));

  const GaussianSpec a{VectorXd{{1.0}}, MatrixXd::Constant(1, 1, 2.0)};
  const GaussianSpec b{VectorXd{{-0.5}}, MatrixXd::Constant(1, 1, 3.0)};
  CHECK(gaussian_kl(a, b) == doctest::Approx(std::log(std::sqrt(3.0 / 2.0)) + (2.0 + 2.25) / 6.0 - 0.5));

  // Monte Carlo E_p[log p - log q]
  const MatrixXd Bq = standard_normal(4, 4, rng);
  const GaussianSpec q{VectorXd::Zero(4), Bq * Bq.transpose() + 2.0 * MatrixXd::Identity(4, 4)};
  const MatrixXd L = p.cov.llt().matrixL();
  const int N = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < N; ++s) {
    const VectorXd x = p.mean + L * standard_normal(4, 1, rng).col(0);
    const double d = oracle::dense_log_normal(x, p.mean, p.cov) - oracle::dense_log_normal(x, q.mean, q.cov);
    sum += d;
    sum2 += d * d;
  }
  const double mean = sum / N, se = std::sqrt((sum2 / N - mean * mean) / N);
  CHECK(std::abs(gaussian_kl(p, q) - mean) < 4.0 * se);
  CHECK_THROWS_AS(gaussian_kl(a, p), InvalidArgument);
}

TEST_CASE("KroneckerKl agrees with the dense divergence") {
  Rng rng(4);
  for (Index n : {5, 9}) {
    const auto g = oracle::random_graph(n, 0.3, rng);
    const auto V = make_scaled_precision(g, PrecisionKind::sar, 0.8);
    const auto W = make_scaled_precision(g, PrecisionKind::car, 0.95);
    const KroneckerKl kl(spectral_decompose(V), spectral_decompose(W));
    for (Index k : {1, 2, 3}) {
      for (bool singular : {false, true}) {
        const auto p = random_kronecker(n, k, rng);
        const auto q = random_kronecker(n, k, rng, singular);
        const double dense = gaussian_kl(to_dense(p, V.covariance), to_dense(q, W.covariance));
        CHECK(std::abs(kl(p, q) - dense) < 1e-8 * std::max(1.0, dense));
        const double reverse = gaussian_kl(to_dense(q, V.covariance), to_dense(p, W.covariance));
        CHECK(std::abs(kl(q, p) - reverse) < 1e-8 * std::max(1.0, reverse));
      }
    }
  }
  const auto a = spectral_decompose(make_scaled_precision(oracle::path_graph(4), PrecisionKind::car, 0.9));
  const auto b = spectral_decompose(make_scaled_precision(oracle::path_graph(5), PrecisionKind::car, 0.9));
  CHECK_THROWS_AS(KroneckerKl(a, b), InvalidArgument);
}

TEST_CASE("kl_fit_summary") {
  const auto params = default_generation_params(make_scaled_precision(california_counties(), PrecisionKind::car, 0.99));
  const auto spectral = spectral_decompose(params.V_phi);
  const KroneckerKl kl(spectral, spectral);
  const auto data = generate_dataset(params, 5);
  const auto generation = generation_kronecker(params, data.X);
  const std::vector<ModelDraw> truth{{unconditional_estimand(params), params.A, params.rho}};
  CHECK(kl_fit_summary(kl, generation, data.X, truth) == doctest::Approx(0.0).epsilon(1e-9));

  std::vector<ModelDraw> draws = truth;
  draws.push_back({unconditional_estimand(params) * 1.1, params.A, params.rho});
  const double second = kl(generation, analysis_kronecker(data.X, draws[1].B, draws[1].M, draws[1].r));
  CHECK(second > 0.0);
  CHECK(kl_fit_summary(kl, generation, data.X, draws) == doctest::Approx(second / 2.0));
  CHECK_THROWS_AS(kl_fit_summary(kl, generation, data.X, {}), InvalidArgument);
}

TEST_CASE("Moran's I and Geary's C") {
  const auto g = oracle::lattice_graph(10, 10);
  Rng rng(6);
  SUBCASE("permutation null means") {
    const VectorXd e = standard_normal(100, 1, rng).col(0);
    std::vector<Index> order(100);
    std::iota(order.begin(), order.end(), Index{0});
    const int N = 4000;
    double si = 0.0, si2 = 0.0, sc = 0.0, sc2 = 0.0;
    VectorXd x(100);
    for (int b = 0; b < N; ++b) {
      std::shuffle(order.begin(), order.end(), rng);
      for (Index i = 0; i < 100; ++i) x(i) = e(order[static_cast<std::size_t>(i)]);
      const double I = morans_i(x, g), C = gearys_c(x, g);
      si += I;
      si2 += I * I;
      sc += C;
      sc2 += C * C;
    }
    const double mi = si / N, mc = sc / N;
    CHECK(std::abs(mi + 1.0 / 99.0) < 4.0 * std::sqrt((si2 / N - mi * mi) / N));
    CHECK(std::abs(mc - 1.0) < 4.0 * std::sqrt((sc2 / N - mc * mc) / N));
  }
  SUBCASE("smooth residuals") {
    VectorXd e(100);
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j) e(i * 10 + j) = static_cast<double>(i + j);
    CHECK(morans_i(e, g) > 0.8);
    CHECK(gearys_c(e, g) < 0.2);
    const auto m = moran_test(e, g, 10000, rng);
    CHECK(m.p_value == doctest::Approx(1.0 / 10001.0));
    CHECK(m.permutations == 10000);
    CHECK(geary_test(e, g, 10000, rng).p_value == doctest::Approx(1.0 / 10001.0));
    // checkerboard: strong negative autocorrelation is two-sided extreme for I, not small for C
    for (Index i = 0; i < 10; ++i)
      for (Index j = 0; j < 10; ++j) e(i * 10 + j) = (i + j) % 2 == 0 ? 1.0 : -1.0;
    CHECK(morans_i(e, g) == doctest::Approx(-1.0));
    CHECK(moran_test(e, g, 999, rng).p_value == doctest::Approx(1.0 / 1000.0));
    CHECK(geary_test(e, g, 999, rng).p_value == doctest::Approx(1.0));
  }
  SUBCASE("hand example on a path") {
    const auto p = oracle::path_graph(3);
    const VectorXd e{{1.0, 0.0, -1.0}};
    // centred already; eᵀWe = 2·(1·0 + 0·(-1)) = 0, S0 = 4
    CHECK(morans_i(e, p) == doctest::Approx(0.0));
    // Σ_ij W_ij (e_i - e_j)² = 2·(1 + 1) = 4
    CHECK(gearys_c(e, p) == doctest::Approx(2.0 / 8.0 * 4.0 / 2.0));
  }
  CHECK_THROWS_AS(morans_i(VectorXd::Constant(100, 3.0), g), InvalidArgument);
  CHECK_THROWS_AS(gearys_c(VectorXd::Ones(5), g), InvalidArgument);
  CHECK_THROWS_AS(moran_test(standard_normal(100, 1, rng).col(0), g, 100, rng), InvalidArgument);
}

TEST_CASE("Kronecker log likelihood") {
  Rng rng(7);
  const auto g = oracle::random_graph(8, 0.3, rng);
  const auto W = make_scaled_precision(g, PrecisionKind::car, 0.9);
  const auto spectral = spectral_decompose(W);
  const MatrixXd X = oracle::random_design(8, 1, rng);
  const MatrixXd Y = standard_normal(8, 2, rng);
  for (int t = 0; t < 5; ++t) {
    const auto d = spatial_likelihood_draw(standard_normal(2, 2, rng), oracle::random_upper(2, rng),
                                           oracle::random_proportions(2, rng));
    const MatrixXd cov = kron(d.S_I, MatrixXd::Identity(8, 8)) + kron(d.S_W, W.covariance);
    CHECK(kronecker_log_likelihood(d, Y, X, spectral) ==
          doctest::Approx(oracle::dense_log_normal(vec(Y), vec(X * d.B), cov)).epsilon(1e-10));
  }
}

TEST_CASE("DIC") {
  Rng rng(8);
  const auto g = oracle::lattice_graph(5, 6);
  const auto W = make_scaled_precision(g, PrecisionKind::car, 0.9);
  const auto spectral = spectral_decompose(W);
  const Index n = g.n;

  SUBCASE("single draw has no effective parameters") {
    const MatrixXd X = oracle::random_design(n, 1, rng);
    const MatrixXd Y = standard_normal(n, 2, rng);
    const std::vector<LikelihoodDraw> one{spatial_likelihood_draw(MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2),
                                                                  VectorXd::Constant(2, 0.4))};
    const auto d = dic(one, Y, X, spectral);
    CHECK(d.p_d == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d.dic == doctest::Approx(-2.0 * kronecker_log_likelihood(one[0], Y, X, spectral)));
  }
  SUBCASE("non-spatial conjugate posterior") {
    const Index big = 200;
    const auto gb = oracle::path_graph(big);
    const auto sb = spectral_decompose(make_scaled_precision(gb, PrecisionKind::car, 0.9));
    const MatrixXd X = oracle::random_design(big, 1, rng);
    const MatrixXd Y = X * MatrixXd{{1.0, 0.0}, {0.5, -0.5}} + standard_normal(big, 2, rng);
    const auto post = fit_nonspatial(Y, X, 2.0, default_sigma0(Y, X));
    const auto draws = sample_nonspatial(post, 4000, rng);
    std::vector<LikelihoodDraw> ld;
    for (std::size_t s = 0; s < draws.B.size(); ++s) ld.push_back({draws.B[s], draws.Sigma[s], MatrixXd::Zero(2, 2)});
    // dense check on a few draws; R = 0 means Σ ⊗ I
    const std::span<const LikelihoodDraw> few(ld.data(), 20);
    double direct = 0.0;
    for (const auto& d : few) direct += oracle::dense_log_normal(vec(Y), vec(X * d.B), kron(d.S_I, MatrixXd::Identity(big, big)));
    CHECK(dic(few, Y, X, sb).mean_log_lik == doctest::Approx(direct / 20.0).epsilon(1e-10));
    const auto d = dic(ld, Y, X, sb);
    // 4 coefficients + 3 covariance entries
    CHECK(d.p_d > 5.0);
    CHECK(d.p_d < 9.0);
    CHECK(dic(ld, Y, X, sb).dic == d.dic);
  }
  SUBCASE("spatial data favour the spatial model") {
    const MatrixXd L = W.covariance.llt().matrixL();
    const MatrixXd M{{1.0, 0.2}, {0.0, 0.7}};
    const VectorXd r{{0.85, 0.85}};
    int wins = 0;
    const int reps = 15;
    for (int rep = 0; rep < reps; ++rep) {
      const MatrixXd X = oracle::random_design(n, 1, rng);
      const MatrixXd Y = X * MatrixXd::Ones(2, 2) + L * standard_normal(n, 2, rng) * r.cwiseSqrt().asDiagonal() * M +
                         standard_normal(n, 2, rng) * (1.0 - r.array()).sqrt().matrix().asDiagonal() * M;
      SpatialConfig cfg;
      cfg.precision = W;
      cfg.Sigma0 = default_sigma0(Y, X);
      cfg.iterations = 3000;
      cfg.burn_in = 1000;
      cfg.thin = 2;
      cfg.chain_count = 1;
      cfg.seed = static_cast<std::uint64_t>(rep);
      cfg.store_G = false;
      std::vector<LikelihoodDraw> spatial;
      const auto chains = run_chains(cfg, Y, X);
      for (const auto& d : chains.front().draws) spatial.push_back(spatial_likelihood_draw(d.B, d.M, d.r));
      const auto post = fit_nonspatial(Y, X, 2.0, cfg.Sigma0);
      const auto ns = sample_nonspatial(post, 1000, rng);
      std::vector<LikelihoodDraw> flat;
      for (std::size_t s = 0; s < ns.B.size(); ++s) flat.push_back({ns.B[s], ns.Sigma[s], MatrixXd::Zero(2, 2)});
      if (dic(spatial, Y, X, spectral).dic < dic(flat, Y, X, spectral).dic) ++wins;
    }
    CHECK(wins >= 11);
  }
  CHECK_THROWS_AS(dic({}, MatrixXd::Zero(n, 1), MatrixXd::Ones(n, 1), spectral), InvalidArgument);
}
