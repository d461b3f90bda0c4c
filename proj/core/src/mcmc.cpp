#include "mbym2/mcmc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/parallel.hpp"

namespace mbym2 {
namespace {

constexpr double kFloor = 1e-12;
constexpr long kMaxRejections = 10'000'000;

// Y - XB - G and QᵀG; everything the target needs once (B, G) are fixed.
struct Residuals {
  MatrixXd delta;
  MatrixXd qt_G;
};

Residuals make_residuals(const ChainState& s, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral) {
  return {Y - X * s.B - s.G, spectral.Q.transpose() * s.G};
}

MatrixXd right_solve_upper(const MatrixXd& M, const MatrixXd& rhs) {
  return M.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(rhs);
}

double loglik_gamma(const Residuals& res, const VectorXd& lambda, const MatrixXd& M, const VectorXd& r) {
  const auto n = static_cast<double>(res.delta.rows());
  const MatrixXd dm = right_solve_upper(M, res.delta);
  const MatrixXd tm = right_solve_upper(M, res.qt_G);
  double out = 0.0;
  for (Index j = 0; j < M.rows(); ++j) {
    const double rj = std::max(r(j), kFloor);
    const double qj = std::max(1.0 - r(j), kFloor);
    const double theta2 = (lambda.array() * tm.col(j).array().square()).sum();
    out += -0.5 * (dm.col(j).squaredNorm() / qj + theta2 / rj);
    out += -0.5 * n * (std::log(rj) + std::log(qj)) - 2.0 * n * std::log(M(j, j));
  }
  return out;
}

double sum_inverse(const VectorXd& lambdas) { return lambdas.cwiseInverse().sum(); }

double pc_kld_with_sum(const VectorXd& r, const VectorXd& lambdas, double inv_sum) {
  const auto n = static_cast<double>(lambdas.size());
  double out = 0.0;
  for (Index i = 0; i < r.size(); ++i) {
    const double ri = r(i);
    double logs = 0.0;
    for (Index j = 0; j < lambdas.size(); ++j) logs += std::log1p(ri * (1.0 / lambdas(j) - 1.0));
    out += -n * ri + ri * inv_sum - logs;
  }
  if (out < 0.0) {
    if (out < -1e-10) throw NumericalError("2·KLD evaluated to " + std::to_string(out));
    out = 0.0;
  }
  return out;
}

void require_lambdas(const VectorXd& lambdas) {
  if (lambdas.size() == 0) throw InvalidArgument("eigenvalue vector is empty");
  if (!(lambdas.minCoeff() > 0.0)) throw InvalidArgument("eigenvalues of W_φ^{-1} must be positive");
}

void require_state(const ChainState& s, const MatrixXd& Y, const MatrixXd& X) {
  const Index n = Y.rows(), k = Y.cols(), q = X.cols();
  if (X.rows() != n) throw InvalidArgument("Y and X have different row counts");
  if (s.B.rows() != q || s.B.cols() != k) throw InvalidArgument("state B has the wrong shape");
  if (s.G.rows() != n || s.G.cols() != k) throw InvalidArgument("state G has the wrong shape");
  if (s.M.rows() != k || s.M.cols() != k) throw InvalidArgument("state M has the wrong shape");
  if (s.r.size() != k) throw InvalidArgument("state R has the wrong length");
  for (Index i = 0; i < k; ++i) {
    if (!(s.M(i, i) > 0.0)) throw InvalidArgument("M must have a positive diagonal");
    for (Index j = 0; j < i; ++j) {
      if (s.M(i, j) != 0.0) throw InvalidArgument("M must be upper triangular");
    }
  }
}

std::string dump_state(const ChainState& s, Index iteration) {
  std::ostringstream os;
  os << "non-finite log target at iteration " << iteration << "; M = [" << s.M.format(Eigen::IOFormat(6, 0, ", ", "; "))
     << "], r = [" << s.r.transpose().format(Eigen::IOFormat(6, 0, ", ")) << "], B = ["
     << s.B.format(Eigen::IOFormat(6, 0, ", ", "; ")) << "]";
  return os.str();
}

struct Sampler {
  const SpatialConfig& config;
  const SpectralBasis& spectral;
  const MatrixXd& Y;
  const MatrixXd& X;
  double inv_sum;

  double r_prior(const VectorXd& r) const {
    return -config.lambda_R * std::sqrt(pc_kld_with_sum(r, spectral.lambda, inv_sum));
  }

  // `loglik` holds loglik_gamma at the current state and is updated on acceptance.
  bool move_M(ChainState& s, const Residuals& res, double& loglik, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index k = s.M.rows();
    MatrixXd proposal = s.M;
    double log_alpha = 0.0;
    for (Index i = 0; i < k; ++i) {
      proposal(i, i) = s.M(i, i) * std::exp(config.s1 * normal(rng));
      log_alpha += std::log(proposal(i, i)) - std::log(s.M(i, i));
      for (Index j = i + 1; j < k; ++j) proposal(i, j) = s.M(i, j) + config.s2 * normal(rng);
    }
    const double u = uniform01(rng);
    if (!(proposal.diagonal().minCoeff() > 0.0)) return false;
    const double proposed = loglik_gamma(res, spectral.lambda, proposal, s.r);
    log_alpha += proposed + log_M_prior(proposal, config.v, config.Sigma0) - loglik -
                 log_M_prior(s.M, config.v, config.Sigma0);
    if (!std::isfinite(log_alpha) || !(std::log(u) < log_alpha)) return false;
    s.M = std::move(proposal);
    loglik = proposed;
    return true;
  }

  bool move_R(ChainState& s, const Residuals& res, double& loglik, double& prior, Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index k = s.r.size();
    VectorXd proposal(k);
    double log_alpha = 0.0;
    for (Index i = 0; i < k; ++i) {
      const double ri = s.r(i);
      const double eta = std::log(ri) - std::log1p(-ri) + config.s3 * normal(rng);
      proposal(i) = 1.0 / (1.0 + std::exp(-eta));
      log_alpha += std::log(proposal(i) * (1.0 - proposal(i))) - std::log(ri * (1.0 - ri));
    }
    const double u = uniform01(rng);
    if (!(proposal.minCoeff() > 0.0 && proposal.maxCoeff() < 1.0)) return false;
    const double proposed = loglik_gamma(res, spectral.lambda, s.M, proposal);
    const double proposed_prior = r_prior(proposal);
    log_alpha += proposed + proposed_prior - loglik - prior;
    if (!std::isfinite(log_alpha) || !(std::log(u) < log_alpha)) return false;
    s.r = std::move(proposal);
    loglik = proposed;
    prior = proposed_prior;
    return true;
  }
};

// Returns G and sets qt_G = QᵀG as a by-product.
MatrixXd draw_gamma(const ChainState& s, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral,
                    Rng& rng, MatrixXd* qt_G) {
  const Index n = Y.rows(), k = Y.cols();
  for (Index j = 0; j < k; ++j) {
    if (!(s.r(j) > 0.0 && s.r(j) < 1.0)) throw InvalidArgument("updateGamma needs every r_j in (0, 1)");
  }
  MatrixXd rotated = right_solve_upper(s.M, spectral.Q.transpose() * (Y - X * s.B));
  const MatrixXd z = standard_normal(n, k, rng);
  for (Index j = 0; j < k; ++j) {
    const double rj = s.r(j);
    for (Index i = 0; i < n; ++i) {
      const double denom = rj + (1.0 - rj) * spectral.lambda(i);
      rotated(i, j) = rj / denom * rotated(i, j) + std::sqrt(rj * (1.0 - rj) / denom) * z(i, j);
    }
  }
  MatrixXd qg = rotated * s.M.triangularView<Eigen::Upper>();
  MatrixXd G = spectral.Q * qg;
  if (qt_G) *qt_G = std::move(qg);
  return G;
}

}  // namespace

void SpatialConfig::validate(Index k) const {
  if (precision.n() == 0) throw InvalidArgument("spatial config has no precision matrix");
  if (!(v > static_cast<double>(k) - 1.0)) throw InvalidArgument("v must exceed k - 1");
  if (Sigma0.rows() != k || Sigma0.cols() != k) throw InvalidArgument("Σ0 must be k×k");
  require_positive_definite(Sigma0, "Σ0");
  if (!(lambda_R > 0.0)) throw InvalidArgument("lambda_R must be positive");
  if (!(s1 > 0.0 && s2 > 0.0 && s3 > 0.0)) throw InvalidArgument("proposal standard deviations must be positive");
  if (thin < 1) throw InvalidArgument("thin must be at least 1");
  if (burn_in < 0 || iterations <= burn_in) throw InvalidArgument("iterations must exceed burn_in >= 0");
  if (chain_count < 1) throw InvalidArgument("chain_count must be at least 1");
}

double pc_kld(const VectorXd& r, const VectorXd& lambdas) {
  require_lambdas(lambdas);
  for (Index i = 0; i < r.size(); ++i) {
    if (!(r(i) >= 0.0 && r(i) < 1.0)) throw InvalidArgument("r must lie in [0, 1)");
  }
  return pc_kld_with_sum(r, lambdas, sum_inverse(lambdas));
}

double pc_log_density(const VectorXd& r, double lambda_R, const VectorXd& lambdas) {
  return -lambda_R * std::sqrt(pc_kld(r, lambdas));
}

VectorXd pc_rejection_sample(double lambda_R, const VectorXd& lambdas, Index k, Rng& rng) {
  if (!(lambda_R > 0.0)) throw InvalidArgument("lambda_R must be positive");
  if (k < 1) throw InvalidArgument("k must be at least 1");
  require_lambdas(lambdas);
  const double inv_sum = sum_inverse(lambdas);
  VectorXd r(k);
  for (long attempt = 0; attempt < kMaxRejections; ++attempt) {
    for (Index i = 0; i < k; ++i) r(i) = uniform01(rng);
    const double log_accept = -lambda_R * std::sqrt(pc_kld_with_sum(r, lambdas, inv_sum));
    if (std::log(uniform01(rng)) < log_accept) return r;
  }
  throw NumericalError("PC prior rejection sampler exceeded 1e7 attempts");
}

MatrixXd gibbs_update_beta(const ChainState& state, const MatrixXd& Y, const MatrixXd& X, const MatrixXd& xtx_chol,
                           Rng& rng) {
  const auto L = xtx_chol.triangularView<Eigen::Lower>();
  MatrixXd mean = L.solve(X.transpose() * (Y - state.G));
  L.transpose().solveInPlace(mean);
  // vec(L^{-T} Z C) has covariance CᵀC ⊗ (XᵀX)^{-1}; C = (I - R)^{1/2} M.
  const VectorXd scale = (1.0 - state.r.array()).max(0.0).sqrt();
  MatrixXd noise = standard_normal(X.cols(), Y.cols(), rng);
  L.transpose().solveInPlace(noise);
  return mean + noise * scale.asDiagonal() * state.M;
}

MatrixXd gibbs_update_gamma(const ChainState& state, const MatrixXd& Y, const MatrixXd& X,
                            const SpectralBasis& spectral, Rng& rng) {
  require_state(state, Y, X);
  return draw_gamma(state, Y, X, spectral, rng, nullptr);
}

double log_M_prior(const MatrixXd& M, double v, const MatrixXd& Sigma0) {
  const Index k = M.rows();
  const MatrixXd m_inv = M.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  double out = -0.5 * v * (m_inv.transpose() * Sigma0 * m_inv).trace();
  for (Index i = 0; i < k; ++i) out -= (v + static_cast<double>(i + 1)) * std::log(M(i, i));
  return out;
}

LogTarget log_target_components(const ChainState& state, const MatrixXd& Y, const MatrixXd& X,
                                const SpectralBasis& spectral, const SpatialConfig& config) {
  require_state(state, Y, X);
  LogTarget t;
  t.loglik_plus_G_prior = loglik_gamma(make_residuals(state, Y, X, spectral), spectral.lambda, state.M, state.r);
  t.log_M_prior = log_M_prior(state.M, config.v, config.Sigma0);
  t.log_R_prior = pc_log_density(state.r, config.lambda_R, spectral.lambda);
  return t;
}

MoveResult mh_update_M(ChainState& state, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral,
                       const SpatialConfig& config, Rng& rng) {
  require_state(state, Y, X);
  const Sampler sampler{config, spectral, Y, X, sum_inverse(spectral.lambda)};
  const Residuals res = make_residuals(state, Y, X, spectral);
  double loglik = loglik_gamma(res, spectral.lambda, state.M, state.r);
  return {sampler.move_M(state, res, loglik, rng)};
}

MoveResult mh_update_R(ChainState& state, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral,
                       const SpatialConfig& config, Rng& rng) {
  require_state(state, Y, X);
  const Sampler sampler{config, spectral, Y, X, sum_inverse(spectral.lambda)};
  const Residuals res = make_residuals(state, Y, X, spectral);
  double loglik = loglik_gamma(res, spectral.lambda, state.M, state.r);
  double prior = sampler.r_prior(state.r);
  return {sampler.move_R(state, res, loglik, prior, rng)};
}

ChainState initial_state(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& Sigma0, Rng& rng) {
  ChainState s;
  s.B = X.colPivHouseholderQr().solve(Y);
  s.G = MatrixXd::Zero(Y.rows(), Y.cols());
  s.M = upper_cholesky(Sigma0);
  s.r.resize(Y.cols());
  for (Index i = 0; i < s.r.size(); ++i) s.r(i) = 0.25 + 0.5 * uniform01(rng);
  return s;
}

ChainOutput run_chain(const SpatialConfig& config, const SpectralBasis& spectral, const MatrixXd& Y,
                      const MatrixXd& X, ChainState init, Rng& rng) {
  config.validate(Y.cols());
  require_state(init, Y, X);
  require_full_column_rank(X, "design matrix");
  if (spectral.lambda.size() != Y.rows()) throw InvalidArgument("spatial structure and Y disagree on n");

  const auto start = std::chrono::steady_clock::now();
  const MatrixXd xtx_chol = (X.transpose() * X).llt().matrixL();
  const Sampler sampler{config, spectral, Y, X, sum_inverse(spectral.lambda)};

  ChainOutput out;
  out.draws.reserve(static_cast<std::size_t>(config.saved_draws()));
  ChainState s = std::move(init);
  Residuals res;
  long accepted_M = 0, accepted_R = 0;
  double prior = sampler.r_prior(s.r);
  for (Index t = 0; t < config.iterations; ++t) {
    s.B = gibbs_update_beta(s, Y, X, xtx_chol, rng);
    s.G = draw_gamma(s, Y, X, spectral, rng, &res.qt_G);
    res.delta = Y - X * s.B - s.G;
    double loglik = loglik_gamma(res, spectral.lambda, s.M, s.r);
    if (!std::isfinite(loglik) || !std::isfinite(prior)) throw NumericalError(dump_state(s, t));
    if (!config.freeze_M && sampler.move_M(s, res, loglik, rng)) ++accepted_M;
    if (!config.freeze_R && sampler.move_R(s, res, loglik, prior, rng)) ++accepted_R;
    if (t >= config.burn_in && (t - config.burn_in + 1) % config.thin == 0) {
      out.draws.push_back(config.store_G ? s : ChainState{s.B, MatrixXd(), s.M, s.r});
    }
  }
  const auto iterations = static_cast<double>(config.iterations);
  out.accept_M = config.freeze_M ? 0.0 : static_cast<double>(accepted_M) / iterations;
  out.accept_R = config.freeze_R ? 0.0 : static_cast<double>(accepted_R) / iterations;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<ChainOutput> run_chains(const SpatialConfig& config, const MatrixXd& Y, const MatrixXd& X,
                                    unsigned jobs) {
  config.validate(Y.cols());
  if (config.precision.n() != Y.rows()) throw InvalidArgument("spatial structure and Y disagree on n");
  const SpectralBasis spectral = spectral_decompose(config.precision);
  std::vector<ChainOutput> outputs(static_cast<std::size_t>(config.chain_count));
  parallel_for(outputs.size(), jobs, [&](std::size_t c) {
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
    Rng rng = make_rng(seed);
    ChainState init = initial_state(Y, X, config.Sigma0, rng);
    outputs[c] = run_chain(config, spectral, Y, X, std::move(init), rng);
    outputs[c].seed = seed;
  });
  return outputs;
}

}  // namespace mbym2
