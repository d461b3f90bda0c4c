#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mbym2/random.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

// Full spatial model
//   vec(Y) | B, G, M, R ~ N(vec(XB + G), Mᵀ(I - R)M ⊗ I)
//   vec(G) | M, R       ~ N(0, MᵀRM ⊗ W_φ)
//   π(B) ∝ 1,  MᵀM ~ IW(v, vΣ0) with M upper triangular, M_ii > 0,
//   π(R) ∝ exp(-λ_R sqrt(2 KLD(R))),  r_i ∈ (0, 1).

struct SpatialConfig {
  ScaledPrecision precision;  // W_φ^{-1}
  double v = 2.0;
  MatrixXd Sigma0;
  double lambda_R = 0.01;
  double s1 = 0.10;  // sd of the log walk on diag(M)
  double s2 = 0.15;  // sd of the walk on the upper off-diagonal of M
  double s3 = 0.25;  // sd of the logit walk on r
  Index iterations = 40000;  // including burn-in
  Index burn_in = 20000;
  Index thin = 5;
  Index chain_count = 4;
  std::uint64_t seed = 1;
  bool freeze_M = false;
  bool freeze_R = false;
  bool store_G = true;

  /// Throws InvalidArgument on any violated invariant.
  void validate(Index k) const;
  Index saved_draws() const { return (iterations - burn_in) / thin; }
};

struct ChainState {
  MatrixXd B;  // (p+1)×k
  MatrixXd G;  // n×k
  MatrixXd M;  // k×k upper triangular, positive diagonal
  VectorXd r;  // k, each in (0, 1)
};

struct ChainOutput {
  std::vector<ChainState> draws;  // G is left empty unless store_G
  double accept_M = 0.0;
  double accept_R = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// 2·KLD(R) = -nΣr_i + (Σr_i)(Σλ_j^{-1}) - Σ_iΣ_j log(1 - r_i + r_i/λ_j),
/// the divergence of N(0, (1 - r)I + rW_φ) from N(0, I) summed over outcomes.
double pc_kld(const VectorXd& r, const VectorXd& lambdas);

/// -λ_R sqrt(pc_kld(r, lambdas)).
double pc_log_density(const VectorXd& r, double lambda_R, const VectorXd& lambdas);

/// Uniform proposals accepted with probability exp(-λ_R sqrt(2KLD)).
/// Throws NumericalError after 1e7 rejected proposals.
VectorXd pc_rejection_sample(double lambda_R, const VectorXd& lambdas, Index k, Rng& rng);

/// Exact draw from B | G, M, R, Y: N(vec((XᵀX)^{-1}Xᵀ(Y - G)), Mᵀ(I - R)M ⊗ (XᵀX)^{-1}).
/// `xtx_chol` is the lower Cholesky factor of XᵀX.
MatrixXd gibbs_update_beta(const ChainState& state, const MatrixXd& Y, const MatrixXd& X, const MatrixXd& xtx_chol,
                           Rng& rng);

/// Exact draw from G | B, M, R, Y. With G' = Qᵀ(Y - XB)M^{-1}, entry (i, j) of
/// QᵀGM^{-1} is normal with mean r_j G'_ij / (r_j + (1 - r_j)λ_i) and variance
/// r_j(1 - r_j) / (r_j + (1 - r_j)λ_i). Throws InvalidArgument for r_j ∉ (0, 1).
MatrixXd gibbs_update_gamma(const ChainState& state, const MatrixXd& Y, const MatrixXd& X,
                            const SpectralBasis& spectral, Rng& rng);

struct LogTarget {
  double loglik_plus_G_prior = 0.0;
  double log_M_prior = 0.0;
  double log_R_prior = 0.0;

  double total() const { return loglik_plus_G_prior + log_M_prior + log_R_prior; }
};

/// Log posterior pieces up to constants. With Δ = Y - XB - G and
/// θ = W_φ^{-1/2} G M^{-1}:
///   loglik_plus_G_prior = -½Σ_ij((ΔM^{-1})_ij²/(1 - r_j) + θ_ij²/r_j) - (n/2)Σ_j log(r_j(1 - r_j)) - 2nΣ_j log M_jj
///   log_M_prior = -Σ_i (v + i) log M_ii - (v/2) tr(Σ0 (MᵀM)^{-1})   (i = 1..k)
///   log_R_prior = pc_log_density(r, λ_R, λ)
LogTarget log_target_components(const ChainState& state, const MatrixXd& Y, const MatrixXd& X,
                                const SpectralBasis& spectral, const SpatialConfig& config);

/// Log density of the M prior alone (the second component above).
double log_M_prior(const MatrixXd& M, double v, const MatrixXd& Sigma0);

struct MoveResult {
  bool accepted = false;
};

/// Joint random-walk proposal for M: log M*_ii ~ N(log M_ii, s1²), M*_ij ~ N(M_ij, s2²)
/// for i < j. The log-normal asymmetry adds Σ_i log M*_ii - log M_ii to the ratio.
MoveResult mh_update_M(ChainState& state, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral,
                       const SpatialConfig& config, Rng& rng);

/// Joint logit random walk for r with Hastings term Σ log(r*(1 - r*)) - log(r(1 - r)).
MoveResult mh_update_R(ChainState& state, const MatrixXd& Y, const MatrixXd& X, const SpectralBasis& spectral,
                       const SpatialConfig& config, Rng& rng);

/// B = B̂_NS, G = 0, M = upper Cholesky factor of Σ0, r_i ~ U(0.25, 0.75).
ChainState initial_state(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& Sigma0, Rng& rng);

/// One chain: updateBeta, updateGamma, MH M, MH R per iteration (frozen
/// blocks skipped), saving every thin-th post-burn-in state. Throws
/// NumericalError with a state dump if the current log target is non-finite.
ChainOutput run_chain(const SpatialConfig& config, const SpectralBasis& spectral, const MatrixXd& Y,
                      const MatrixXd& X, ChainState init, Rng& rng);

/// config.chain_count chains with seeds derive_seed(config.seed, chain) and
/// independent overdispersed initial states, run on up to `jobs` threads.
/// Output is independent of `jobs`.
std::vector<ChainOutput> run_chains(const SpatialConfig& config, const MatrixXd& Y, const MatrixXd& X,
                                    unsigned jobs = 1);

}  // namespace mbym2
