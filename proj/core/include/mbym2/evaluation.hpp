#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mbym2/datagen.hpp"
#include "mbym2/random.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

// ---- posterior summaries and chain diagnostics ----

/// Shortest window holding ceil(level·N) consecutive order statistics; the
/// lowest such window wins ties. Needs at least 100 draws.
std::pair<double, double> hpd_interval(std::vector<double> samples, double level);

struct Convergence {
  double rhat = 0.0;  // NaN when every draw is identical
  double ess = 0.0;
};

/// Rank-normalised split R-hat (max of bulk and folded) and bulk ESS. Each
/// chain is split in half, draws are replaced by Φ^{-1}((rank - 3/8)/(S + 1/4))
/// over the pooled ranks, and ESS uses Geyer's initial monotone sequence on the
/// multi-chain autocorrelation estimate. Chains must have equal length >= 4.
Convergence rhat_ess(const std::vector<std::vector<double>>& chains);

// ---- frequentist evaluation over replicates ----

struct ReplicateRecord {
  MatrixXd estimate;            // (p+1)×k point estimate
  MatrixXd lower;               // interval endpoints
  MatrixXd upper;
  MatrixXd posterior_variance;  // marginal posterior variances
};

struct EvalReport {
  MatrixXd mse;
  MatrixXd coverage;
  MatrixXd avg_posterior_variance;
  Index replicate_count = 0;
};

/// Mean squared error against F, interval coverage of F and mean posterior
/// variance, entrywise. Throws InvalidArgument with fewer than
/// `min_replicates` records or mismatched shapes.
EvalReport frequentist_eval(std::span<const ReplicateRecord> records, const MatrixXd& F, Index min_replicates = 30);

// ---- Kullback-Leibler model fit ----

/// ½[tr(Σ_q^{-1}Σ_p) + (μ_q - μ_p)ᵀΣ_q^{-1}(μ_q - μ_p) - d + log|Σ_q|/|Σ_p|] by dense Cholesky.
double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q);

/// N(vec(mean), S_I ⊗ I + S_V ⊗ V) for an n×n covariance V fixed by context.
struct KroneckerGaussian {
  MatrixXd mean;  // n×k
  MatrixXd S_I;   // k×k
  MatrixXd S_V;   // k×k
};

GaussianSpec to_dense(const KroneckerGaussian& g, const MatrixXd& V);

/// KL(p ‖ q) for p with spatial covariance V (generation) and q with spatial
/// covariance W (analysis). Both covariances are block diagonal (n blocks
/// S_I + ω S_V) in the eigenbasis of their own spatial structure, and each
/// pencil S_I + ω S_V is diagonalised once, so a call costs O(n²k + nk²) after
/// an O(n³) setup.
class KroneckerKl {
 public:
  KroneckerKl(const SpectralBasis& generation, const SpectralBasis& analysis);

  double operator()(const KroneckerGaussian& p, const KroneckerGaussian& q) const;

 private:
  double blockwise(const KroneckerGaussian& p, const KroneckerGaussian& q) const;

  VectorXd v_eigen_;      // eigenvalues of V
  VectorXd w_eigen_;      // eigenvalues of W
  VectorXd v_rotated_;    // diag(Q_Wᵀ V Q_W)
  MatrixXd qw_;           // eigenvectors of W
};

/// Generation density p(Y0 | X) in Kronecker form.
KroneckerGaussian generation_kronecker(const GenerationParams& params, const MatrixXd& X);

/// Analysis-model density q(Y0 | X, θ) for (B, M, R): mean XB,
/// covariance Mᵀ(I - R)M ⊗ I + MᵀRM ⊗ W. Non-spatial models use M = chol(Σ), R = 0.
KroneckerGaussian analysis_kronecker(const MatrixXd& X, const MatrixXd& B, const MatrixXd& M, const VectorXd& r);

/// Posterior mean of KL(p ‖ q_θ) over draws θ = (B, M, R).
struct ModelDraw {
  MatrixXd B;
  MatrixXd M;
  VectorXd r;
};
double kl_fit_summary(const KroneckerKl& kl, const KroneckerGaussian& generation, const MatrixXd& X,
                      std::span<const ModelDraw> draws);

// ---- spatial autocorrelation ----

/// (n/S0)·(eᵀWe)/(eᵀe) for centred e and binary W.
double morans_i(const VectorXd& residuals, const AdjacencyGraph& graph);

/// ((n - 1)/(2S0))·Σ_ij W_ij(e_i - e_j)²/(eᵀe) for centred e.
double gearys_c(const VectorXd& residuals, const AdjacencyGraph& graph);

enum class Sidedness {
  two_sided,  // |stat - null_center| as large or larger
  lower,      // stat as small or smaller
  upper,      // stat as large or larger
};

struct PermutationResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Index permutations = 0;
};

using AutocorrelationStatistic = std::function<double(const VectorXd&, const AdjacencyGraph&)>;

/// p = (1 + #{permuted statistics as or more extreme}) / (n_perm + 1).
/// Requires n_perm >= 999 and non-constant residuals.
PermutationResult permutation_test(const AutocorrelationStatistic& stat, const VectorXd& residuals,
                                   const AdjacencyGraph& graph, Index n_perm, Sidedness sidedness,
                                   double null_center, Rng& rng);

/// Moran's I, two-sided about its null mean -1/(n - 1).
PermutationResult moran_test(const VectorXd& residuals, const AdjacencyGraph& graph, Index n_perm, Rng& rng);
/// Geary's C, one-sided toward small values (positive autocorrelation).
PermutationResult geary_test(const VectorXd& residuals, const AdjacencyGraph& graph, Index n_perm, Rng& rng);

// ---- DIC ----

/// Likelihood parameters of Y ~ N(XB, S_I ⊗ I + S_W ⊗ W).
struct LikelihoodDraw {
  MatrixXd B;
  MatrixXd S_I;
  MatrixXd S_W;
};

LikelihoodDraw spatial_likelihood_draw(const MatrixXd& B, const MatrixXd& M, const VectorXd& r);

/// log N(vec(Y) | vec(XB), S_I ⊗ I + S_W ⊗ W) in the eigenbasis of W.
double kronecker_log_likelihood(const LikelihoodDraw& draw, const MatrixXd& Y, const MatrixXd& X,
                                const SpectralBasis& spectral);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double log_lik_at_mean = 0.0;
  double mean_log_lik = 0.0;
};

/// DIC = -2 log p(Y | θ̄) + 2 p_D, p_D = 2(log p(Y | θ̄) - mean log p(Y | θ)), θ̄ the
/// posterior mean of (B, S_I, S_W). Throws NumericalError on non-finite values.
DicResult dic(std::span<const LikelihoodDraw> draws, const MatrixXd& Y, const MatrixXd& X,
              const SpectralBasis& spectral);

}  // namespace mbym2
