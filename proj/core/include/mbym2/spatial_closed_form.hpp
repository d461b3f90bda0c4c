#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mbym2/random.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

// Closed-form quantities of the spatial model
//   Y = X B_S + G + E_S,  G = Φ M,  E_S = Ψ M,
//   φ_j ~ N(0, r_j W_φ),  ψ_j ~ N(0, (1 - r_j) I),
// with B_S flat and (M, R) held fixed. Everything is evaluated in the basis U
// that diagonalises W_φ^{-1} and I - H simultaneously, so each outcome costs
// n scalar operations after one O(n³) decomposition per (X, W_φ).

/// Posterior of (B_S, G) given (Y, M, R).
struct ConditionedPosterior {
  MatrixXd B_tilde;  // E[B_S | Y, M, R]
  MatrixXd G_hat;    // E[G | Y, M, R]
  MatrixXd var_B;    // Var(vec(B_S) | Y, M, R), (p+1)k square
  MatrixXd B_hat;    // non-spatial estimate (XᵀX)^{-1}XᵀY
  MatrixXd M;
  VectorXd r;        // diagonal of R
};

/// Conditioned estimator
///   vec(Ĝ) = (Mᵀ ⊗ I) L^{-1} vec((I - H) Y M^{-1}),  L = I ⊗ (I - H) + R^{-1}(I - R) ⊗ W_φ^{-1},
///   B̃ = B̂ - (XᵀX)^{-1} Xᵀ Ĝ,
///   Var = Mᵀ(I - R)M ⊗ (XᵀX)^{-1} + S1 ((I - R)^{-1} ⊗ K + R^{-1} ⊗ I)^{-1} S1ᵀ,
/// S1 = Mᵀ ⊗ (XᵀX)^{-1}XᵀU. r_j = 0 and r_j = 1 are evaluated by their limits.
/// Throws InvalidArgument for singular M or r outside [0, 1].
ConditionedPosterior conditioned_estimate(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                          const VectorXd& r, const ProjectedSpectral& projected);
ConditionedPosterior conditioned_estimate(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                          const VectorXd& r, const ScaledPrecision& precision);

/// Same quantities by a dense nk×nk Cholesky solve of L; r must lie in (0, 1).
/// O((nk)³); used to cross-check the spectral path.
ConditionedPosterior conditioned_estimate_dense(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                                const VectorXd& r, const ScaledPrecision& precision);

/// lim_{r→1} Var(vec(B_S) | Y, M, rI) = MᵀM ⊗ (XᵀX)^{-1}Xᵀ(W_φ - U K* Uᵀ)X(XᵀX)^{-1}.
MatrixXd limiting_variance(const MatrixXd& X, const MatrixXd& M, const ProjectedSpectral& projected);

struct InverseWishartParams {
  double dof = 0.0;
  MatrixXd scale;
};

/// lim_{r→1} posterior of MᵀM: IW(v + n - p - 1, vΣ0 + Yᵀ U^{-T} K* U^{-1} Y).
InverseWishartParams limiting_M_posterior(const MatrixXd& Y, const MatrixXd& X, const ProjectedSpectral& projected,
                                          double v, const MatrixXd& Sigma0);

/// Sampling variances of the two point estimators over draws of (Z, Y) with
/// X1 fixed, when the generation and analysis spatial structures coincide and
/// the conditioned estimator uses (M, R) = (A, P).
struct GenerationVariances {
  MatrixXd var_B_tilde;       // Var_DG(vec(B̃) | X1)
  MatrixXd var_B_hat_nonspatial;  // Var_DG(vec(B̂_NS) | X1)
};

GenerationVariances dg_variance_identities(const MatrixXd& X, const MatrixXd& A, const VectorXd& rho,
                                           const ProjectedSpectral& projected);

struct IntervalMatrix {
  MatrixXd lower;
  MatrixXd upper;

  bool contains(Index i, Index j, double value) const { return lower(i, j) <= value && value <= upper(i, j); }
};

/// B̃_ij ± z_{(1+level)/2} sqrt(Var(B_S,ij | Y, M, R)).
IntervalMatrix conditional_intervals(const ConditionedPosterior& cp, double level);

/// Marginal posterior variances of the entries of B_S as a (p+1)×k matrix.
MatrixXd coefficient_variances(const ConditionedPosterior& cp);

/// Exact draws from N(vec(B̃), var_B). Throws NumericalError if var_B is not PSD.
std::vector<MatrixXd> sample_conditioned(const ConditionedPosterior& cp, Index count, Rng& rng);

}  // namespace mbym2
