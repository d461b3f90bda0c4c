#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mbym2/random.hpp"

namespace mbym2 {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Diagonal Σ0 with j-th entry ||(I - H) y_j||² / (n - p - 1).
/// Throws InvalidArgument when n <= p + 1 or a residual is degenerate.
MatrixXd default_sigma0(const MatrixXd& Y, const MatrixXd& X);

/// Exact posterior of the conjugate model
///   Y = X B + E,  vec(E) ~ N(0, Σ ⊗ I),  π(B, Σ) ∝ IW(Σ | v, vΣ0):
///   Σ | Y ~ IW(v + n, vΣ0 + (Y - XB̂)ᵀ(Y - XB̂)),
///   vec(B) | Σ, Y ~ N(vec(B̂), Σ ⊗ (XᵀX)^{-1}).
struct NonSpatialPosterior {
  MatrixXd B_hat;       // (XᵀX)^{-1} XᵀY
  double v_star = 0.0;  // v + n
  MatrixXd Sigma_star;  // vΣ0 + residual cross-product
  MatrixXd XtX_chol;    // lower L, L Lᵀ = XᵀX
  MatrixXd XtX_inv;

  Index k() const { return B_hat.cols(); }
  Index coefficients() const { return B_hat.rows(); }
  /// E[Σ | Y] = Σ* / (v* - k - 1) (finite when v* > k + 1).
  MatrixXd expected_sigma() const;
  /// Marginal posterior covariance of vec(B): E[Σ] ⊗ (XᵀX)^{-1}.
  MatrixXd coefficient_covariance() const;
};

NonSpatialPosterior fit_nonspatial(const MatrixXd& Y, const MatrixXd& X, double v, const MatrixXd& Sigma0);

struct NonSpatialDraws {
  std::vector<MatrixXd> B;
  std::vector<MatrixXd> Sigma;
};

/// Exact joint draws: Σ ~ IW(v*, Σ*) then B | Σ.
NonSpatialDraws sample_nonspatial(const NonSpatialPosterior& post, Index count, Rng& rng);

}  // namespace mbym2
