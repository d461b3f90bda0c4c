#pragma once

#include <Eigen/Dense>

#include "mbym2/random.hpp"

namespace mbym2 {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Inverse-Wishart convention used throughout:
//   IW(Σ | dof, S) ∝ |Σ|^{-(dof + k + 1)/2} exp(-tr(S Σ^{-1}) / 2),
// so Σ^{-1} ~ Wishart(dof, S^{-1}), E[Σ^{-1}] = dof S^{-1} and
// E[Σ] = S / (dof - k - 1). With S = vΣ0 and dof = v this gives E[Σ^{-1}] = Σ0^{-1}.

/// Draw Σ ~ IW(dof, scale) by the Bartlett decomposition; only triangular
/// solves against the Cholesky factor of `scale` are used. Requires dof > k - 1.
MatrixXd sample_inverse_wishart(double dof, const MatrixXd& scale, Rng& rng);

/// Normalised log density of IW(dof, scale) at sigma.
double inverse_wishart_log_density(const MatrixXd& sigma, double dof, const MatrixXd& scale);

/// Normalised log density of N(mean, cov) at x (dense Cholesky).
double mvn_log_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov);

/// log of the multivariate gamma function Γ_k(a).
double log_multivariate_gamma(int k, double a);

}  // namespace mbym2
