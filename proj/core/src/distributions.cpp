#include "mbym2/distributions.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mbym2/error.hpp"

namespace mbym2 {

MatrixXd sample_inverse_wishart(double dof, const MatrixXd& scale, Rng& rng) {
  const auto k = scale.rows();
  if (!(dof > static_cast<double>(k) - 1.0)) throw InvalidArgument("inverse-Wishart needs dof > k - 1");
  Eigen::LLT<MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("inverse-Wishart scale is not positive definite");
  const MatrixXd c = llt.matrixL();  // scale = c cᵀ, so scale^{-1} = c^{-T} c^{-1}

  // Bartlett factor: Σ^{-1} = c^{-T} a aᵀ c^{-1} ~ Wishart(dof, scale^{-1}).
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd a = MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    std::chi_squared_distribution<double> chi2(dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  // Σ = c a^{-T} a^{-1} cᵀ = t tᵀ with t = c a^{-T}.
  const MatrixXd a_inv_t =
      a.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(k, k));
  const MatrixXd t = c * a_inv_t;
  MatrixXd sigma = t * t.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

double log_multivariate_gamma(int k, double a) {
  double out = 0.25 * k * (k - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= k; ++j) out += std::lgamma(a + 0.5 * (1 - j));
  return out;
}

double inverse_wishart_log_density(const MatrixXd& sigma, double dof, const MatrixXd& scale) {
  const auto k = static_cast<int>(scale.rows());
  Eigen::LLT<MatrixXd> ls(sigma), lscale(scale);
  if (ls.info() != Eigen::Success || lscale.info() != Eigen::Success) {
    throw NumericalError("inverse-Wishart density needs positive definite arguments");
  }
  const double logdet_sigma = 2.0 * ls.matrixLLT().diagonal().array().log().sum();
  const double logdet_scale = 2.0 * lscale.matrixLLT().diagonal().array().log().sum();
  const double trace = ls.solve(scale).trace();
  return 0.5 * dof * logdet_scale - 0.5 * dof * k * std::log(2.0) - log_multivariate_gamma(k, 0.5 * dof) -
         0.5 * (dof + k + 1) * logdet_sigma - 0.5 * trace;
}

double mvn_log_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("normal density needs a positive definite covariance");
  const VectorXd z = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + z.squaredNorm());
}

}  // namespace mbym2
