#include "mbym2/nonspatial.hpp"

#include <string>

#include "mbym2/distributions.hpp"
#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"

namespace mbym2 {

MatrixXd default_sigma0(const MatrixXd& Y, const MatrixXd& X) {
  const Index n = X.rows(), cols = X.cols();
  if (Y.rows() != n) throw InvalidArgument("Y and X have different row counts");
  if (n <= cols) throw InvalidArgument("default Σ0 needs n > p + 1");
  require_full_column_rank(X, "design matrix");
  const MatrixXd residual = Y - X * X.colPivHouseholderQr().solve(Y);
  MatrixXd sigma0 = MatrixXd::Zero(Y.cols(), Y.cols());
  for (Index j = 0; j < Y.cols(); ++j) {
    const double scale = std::max(1.0, Y.col(j).squaredNorm() / static_cast<double>(n));
    const double value = residual.col(j).squaredNorm() / static_cast<double>(n - cols);
    if (!(value > 1e-14 * scale)) {
      throw InvalidArgument("degenerate scale: outcome " + std::to_string(j) + " is fitted exactly by X");
    }
    sigma0(j, j) = value;
  }
  return sigma0;
}

MatrixXd NonSpatialPosterior::expected_sigma() const {
  const double denom = v_star - static_cast<double>(k()) - 1.0;
  if (!(denom > 0.0)) throw InvalidArgument("posterior mean of Σ is infinite (v* <= k + 1)");
  return Sigma_star / denom;
}

MatrixXd NonSpatialPosterior::coefficient_covariance() const { return kron(expected_sigma(), XtX_inv); }

NonSpatialPosterior fit_nonspatial(const MatrixXd& Y, const MatrixXd& X, double v, const MatrixXd& Sigma0) {
  const Index n = X.rows(), k = Y.cols();
  if (Y.rows() != n) throw InvalidArgument("Y and X have different row counts");
  require_full_column_rank(X, "design matrix");
  if (!(v > static_cast<double>(k) - 1.0)) throw InvalidArgument("prior degrees of freedom must exceed k - 1");
  if (Sigma0.rows() != k || Sigma0.cols() != k) throw InvalidArgument("Σ0 must be k×k");
  require_positive_definite(Sigma0, "Σ0");

  NonSpatialPosterior post;
  const MatrixXd xtx = X.transpose() * X;
  Eigen::LLT<MatrixXd> llt(xtx);
  post.XtX_chol = llt.matrixL();
  post.XtX_inv = llt.solve(MatrixXd::Identity(xtx.rows(), xtx.cols()));
  post.B_hat = llt.solve(X.transpose() * Y);
  const MatrixXd residual = Y - X * post.B_hat;
  post.v_star = v + static_cast<double>(n);
  post.Sigma_star = v * Sigma0 + residual.transpose() * residual;
  post.Sigma_star = 0.5 * (post.Sigma_star + post.Sigma_star.transpose());
  return post;
}

NonSpatialDraws sample_nonspatial(const NonSpatialPosterior& post, Index count, Rng& rng) {
  if (count < 1) throw InvalidArgument("sample count must be at least 1");
  NonSpatialDraws out;
  out.B.reserve(static_cast<std::size_t>(count));
  out.Sigma.reserve(static_cast<std::size_t>(count));
  const auto lt = post.XtX_chol.transpose().triangularView<Eigen::Upper>();
  for (Index s = 0; s < count; ++s) {
    MatrixXd sigma = sample_inverse_wishart(post.v_star, post.Sigma_star, rng);
    const MatrixXd c = sigma.llt().matrixL();
    // vec(L^{-T} Z cᵀ) has covariance (c cᵀ) ⊗ (L Lᵀ)^{-1}.
    const MatrixXd z = standard_normal(post.coefficients(), post.k(), rng);
    out.B.push_back(post.B_hat + lt.solve(z) * c.transpose());
    out.Sigma.push_back(std::move(sigma));
  }
  return out;
}

}  // namespace mbym2
