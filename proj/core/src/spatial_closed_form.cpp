#include "mbym2/spatial_closed_form.hpp"

#include <cmath>
#include <string>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"

namespace mbym2 {
namespace {

void check_inputs(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M, const VectorXd& r, Index n) {
  const Index k = Y.cols();
  if (Y.rows() != n || X.rows() != n) throw InvalidArgument("Y, X and the spatial structure disagree on n");
  if (M.rows() != k || M.cols() != k) throw InvalidArgument("M must be k×k");
  if (r.size() != k) throw InvalidArgument("R must have k diagonal entries");
  for (Index j = 0; j < k; ++j) {
    if (!(r(j) >= 0.0 && r(j) <= 1.0)) throw InvalidArgument("R entries must lie in [0, 1]");
  }
  Eigen::FullPivLU<MatrixXd> lu(M);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw InvalidArgument("M is singular");
}

// Shrinkage of the i-th projected component toward zero: r k / (r k + 1 - r).
double smooth_weight(double r, double k) {
  if (r >= 1.0) return k > 0.0 ? 1.0 : 0.0;
  if (r <= 0.0) return 0.0;
  return r * k / (r * k + 1.0 - r);
}

// Posterior variance of the i-th projected component: r(1 - r) / (r k + 1 - r).
double component_variance(double r, double k) {
  if (r >= 1.0) return k > 0.0 ? 0.0 : 1.0;
  if (r <= 0.0) return 0.0;
  return r * (1.0 - r) / (r * k + 1.0 - r);
}

// Σ_j (Mᵀe_j)(Mᵀe_j)ᵀ ⊗ blocks[j].
MatrixXd weighted_kron_sum(const MatrixXd& M, const std::vector<MatrixXd>& blocks) {
  const Index k = M.rows(), q = blocks.front().rows();
  MatrixXd out = MatrixXd::Zero(k * q, k * q);
  for (Index j = 0; j < k; ++j) {
    for (Index a = 0; a < k; ++a) {
      for (Index b = 0; b < k; ++b) {
        out.block(a * q, b * q, q, q).noalias() += (M(j, a) * M(j, b)) * blocks[static_cast<std::size_t>(j)];
      }
    }
  }
  return 0.5 * (out + out.transpose());
}

}  // namespace

ConditionedPosterior conditioned_estimate(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                          const VectorXd& r, const ProjectedSpectral& projected) {
  const Index n = projected.U.rows(), k = Y.cols();
  check_inputs(Y, X, M, r, n);

  const Eigen::LLT<MatrixXd> xtx(X.transpose() * X);
  const MatrixXd xtx_inv = xtx.solve(MatrixXd::Identity(X.cols(), X.cols()));
  const MatrixXd t2 = xtx.solve(X.transpose() * projected.U);

  ConditionedPosterior cp;
  cp.M = M;
  cp.r = r;
  cp.B_hat = xtx.solve(X.transpose() * Y);

  const MatrixXd y_star = M.transpose().partialPivLu().solve(Y.transpose()).transpose();  // Y M^{-1}
  MatrixXd coords = projected.U_inv * y_star;
  std::vector<MatrixXd> blocks;
  blocks.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    VectorXd d(n);
    for (Index i = 0; i < n; ++i) {
      coords(i, j) *= smooth_weight(r(j), projected.k(i));
      d(i) = component_variance(r(j), projected.k(i));
    }
    blocks.push_back((1.0 - r(j)) * xtx_inv + t2 * d.asDiagonal() * t2.transpose());
  }
  cp.G_hat = projected.U * coords * M;
  cp.B_tilde = cp.B_hat - xtx.solve(X.transpose() * cp.G_hat);
  cp.var_B = weighted_kron_sum(M, blocks);
  return cp;
}

ConditionedPosterior conditioned_estimate(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                          const VectorXd& r, const ScaledPrecision& precision) {
  return conditioned_estimate(Y, X, M, r, projected_spectral(precision, X));
}

ConditionedPosterior conditioned_estimate_dense(const MatrixXd& Y, const MatrixXd& X, const MatrixXd& M,
                                                const VectorXd& r, const ScaledPrecision& precision) {
  const Index n = precision.n(), k = Y.cols();
  check_inputs(Y, X, M, r, n);
  for (Index j = 0; j < k; ++j) {
    if (!(r(j) > 0.0 && r(j) < 1.0)) throw InvalidArgument("dense path needs R entries in (0, 1)");
  }
  require_full_column_rank(X, "design matrix");

  const Eigen::LLT<MatrixXd> xtx(X.transpose() * X);
  const MatrixXd xtx_inv = xtx.solve(MatrixXd::Identity(X.cols(), X.cols()));
  const MatrixXd I = MatrixXd::Identity(n, n);
  const MatrixXd resid = I - X * xtx.solve(X.transpose());
  const MatrixXd m_inv = M.inverse();
  const MatrixXd R = r.asDiagonal();
  const MatrixXd I_k = MatrixXd::Identity(k, k);
  const VectorXd odds = (1.0 - r.array()) / r.array();

  const MatrixXd L = kron(I_k, resid) + kron(odds.asDiagonal(), precision.precision);
  const Eigen::LLT<MatrixXd> l_llt(L);
  if (l_llt.info() != Eigen::Success) throw NumericalError("L is not positive definite");
  const VectorXd g_star = l_llt.solve(vec(resid * Y * m_inv));

  ConditionedPosterior cp;
  cp.M = M;
  cp.r = r;
  cp.B_hat = xtx.solve(X.transpose() * Y);
  cp.G_hat = unvec(g_star, n, k) * M;
  cp.B_tilde = cp.B_hat - xtx.solve(X.transpose() * cp.G_hat);

  // Var = Mᵀ(I - R)M ⊗ (XᵀX)^{-1} + F1 F2 F1ᵀ,
  // F2^{-1} = M^{-1}(I - R)^{-1}M^{-T} ⊗ (I - H) + M^{-1}R^{-1}M^{-T} ⊗ W_φ^{-1}.
  const MatrixXd one_minus_r_inv = (1.0 - r.array()).inverse().matrix().asDiagonal();
  const MatrixXd r_inv = r.array().inverse().matrix().asDiagonal();
  const MatrixXd f2_inv = kron(m_inv * one_minus_r_inv * m_inv.transpose(), resid) +
                          kron(m_inv * r_inv * m_inv.transpose(), precision.precision);
  const MatrixXd f1 = kron(I_k, xtx.solve(X.transpose()));
  const Eigen::LLT<MatrixXd> f2_llt(f2_inv);
  if (f2_llt.info() != Eigen::Success) throw NumericalError("F2 is not positive definite");
  MatrixXd var = kron(M.transpose() * (I_k - R) * M, xtx_inv) + f1 * f2_llt.solve(f1.transpose());
  cp.var_B = 0.5 * (var + var.transpose());
  return cp;
}

MatrixXd limiting_variance(const MatrixXd& X, const MatrixXd& M, const ProjectedSpectral& projected) {
  if (X.rows() != projected.U.rows()) throw InvalidArgument("X and the spatial structure disagree on n");
  const Eigen::LLT<MatrixXd> xtx(X.transpose() * X);
  const MatrixXd t2 = xtx.solve(X.transpose() * projected.U);
  const VectorXd null_part = VectorXd::Ones(projected.k.size()) - projected.k_star;
  MatrixXd inner = t2 * null_part.asDiagonal() * t2.transpose();
  inner = 0.5 * (inner + inner.transpose());
  return kron(M.transpose() * M, inner);
}

InverseWishartParams limiting_M_posterior(const MatrixXd& Y, const MatrixXd& X, const ProjectedSpectral& projected,
                                          double v, const MatrixXd& Sigma0) {
  const Index n = X.rows(), k = Y.cols();
  if (Y.rows() != n || projected.U.rows() != n) throw InvalidArgument("Y, X and the spatial structure disagree on n");
  if (Sigma0.rows() != k || Sigma0.cols() != k) throw InvalidArgument("Σ0 must be k×k");
  InverseWishartParams out;
  out.dof = v + static_cast<double>(n - X.cols());
  const MatrixXd coords = projected.k_star.asDiagonal() * (projected.U_inv * Y);
  out.scale = v * Sigma0 + coords.transpose() * coords;
  out.scale = 0.5 * (out.scale + out.scale.transpose());
  return out;
}

GenerationVariances dg_variance_identities(const MatrixXd& X, const MatrixXd& A, const VectorXd& rho,
                                           const ProjectedSpectral& projected) {
  const Index n = projected.U.rows(), k = A.rows();
  if (X.rows() != n) throw InvalidArgument("X and the spatial structure disagree on n");
  if (A.cols() != k || rho.size() != k) throw InvalidArgument("A must be k×k and ρ of length k");

  const Eigen::LLT<MatrixXd> xtx(X.transpose() * X);
  const MatrixXd xtx_inv = xtx.solve(MatrixXd::Identity(X.cols(), X.cols()));
  const MatrixXd t2 = xtx.solve(X.transpose() * projected.U);
  const MatrixXd t2t2 = t2 * t2.transpose();

  std::vector<MatrixXd> ns_blocks, shrink_blocks;
  for (Index j = 0; j < k; ++j) {
    ns_blocks.push_back((1.0 - rho(j)) * xtx_inv + rho(j) * t2t2);
    // M1 = (P ⊗ K)(I ⊗ K + P^{-1}(I - P) ⊗ I)^{-1}, entrywise ρ² k / (ρ k + 1 - ρ).
    VectorXd m1(n);
    for (Index i = 0; i < n; ++i) m1(i) = rho(j) * smooth_weight(rho(j), projected.k(i));
    shrink_blocks.push_back(t2 * m1.asDiagonal() * t2.transpose());
  }
  GenerationVariances out;
  out.var_B_hat_nonspatial = weighted_kron_sum(A, ns_blocks);
  out.var_B_tilde = out.var_B_hat_nonspatial - weighted_kron_sum(A, shrink_blocks);
  return out;
}

MatrixXd coefficient_variances(const ConditionedPosterior& cp) {
  return unvec(cp.var_B.diagonal(), cp.B_tilde.rows(), cp.B_tilde.cols());
}

IntervalMatrix conditional_intervals(const ConditionedPosterior& cp, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must lie in (0, 1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  const MatrixXd half = z * coefficient_variances(cp).cwiseMax(0.0).cwiseSqrt();
  return {cp.B_tilde - half, cp.B_tilde + half};
}

std::vector<MatrixXd> sample_conditioned(const ConditionedPosterior& cp, Index count, Rng& rng) {
  if (count < 1) throw InvalidArgument("sample count must be at least 1");
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cp.var_B);
  const VectorXd& values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  if (values.minCoeff() < -1e-10 * scale) {
    throw NumericalError("posterior variance of B is not positive semidefinite (smallest eigenvalue " +
                         std::to_string(values.minCoeff()) + ")");
  }
  const MatrixXd root = eig.eigenvectors() * values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const VectorXd mean = vec(cp.B_tilde);
  std::vector<MatrixXd> draws;
  draws.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    const VectorXd z = standard_normal(mean.size(), 1, rng);
    draws.push_back(unvec(mean + root * z, cp.B_tilde.rows(), cp.B_tilde.cols()));
  }
  return draws;
}

}  // namespace mbym2
