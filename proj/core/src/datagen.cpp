#include "mbym2/datagen.hpp"

#include <cmath>
#include <string>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"

namespace mbym2 {

namespace {

void require_invertible(const MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw InvalidArgument(std::string(name) + " must be square");
  Eigen::JacobiSVD<MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s(s.size() - 1) > 1e-12 * s(0))) {
    throw InvalidArgument(std::string(name) + " is singular");
  }
}

MatrixXd stack_intercept(const VectorXd& intercept, const MatrixXd& slopes) {
  MatrixXd out(slopes.rows() + 1, slopes.cols());
  out.row(0) = intercept.transpose();
  out.bottomRows(slopes.rows()) = slopes;
  return out;
}

}  // namespace

MatrixXd GenerationParams::B() const { return stack_intercept(beta0, B1); }
MatrixXd GenerationParams::D() const { return stack_intercept(delta0, D1); }

void GenerationParams::validate() const {
  const Index kk = k(), pp = p();
  if (kk < 1 || pp < 1) throw InvalidArgument("generation parameters need k >= 1 and p >= 1");
  if (B1.rows() != pp || B1.cols() != kk) throw InvalidArgument("B1 must be p×k");
  if (D1.rows() != pp || D1.cols() != kk) throw InvalidArgument("D1 must be p×k");
  if (delta0.size() != kk) throw InvalidArgument("delta0 must have k entries");
  if (rho.size() != kk) throw InvalidArgument("rho must have k entries");
  if (A.rows() != kk) throw InvalidArgument("A must be k×k");
  if (C.rows() != pp) throw InvalidArgument("C must be p×p");
  require_invertible(A, "A");
  require_invertible(C, "C");
  for (Index i = 0; i < kk; ++i) {
    if (!(rho(i) >= 0.0 && rho(i) <= 1.0)) throw InvalidArgument("rho entries must lie in [0, 1]");
  }
  if (V_phi.n() < 2) throw InvalidArgument("generation spatial structure is empty");
}

GenerationParams default_generation_params(const ScaledPrecision& v_phi) {
  GenerationParams g;
  g.beta0 = VectorXd{{0.0, 2.0}};
  g.B1 = MatrixXd{{1.0, 3.0}};
  g.delta0 = VectorXd{{0.5, 0.5}};
  g.D1 = MatrixXd{{0.3, 0.3}};
  g.mu = VectorXd{{0.5}};
  g.A = MatrixXd{{1.0, 0.5}, {0.5, 1.0}};
  g.C = MatrixXd{{2.0}};
  g.rho = VectorXd{{0.9, 0.7}};
  g.V_phi = v_phi;
  return g;
}

MatrixXd design_matrix(const MatrixXd& X1) {
  MatrixXd X(X1.rows(), X1.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(X1.cols()) = X1;
  return X;
}

DatasetGenerator::DatasetGenerator(GenerationParams params) : params_(std::move(params)) {
  params_.validate();
  Eigen::LLT<MatrixXd> llt(params_.V_phi.covariance);
  if (llt.info() != Eigen::Success) throw NumericalError("generation covariance V_phi is not positive definite");
  cov_factor_ = llt.matrixL();
}

MatrixXd DatasetGenerator::generate_covariates(Rng& rng) const {
  const Index n = params_.n();
  const MatrixXd e_x = cov_factor_ * standard_normal(n, params_.p(), rng);
  return VectorXd::Ones(n) * params_.mu.transpose() + e_x * params_.C;
}

Dataset DatasetGenerator::generate_given_covariates(const MatrixXd& X1, Rng& rng) const {
  const Index n = params_.n(), k = params_.k();
  if (X1.rows() != n || X1.cols() != params_.p()) throw InvalidArgument("covariates have the wrong shape");
  const VectorXd ones = VectorXd::Ones(n);

  const MatrixXd e_z = cov_factor_ * standard_normal(n, k, rng) * params_.rho.cwiseSqrt().asDiagonal();
  const MatrixXd e_y = standard_normal(n, k, rng) * (VectorXd::Ones(k) - params_.rho).cwiseSqrt().asDiagonal();

  Dataset d;
  d.X1 = X1;
  d.X = design_matrix(X1);
  d.Z = ones * params_.delta0.transpose() + X1 * params_.D1 + e_z * params_.A;
  d.Y = ones * params_.beta0.transpose() + X1 * params_.B1 + d.Z + e_y * params_.A;
  return d;
}

Dataset DatasetGenerator::generate(Rng& rng) const {
  const MatrixXd X1 = generate_covariates(rng);
  return generate_given_covariates(X1, rng);
}

Dataset generate_dataset(const GenerationParams& params, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return DatasetGenerator(params).generate(rng);
}

GaussianSpec marginal_generation_density(const GenerationParams& params, const MatrixXd& X) {
  params.validate();
  const Index n = params.n();
  if (X.rows() != n || X.cols() != params.p() + 1) {
    throw InvalidArgument("design matrix must be n×(p+1) = " + std::to_string(n) + "×" +
                          std::to_string(params.p() + 1));
  }
  const MatrixXd P = params.rho.asDiagonal();
  const MatrixXd I_k = MatrixXd::Identity(params.k(), params.k());
  GaussianSpec out;
  out.mean = vec(X * (params.B() + params.D()));
  out.cov = kron(params.A.transpose() * P * params.A, params.V_phi.covariance) +
            kron(params.A.transpose() * (I_k - P) * params.A, MatrixXd::Identity(n, n));
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

MatrixXd unconditional_estimand(const GenerationParams& params) { return params.B() + params.D(); }

}  // namespace mbym2
