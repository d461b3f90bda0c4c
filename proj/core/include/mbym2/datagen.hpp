#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "mbym2/random.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

/// Fixed unknowns of the spatially confounded generation model
///   X1 = 1 muᵀ + E_X C,  Z = 1 delta0ᵀ + X1 D1 + E_Z A,  Y = 1 beta0ᵀ + X1 B1 + Z + E_Y A
/// with columns of E_X ~ N(0, V), column i of E_Z ~ N(0, rho_i V) and column i
/// of E_Y ~ N(0, (1 - rho_i) I).
struct GenerationParams {
  VectorXd beta0;   // k
  MatrixXd B1;      // p×k
  VectorXd delta0;  // k
  MatrixXd D1;      // p×k
  VectorXd mu;      // p
  MatrixXd A;       // k×k, invertible
  MatrixXd C;       // p×p, invertible
  VectorXd rho;     // diagonal of P, entries in [0, 1]
  ScaledPrecision V_phi;

  Index k() const { return beta0.size(); }
  Index p() const { return mu.size(); }
  Index n() const { return V_phi.n(); }

  /// (p+1)×k matrix [beta0ᵀ; B1].
  MatrixXd B() const;
  /// (p+1)×k matrix [delta0ᵀ; D1].
  MatrixXd D() const;

  /// Throws InvalidArgument on inconsistent dimensions, singular A or C, or
  /// rho outside [0, 1].
  void validate() const;
};

/// Simulation settings: beta0 = (0, 2), B1 = (1, 3), delta0 = (0.5, 0.5),
/// D1 = (0.3, 0.3), mu = 0.5, A = [[1, .5], [.5, 1]], P = diag(.9, .7), C = 2.
GenerationParams default_generation_params(const ScaledPrecision& v_phi);

struct Dataset {
  MatrixXd X1;  // n×p covariates
  MatrixXd X;   // n×(p+1) design [1, X1]
  MatrixXd Y;   // n×k outcomes
  MatrixXd Z;   // n×k confounders; kept for oracle evaluation only, never an analysis input
};

/// Design matrix [1_n, X1].
MatrixXd design_matrix(const MatrixXd& X1);

/// Draws datasets from fixed parameters. The Cholesky factor of V_φ is
/// computed once at construction.
class DatasetGenerator {
 public:
  explicit DatasetGenerator(GenerationParams params);

  const GenerationParams& params() const { return params_; }

  Dataset generate(Rng& rng) const;
  /// Draws (Z, Y) with the covariates held at `X1`.
  Dataset generate_given_covariates(const MatrixXd& X1, Rng& rng) const;
  MatrixXd generate_covariates(Rng& rng) const;

 private:
  GenerationParams params_;
  MatrixXd cov_factor_;  // lower L with L Lᵀ = V_φ
};

/// Bit-reproducible for a fixed seed.
Dataset generate_dataset(const GenerationParams& params, std::uint64_t seed);

/// Dense Gaussian N(mean, cov).
struct GaussianSpec {
  VectorXd mean;
  MatrixXd cov;

  Index dim() const { return mean.size(); }
};

/// Distribution of vec(Y) given X with Z marginalised:
///   mean vec(X(B + D)),  cov AᵀPA ⊗ V_φ + Aᵀ(I - P)A ⊗ I_n.
GaussianSpec marginal_generation_density(const GenerationParams& params, const MatrixXd& X);

/// F = B + D, the covariate association with the confounder absorbed.
MatrixXd unconditional_estimand(const GenerationParams& params);

}  // namespace mbym2
