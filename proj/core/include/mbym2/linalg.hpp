#pragma once

#include <Eigen/Dense>

namespace mbym2 {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Kronecker product a ⊗ b.
MatrixXd kron(const MatrixXd& a, const MatrixXd& b);

/// Column-stacking vec(m).
VectorXd vec(const MatrixXd& m);

/// Inverse of vec for a rows×cols matrix.
MatrixXd unvec(const VectorXd& v, Index rows, Index cols);

/// ||a - b||_F / max(||b||_F, tiny).
double relative_frobenius(const MatrixXd& a, const MatrixXd& b);

bool is_symmetric(const MatrixXd& m, double tol);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const MatrixXd& symmetric);

/// Throws NumericalError unless `m` is symmetric positive definite. `what`
/// names the matrix in the message.
void require_positive_definite(const MatrixXd& m, const char* what);

/// Throws InvalidArgument if X (n×m) has fewer than m independent columns
/// or n <= m.
void require_full_column_rank(const MatrixXd& X, const char* what);

/// Inverse of a symmetric positive definite matrix via Cholesky.
MatrixXd spd_inverse(const MatrixXd& m);

/// log|m| for symmetric positive definite m.
double spd_log_determinant(const MatrixXd& m);

/// Upper-triangular factor u with uᵀu = m (m symmetric positive definite).
MatrixXd upper_cholesky(const MatrixXd& m);

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Halley step against erfc (absolute error well below 1e-8).
double normal_quantile(double p);

}  // namespace mbym2
