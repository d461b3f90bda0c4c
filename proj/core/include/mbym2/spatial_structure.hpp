#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mbym2 {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using Edge = std::pair<Index, Index>;

/// Areal neighbourhood structure of n regions. Built only through
/// build_adjacency, which guarantees: symmetric 0/1 W with zero diagonal,
/// every region has at least one neighbour, single connected component.
struct AdjacencyGraph {
  Index n = 0;
  std::vector<Edge> edges;  // unordered pairs stored as (i < j), sorted
  MatrixXd W;               // adjacency matrix
  VectorXd neighbor_counts; // diagonal of D_W

  MatrixXd degree_matrix() const { return neighbor_counts.asDiagonal(); }
};

/// Validates and symmetrises an edge list. Duplicate and reversed pairs are
/// merged. Throws InvalidArgument on out-of-range ids, self loops, isolated
/// regions (named in the message) or a disconnected graph.
AdjacencyGraph build_adjacency(std::span<const Edge> edges, Index n);

enum class PrecisionKind { car, sar };

std::string_view to_string(PrecisionKind kind);
PrecisionKind precision_kind_from_string(std::string_view name);

/// D_W - alpha W. Requires 0 < alpha < 1.
MatrixXd car_precision(const AdjacencyGraph& graph, double alpha);

/// (I - alpha W̃)ᵀ (I - alpha W̃) with W̃ the row-normalised adjacency.
/// Requires 0 < alpha < 1.
MatrixXd sar_precision(const AdjacencyGraph& graph, double alpha);

/// A CAR/SAR precision W_φ^{-1} scaled so that the marginal variances
/// diag(W_φ) have geometric mean one.
struct ScaledPrecision {
  PrecisionKind kind = PrecisionKind::car;
  double alpha = 0.0;
  double c = 1.0;             // scaling constant applied to the unscaled precision
  MatrixXd precision;         // W_φ^{-1} = c * unscaled
  MatrixXd covariance;        // W_φ
  VectorXd covariance_diag;   // diag(W_φ), geometric mean 1

  Index n() const { return precision.rows(); }
};

/// c = geometric mean of diag(unscaled^{-1}); precision = c * unscaled.
/// Throws NumericalError (with the smallest eigenvalue) for non-PD input.
ScaledPrecision scale_precision(const MatrixXd& unscaled, PrecisionKind kind, double alpha);

/// car_precision / sar_precision followed by scale_precision.
ScaledPrecision make_scaled_precision(const AdjacencyGraph& graph, PrecisionKind kind, double alpha);

/// Geometric mean of diag(m^{-1}) and of diag(m): the two scaling conventions
/// one can read for "geometric mean one". Reported by the scale-precision tool.
struct ScalingConventions {
  double from_covariance_diagonal;  // geometric mean of diag(unscaled^{-1})
  double from_precision_diagonal;   // 1 / geometric mean of diag(unscaled)
};
ScalingConventions scaling_conventions(const MatrixXd& unscaled);

/// W_φ^{-1} = Q diag(lambda) Qᵀ.
struct SpectralBasis {
  MatrixXd Q;
  VectorXd lambda;           // eigenvalues of W_φ^{-1}, ascending, all > 0
  MatrixXd sqrt_precision;   // W_φ^{-1/2}
  MatrixXd sqrt_covariance;  // W_φ^{1/2}
};

SpectralBasis spectral_decompose(const ScaledPrecision& precision);

/// Joint diagonalisation of W_φ^{-1} and I - H:
///   W_φ^{-1} = U^{-T} U^{-1},   I - H = U^{-T} K U^{-1}.
struct ProjectedSpectral {
  MatrixXd H;       // X (XᵀX)^{-1} Xᵀ
  MatrixXd U;       // W_φ^{1/2} Q*
  MatrixXd U_inv;   // Q*ᵀ W_φ^{-1/2}
  VectorXd k;       // eigenvalues of W_φ^{1/2}(I - H)W_φ^{1/2}; numerical zeros set to exactly 0
  VectorXd k_star;  // 1 where k_i > 0, else 0
  Index zero_count = 0;
};

/// Relative threshold below which an eigenvalue k_i counts as zero.
inline constexpr double kZeroEigenvalueTolerance = 1e-9;

/// Throws InvalidArgument when X is rank deficient or has the wrong row count.
ProjectedSpectral projected_spectral(const SpectralBasis& basis, const MatrixXd& X);
ProjectedSpectral projected_spectral(const ScaledPrecision& precision, const MatrixXd& X);

/// Bundled 58-county California adjacency (regions in alphabetical county order).
AdjacencyGraph california_counties();
std::span<const std::string_view> california_county_names();

}  // namespace mbym2
