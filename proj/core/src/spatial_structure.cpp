#include "mbym2/spatial_structure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"

namespace mbym2 {

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidArgument("spatial smoothing alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

bool connected(Index n, const std::vector<Edge>& edges) {
  std::vector<Index> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  Index components = n;
  for (auto [i, j] : edges) {
    const Index a = find(i), b = find(j);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

double geometric_mean(const VectorXd& v) { return std::exp(v.array().log().mean()); }

}  // namespace

AdjacencyGraph build_adjacency(std::span<const Edge> edges, Index n) {
  if (n < 2) throw InvalidArgument("adjacency graph needs at least two regions");
  std::vector<Edge> canonical;
  canonical.reserve(edges.size());
  for (auto [i, j] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw InvalidArgument("region id out of range in edge (" + std::to_string(i) + ", " + std::to_string(j) +
                            "); valid ids are 0.." + std::to_string(n - 1));
    }
    if (i == j) throw InvalidArgument("self-loop on region " + std::to_string(i));
    canonical.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(canonical.begin(), canonical.end());
  canonical.erase(std::unique(canonical.begin(), canonical.end()), canonical.end());

  AdjacencyGraph g;
  g.n = n;
  g.W = MatrixXd::Zero(n, n);
  for (auto [i, j] : canonical) g.W(i, j) = g.W(j, i) = 1.0;
  g.neighbor_counts = g.W.rowwise().sum();
  for (Index i = 0; i < n; ++i) {
    if (g.neighbor_counts(i) < 1.0) throw InvalidArgument("region " + std::to_string(i) + " has no neighbours");
  }
  if (!connected(n, canonical)) throw InvalidArgument("adjacency graph is not connected");
  g.edges = std::move(canonical);
  return g;
}

std::string_view to_string(PrecisionKind kind) { return kind == PrecisionKind::car ? "car" : "sar"; }

PrecisionKind precision_kind_from_string(std::string_view name) {
  if (name == "car" || name == "CAR") return PrecisionKind::car;
  if (name == "sar" || name == "SAR") return PrecisionKind::sar;
  throw InvalidArgument("unknown precision kind '" + std::string(name) + "' (expected car or sar)");
}

MatrixXd car_precision(const AdjacencyGraph& graph, double alpha) {
  check_alpha(alpha);
  return graph.degree_matrix() - alpha * graph.W;
}

MatrixXd sar_precision(const AdjacencyGraph& graph, double alpha) {
  check_alpha(alpha);
  const MatrixXd w_tilde = graph.neighbor_counts.cwiseInverse().asDiagonal() * graph.W;
  const MatrixXd a = MatrixXd::Identity(graph.n, graph.n) - alpha * w_tilde;
  return a.transpose() * a;
}

ScalingConventions scaling_conventions(const MatrixXd& unscaled) {
  require_positive_definite(unscaled, "unscaled precision");
  return {geometric_mean(spd_inverse(unscaled).diagonal()), 1.0 / geometric_mean(unscaled.diagonal())};
}

ScaledPrecision scale_precision(const MatrixXd& unscaled, PrecisionKind kind, double alpha) {
  if (!is_symmetric(unscaled, 1e-12)) throw InvalidArgument("precision matrix is not symmetric");
  require_positive_definite(unscaled, "precision matrix");
  const MatrixXd unscaled_cov = spd_inverse(unscaled);
  ScaledPrecision out;
  out.kind = kind;
  out.alpha = alpha;
  out.c = geometric_mean(unscaled_cov.diagonal());
  out.precision = out.c * unscaled;
  out.covariance = unscaled_cov / out.c;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.covariance_diag = out.covariance.diagonal();
  return out;
}

ScaledPrecision make_scaled_precision(const AdjacencyGraph& graph, PrecisionKind kind, double alpha) {
  const MatrixXd unscaled = kind == PrecisionKind::car ? car_precision(graph, alpha) : sar_precision(graph, alpha);
  return scale_precision(unscaled, kind, alpha);
}

SpectralBasis spectral_decompose(const ScaledPrecision& precision) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(precision.precision);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of the precision matrix failed");
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericalError("precision matrix has a non-positive eigenvalue " +
                         std::to_string(es.eigenvalues().minCoeff()));
  }
  SpectralBasis basis;
  basis.Q = es.eigenvectors();
  basis.lambda = es.eigenvalues();
  basis.sqrt_precision = basis.Q * basis.lambda.cwiseSqrt().asDiagonal() * basis.Q.transpose();
  basis.sqrt_covariance = basis.Q * basis.lambda.cwiseSqrt().cwiseInverse().asDiagonal() * basis.Q.transpose();
  return basis;
}

ProjectedSpectral projected_spectral(const SpectralBasis& basis, const MatrixXd& X) {
  const Index n = basis.Q.rows();
  if (X.rows() != n) {
    throw InvalidArgument("design matrix has " + std::to_string(X.rows()) + " rows, expected " + std::to_string(n));
  }
  require_full_column_rank(X, "design matrix");

  ProjectedSpectral out;
  const MatrixXd xtx = X.transpose() * X;
  out.H = X * xtx.llt().solve(X.transpose());
  out.H = 0.5 * (out.H + out.H.transpose());

  const MatrixXd residual_projector = MatrixXd::Identity(n, n) - out.H;
  MatrixXd s = basis.sqrt_covariance * residual_projector * basis.sqrt_covariance;
  s = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition of W^{1/2}(I-H)W^{1/2} failed");

  const MatrixXd& q_star = es.eigenvectors();
  out.k = es.eigenvalues();
  const double threshold = kZeroEigenvalueTolerance * out.k.cwiseAbs().maxCoeff();
  out.k_star = VectorXd::Zero(n);
  for (Index i = 0; i < n; ++i) {
    if (out.k(i) > threshold) {
      out.k_star(i) = 1.0;
    } else {
      out.k(i) = 0.0;
      ++out.zero_count;
    }
  }
  if (out.zero_count != X.cols()) {
    throw NumericalError("projected spectrum has " + std::to_string(out.zero_count) +
                         " zero eigenvalues, expected rank(X) = " + std::to_string(X.cols()));
  }
  out.U = basis.sqrt_covariance * q_star;
  out.U_inv = q_star.transpose() * basis.sqrt_precision;
  return out;
}

ProjectedSpectral projected_spectral(const ScaledPrecision& precision, const MatrixXd& X) {
  return projected_spectral(spectral_decompose(precision), X);
}

}  // namespace mbym2
