#include <cmath>
#include <ostream>

#include "mbym2/cli/commands.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2::cli {

ScaleReport cmd_scale_precision(const AdjacencyGraph& graph, PrecisionKind kind, double alpha) {
  const MatrixXd unscaled = kind == PrecisionKind::car ? car_precision(graph, alpha) : sar_precision(graph, alpha);
  const ScaledPrecision scaled = scale_precision(unscaled, kind, alpha);
  const ScalingConventions conv = scaling_conventions(unscaled);
  const SpectralBasis spectral = spectral_decompose(scaled);

  ScaleReport r;
  r.kind = kind;
  r.alpha = alpha;
  r.n = graph.n;
  r.edges = static_cast<Index>(graph.edges.size());
  r.c = scaled.c;
  r.c_precision_diagonal = conv.from_precision_diagonal;
  r.min_eigenvalue = spectral.lambda.minCoeff();
  r.max_eigenvalue = spectral.lambda.maxCoeff();
  r.marginal_variance_geometric_mean = std::exp(scaled.covariance_diag.array().log().mean());
  return r;
}

void print_scale_report(const ScaleReport& r, std::ostream& out) {
  out << "kind                      " << to_string(r.kind) << '\n'
      << "alpha                     " << format_number(r.alpha) << '\n'
      << "regions                   " << r.n << '\n'
      << "edges                     " << r.edges << '\n'
      << "c                         " << format_number(r.c) << "  (geometric mean of the unscaled marginal variances)\n"
      << "c, precision diagonal     " << format_number(r.c_precision_diagonal)
      << "  (1 / geometric mean of the unscaled precision diagonal)\n"
      << "scaled precision min eig  " << format_number(r.min_eigenvalue) << '\n'
      << "scaled precision max eig  " << format_number(r.max_eigenvalue) << '\n'
      << "scaled marginal variance geometric mean  " << format_number(r.marginal_variance_geometric_mean) << '\n';
}

}  // namespace mbym2::cli
