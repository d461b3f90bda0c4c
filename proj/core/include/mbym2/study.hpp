#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mbym2/datagen.hpp"
#include "mbym2/evaluation.hpp"
#include "mbym2/spatial_structure.hpp"

namespace mbym2 {

enum class ModelKind { nonspatial, conditioned_car, conditioned_sar, unconditioned_car, unconditioned_sar };

std::string_view to_string(ModelKind kind);
/// Accepts the names produced by to_string; throws InvalidArgument otherwise.
ModelKind model_kind_from_string(std::string_view name);
const std::vector<ModelKind>& all_model_kinds();

/// Replicated simulation: each replicate draws (X1, Z, Y) from `params`, fits
/// every requested model and records point estimate, interval and posterior
/// variance for every coefficient, plus the posterior-mean KL divergence of
/// the fitted predictive density from the generation density.
///
///   nonspatial       exact conjugate posterior; mean B̂, HPD from exact draws
///   conditioned-*    (M, R) = (A, P); B̃ ± z·sd, KL from exact draws of B_S
///   unconditioned-*  Metropolis-within-Gibbs; posterior mean, HPD, draw variance
///
/// CAR analysis models use the generation structure V_φ; SAR models use the
/// scaled SAR precision of the same graph.
struct StudyConfig {
  GenerationParams params;
  AdjacencyGraph graph;
  double sar_alpha = 0.99;
  std::vector<ModelKind> models = all_model_kinds();
  Index replicates = 300;
  double level = 0.95;
  std::uint64_t seed = 1;

  double v = 2.0;
  double lambda_R = 0.01;
  double s1 = 0.10, s2 = 0.15, s3 = 0.25;
  Index burn_in = 20000;
  Index samples = 20000;  // saved MCMC draws per chain
  Index thin = 1;
  Index chains = 1;
  Index nonspatial_draws = 10000;
  Index conditioned_draws = 20000;
  bool compute_kl = true;
  /// Minimum replicate count accepted by frequentist_eval.
  Index min_replicates = 1;
  /// A run with more than this fraction of failed replicates throws.
  double max_failure_fraction = 0.05;

  void validate() const;
};

struct ModelFit {
  ReplicateRecord record;
  double kl = std::numeric_limits<double>::quiet_NaN();  // posterior mean KL; NaN if not computed
  double accept_M = std::numeric_limits<double>::quiet_NaN();
  double accept_R = std::numeric_limits<double>::quiet_NaN();
};

struct ReplicateResult {
  Index index = 0;
  std::uint64_t seed = 0;
  std::vector<ModelFit> fits;  // aligned with StudyConfig::models; empty when failed
  std::optional<std::string> error;
  double seconds = 0.0;
};

struct StudyResult {
  MatrixXd F;
  std::vector<ModelKind> models;
  std::vector<ReplicateResult> replicates;
  std::vector<EvalReport> reports;  // aligned with models, successful replicates only
  Index failed = 0;
  double seconds = 0.0;
};

/// Seed of replicate i; the dataset and each model fit derive their own streams from it.
std::uint64_t replicate_seed(std::uint64_t master, Index replicate);
std::uint64_t dataset_seed(std::uint64_t replicate_seed);
std::uint64_t model_seed(std::uint64_t replicate_seed, ModelKind kind);

/// Dataset of replicate i, identical to the one run_study fits.
Dataset study_dataset(const StudyConfig& config, Index replicate);

using StudyProgress = std::function<void(Index completed, Index total)>;

/// Results do not depend on `jobs`. Throws NumericalError when the failed
/// fraction exceeds config.max_failure_fraction.
StudyResult run_study(const StudyConfig& config, unsigned jobs = 1, const StudyProgress& progress = {});

}  // namespace mbym2
