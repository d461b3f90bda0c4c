#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mbym2/datagen.hpp"
#include "mbym2/spatial_structure.hpp"
#include "mbym2/study.hpp"

namespace mbym2::cli {

inline constexpr const char* kVersion = "mbym2 0.1.0";

enum class Mode { simulate, analyze, scale_precision };
std::string_view to_string(Mode mode);

/// Generation block of a simulate config. Unset fields keep the simulation
/// defaults of default_generation_params.
struct GenerationBlock {
  PrecisionKind kind = PrecisionKind::car;
  double alpha = 0.99;
  std::optional<VectorXd> beta0, delta0, mu, rho;
  std::optional<MatrixXd> B1, D1, A, C;
};

/// Sampler settings shared by both modes. Defaults depend on the mode.
struct SpatialBlock {
  double v = 2.0;
  double lambda_R = 0.01;
  double alpha = 0.99;      // CAR α of the analysis structure (analyze mode)
  double sar_alpha = 0.99;  // SAR α of the SAR analysis models
  double s1 = 0.10, s2 = 0.15, s3 = 0.25;
  Index burn_in = 20000;
  Index samples = 20000;  // saved draws per chain
  Index thin = 1;
  Index chains = 1;
  bool save_draws = false;  // analyze: write per-draw CSV
  bool store_G = false;     // analyze: include G in the draw CSV
};

struct EvaluationBlock {
  Index replicates = 300;
  double level = 0.95;
  std::vector<ModelKind> models = all_model_kinds();
  Index nonspatial_draws = 10000;
  Index conditioned_draws = 20000;
  bool compute_kl = true;
  double max_failure_fraction = 0.05;
};

struct AnalysisBlock {
  bool standardize = true;
  Index permutations = 9999;
  bool unconditioned_sar = false;  // also fit the SAR model
};

struct RunConfig {
  Mode mode = Mode::simulate;
  std::uint64_t seed = 1;
  std::optional<unsigned> jobs;
  std::optional<std::filesystem::path> adjacency;  // bundled California graph when unset
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> out;
  GenerationBlock generation;
  SpatialBlock spatial;
  EvaluationBlock evaluation;
  AnalysisBlock analysis;

  /// Throws InvalidArgument on out-of-range values or missing paths.
  void validate() const;
};

/// Defaults for a mode: simulation study settings for simulate,
/// real-data settings (v = 3, s = .05/.05/.45, 4 chains × 10,000, thin 5) for analyze.
RunConfig default_config(Mode mode);

/// Overlays a JSON document on default_config(mode). Unknown keys, wrong
/// types and a "mode" field naming another mode throw InvalidArgument.
RunConfig parse_config(const std::string& json_text, Mode mode);
RunConfig load_config(const std::filesystem::path& path, Mode mode);

/// The effective configuration as JSON, for manifests.
std::string config_to_json(const RunConfig& config, int indent = 2);

/// Graph named by the config, or the bundled California graph.
AdjacencyGraph config_graph(const RunConfig& config);
GenerationParams generation_params(const RunConfig& config, const AdjacencyGraph& graph);
StudyConfig study_config(const RunConfig& config, const AdjacencyGraph& graph);

/// Parallelism when --jobs is absent: MBYM2_JOBS, else 1.
unsigned default_jobs();

}  // namespace mbym2::cli
