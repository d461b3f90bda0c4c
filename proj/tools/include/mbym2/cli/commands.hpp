#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mbym2/cli/config.hpp"
#include "mbym2/evaluation.hpp"
#include "mbym2/study.hpp"

namespace mbym2::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalError = 2, kIoError = 3 };

/// Numbers in every report are written with 6 significant digits.
std::string format_number(double x);

// ---- simulate ----

/// Runs the replicated study and, when config.out is set, writes
///   report.csv, report.json  one row per (model, coefficient): mse, coverage, avg posterior variance
///   kl.csv                   posterior-mean KL per replicate and model
///   replicates.csv           per replicate seeds, timings and failures
///   manifest.json            effective config, master and replicate seeds, version, timings
StudyResult cmd_simulate(const RunConfig& config, unsigned jobs, std::ostream& log);

// ---- analyze ----

struct CoefficientRow {
  std::string model;
  std::string outcome;
  std::string term;
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool significant = false;  // interval excludes zero
};

struct AutocorrelationRow {
  std::string outcome;
  PermutationResult moran;
  PermutationResult geary;
};

struct DiagnosticRow {
  std::string model;
  std::string parameter;
  double rhat = 0.0;
  double ess = 0.0;
};

struct ModelSummary {
  std::string model;
  DicResult dic;
  double accept_M = 0.0;  // NaN for the non-spatial model
  double accept_R = 0.0;
  std::vector<std::uint64_t> chain_seeds;
};

struct AnalysisResult {
  std::vector<std::string> regions;
  std::vector<std::string> outcomes;  // y1..yk
  std::vector<std::string> terms;     // intercept, x1..xp
  std::vector<AutocorrelationRow> autocorrelation;
  std::vector<CoefficientRow> coefficients;
  std::vector<DiagnosticRow> diagnostics;
  std::vector<ModelSummary> models;
};

/// Mean 0, sd 1 columns (sd with n - 1). A constant column makes the design
/// rank deficient and throws InvalidArgument naming it.
MatrixXd standardize_columns(const MatrixXd& m, const std::string& prefix);

/// Reads config.data and the adjacency, standardizes (unless disabled), runs
/// Moran/Geary tests on OLS residuals, fits the non-spatial and unconditioned
/// CAR (and optionally SAR) models and writes coefficients.csv,
/// autocorrelation.csv, diagnostics.csv, models.csv, manifest.json and, when
/// requested, draws_<model>.csv into config.out.
AnalysisResult cmd_analyze(const RunConfig& config, unsigned jobs, std::ostream& log);

// ---- scale-precision ----

struct ScaleReport {
  PrecisionKind kind = PrecisionKind::car;
  double alpha = 0.0;
  Index n = 0;
  Index edges = 0;
  double c = 0.0;                 // convention used by the library (covariance diagonal)
  double c_precision_diagonal = 0.0;
  double min_eigenvalue = 0.0;    // of the scaled precision
  double max_eigenvalue = 0.0;
  double marginal_variance_geometric_mean = 0.0;  // of the scaled covariance diagonal, 1 by construction
};

ScaleReport cmd_scale_precision(const AdjacencyGraph& graph, PrecisionKind kind, double alpha);
void print_scale_report(const ScaleReport& report, std::ostream& out);

/// Whole command line: parses arguments, maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mbym2::cli
