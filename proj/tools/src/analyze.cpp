#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"
#include "mbym2/cli/commands.hpp"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/mcmc.hpp"
#include "mbym2/nonspatial.hpp"
#include "output.hpp"

namespace mbym2::cli {
namespace {

using nlohmann::ordered_json;

struct FittedModel {
  ModelKind kind;
  std::vector<std::vector<MatrixXd>> B;  // per chain
  std::vector<ChainOutput> chains;       // empty for the non-spatial model
  std::vector<LikelihoodDraw> likelihood;
  MatrixXd point;                        // posterior mean (B̂ for the non-spatial model)
  std::uint64_t seed = 0;
};

std::vector<double> trace(const std::vector<MatrixXd>& draws, Index i, Index j) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d(i, j));
  return out;
}

FittedModel fit_flat(const MatrixXd& Y, const MatrixXd& X, const RunConfig& config, std::uint64_t seed) {
  FittedModel f{ModelKind::nonspatial, {}, {}, {}, {}, seed};
  const auto post = fit_nonspatial(Y, X, config.spatial.v, default_sigma0(Y, X));
  Rng rng = make_rng(seed);
  const auto draws = sample_nonspatial(post, config.evaluation.nonspatial_draws, rng);
  f.B.push_back(draws.B);
  for (std::size_t s = 0; s < draws.B.size(); ++s) {
    f.likelihood.push_back({draws.B[s], draws.Sigma[s], MatrixXd::Zero(Y.cols(), Y.cols())});
  }
  f.point = post.B_hat;
  return f;
}

FittedModel fit_spatial(ModelKind kind, const ScaledPrecision& precision, const MatrixXd& Y, const MatrixXd& X,
                        const RunConfig& config, std::uint64_t seed, unsigned jobs) {
  const auto& s = config.spatial;
  SpatialConfig sc;
  sc.precision = precision;
  sc.v = s.v;
  sc.Sigma0 = default_sigma0(Y, X);
  sc.lambda_R = s.lambda_R;
  sc.s1 = s.s1;
  sc.s2 = s.s2;
  sc.s3 = s.s3;
  sc.burn_in = s.burn_in;
  sc.thin = s.thin;
  sc.iterations = s.burn_in + s.samples * s.thin;
  sc.chain_count = s.chains;
  sc.seed = seed;
  sc.store_G = s.save_draws && s.store_G;

  FittedModel f{kind, {}, run_chains(sc, Y, X, jobs), {}, MatrixXd::Zero(X.cols(), Y.cols()), seed};
  std::size_t total = 0;
  for (const auto& c : f.chains) {
    std::vector<MatrixXd> b;
    for (const auto& d : c.draws) {
      b.push_back(d.B);
      f.point += d.B;
      f.likelihood.push_back(spatial_likelihood_draw(d.B, d.M, d.r));
    }
    total += b.size();
    f.B.push_back(std::move(b));
  }
  f.point /= static_cast<double>(total);
  return f;
}

void write_draws(const std::filesystem::path& path, const FittedModel& f) {
  std::ofstream out = open_output(path);
  const auto& first = f.chains.front().draws.front();
  const Index rows = first.B.rows(), k = first.B.cols(), n = first.G.rows();
  out << "chain,draw";
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < rows; ++i) out << ",B_" << term_name(i) << '_' << outcome_name(j);
  for (Index i = 0; i < k; ++i)
    for (Index j = i; j < k; ++j) out << ",M_" << i + 1 << j + 1;
  for (Index j = 0; j < k; ++j) out << ",r_" << j + 1;
  for (Index j = 0; j < k && first.G.size() > 0; ++j)
    for (Index i = 0; i < n; ++i) out << ",G_" << i + 1 << '_' << j + 1;
  out << '\n';
  out.precision(17);
  for (std::size_t c = 0; c < f.chains.size(); ++c) {
    const auto& draws = f.chains[c].draws;
    for (std::size_t t = 0; t < draws.size(); ++t) {
      const auto& d = draws[t];
      out << c << ',' << t;
      for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < rows; ++i) out << ',' << d.B(i, j);
      for (Index i = 0; i < k; ++i)
        for (Index j = i; j < k; ++j) out << ',' << d.M(i, j);
      for (Index j = 0; j < k; ++j) out << ',' << d.r(j);
      for (Index j = 0; j < d.G.cols(); ++j)
        for (Index i = 0; i < d.G.rows(); ++i) out << ',' << d.G(i, j);
      out << '\n';
    }
  }
  finish_output(out, path);
}

}  // namespace

MatrixXd standardize_columns(const MatrixXd& m, const std::string& prefix) {
  if (m.rows() < 2) throw InvalidArgument("standardizing needs at least two rows");
  MatrixXd out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) {
    const VectorXd c = m.col(j).array() - m.col(j).mean();
    const double sd = std::sqrt(c.squaredNorm() / static_cast<double>(m.rows() - 1));
    if (!(sd > 1e-12 * std::max(1.0, m.col(j).cwiseAbs().maxCoeff()))) {
      throw InvalidArgument("column " + prefix + std::to_string(j + 1) +
                            " is constant; the design matrix would not have full column rank");
    }
    out.col(j) = c / sd;
  }
  return out;
}

AnalysisResult cmd_analyze(const RunConfig& config, unsigned jobs, std::ostream& log) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const CsvDataset csv = read_dataset_csv(*config.data);
  const AdjacencyGraph graph = read_adjacency(*config.adjacency);
  const auto n = static_cast<Index>(csv.regions.size());
  if (graph.n != n) {
    throw InvalidArgument("adjacency has " + std::to_string(graph.n) + " regions but the data has " +
                          std::to_string(n) + " rows");
  }
  const MatrixXd X1 = config.analysis.standardize ? standardize_columns(csv.X1, "x") : csv.X1;
  const MatrixXd Y = config.analysis.standardize ? standardize_columns(csv.Y, "y") : csv.Y;
  const MatrixXd X = design_matrix(X1);
  require_full_column_rank(X, "design matrix [1, X1]");
  const Index k = Y.cols();

  AnalysisResult result;
  result.regions = csv.regions;
  for (Index j = 0; j < k; ++j) result.outcomes.push_back(outcome_name(j));
  for (Index i = 0; i < X.cols(); ++i) result.terms.push_back(term_name(i));
  log << "analyze: n = " << n << ", k = " << k << ", p = " << X1.cols() << ", jobs = " << jobs << '\n';

  // residual spatial autocorrelation of OLS fits
  const MatrixXd residuals = Y - X * X.householderQr().solve(Y);
  for (Index j = 0; j < k; ++j) {
    Rng rng = make_rng(derive_seed(config.seed, "autocorrelation:" + outcome_name(j)));
    AutocorrelationRow row{outcome_name(j), moran_test(residuals.col(j), graph, config.analysis.permutations, rng),
                           geary_test(residuals.col(j), graph, config.analysis.permutations, rng)};
    result.autocorrelation.push_back(row);
  }

  const ScaledPrecision car = make_scaled_precision(graph, PrecisionKind::car, config.spatial.alpha);
  const SpectralBasis car_basis = spectral_decompose(car);
  std::vector<FittedModel> fits;
  fits.push_back(fit_flat(Y, X, config, model_seed(config.seed, ModelKind::nonspatial)));
  log << "  fitting unconditioned-car: " << config.spatial.chains << " chains\n" << std::flush;
  fits.push_back(fit_spatial(ModelKind::unconditioned_car, car, Y, X, config,
                             model_seed(config.seed, ModelKind::unconditioned_car), jobs));
  std::optional<SpectralBasis> sar_basis;
  if (config.analysis.unconditioned_sar) {
    const ScaledPrecision sar = make_scaled_precision(graph, PrecisionKind::sar, config.spatial.sar_alpha);
    sar_basis = spectral_decompose(sar);
    log << "  fitting unconditioned-sar: " << config.spatial.chains << " chains\n" << std::flush;
    fits.push_back(fit_spatial(ModelKind::unconditioned_sar, sar, Y, X, config,
                               model_seed(config.seed, ModelKind::unconditioned_sar), jobs));
  }

  const double level = config.evaluation.level;
  for (const auto& f : fits) {
    const std::string name(to_string(f.kind));
    std::vector<MatrixXd> pooled;
    for (const auto& c : f.B) pooled.insert(pooled.end(), c.begin(), c.end());
    for (Index j = 0; j < k; ++j) {
      for (Index i = 0; i < X.cols(); ++i) {
        const auto [lo, hi] = hpd_interval(trace(pooled, i, j), level);
        result.coefficients.push_back({name, outcome_name(j), term_name(i), f.point(i, j), lo, hi, lo > 0.0 || hi < 0.0});
      }
    }

    ModelSummary summary;
    summary.model = name;
    summary.dic = dic(f.likelihood, Y, X, f.kind == ModelKind::unconditioned_sar ? *sar_basis : car_basis);
    summary.accept_M = summary.accept_R = std::numeric_limits<double>::quiet_NaN();
    if (!f.chains.empty()) {
      summary.accept_M = summary.accept_R = 0.0;
      for (const auto& c : f.chains) {
        summary.accept_M += c.accept_M / static_cast<double>(f.chains.size());
        summary.accept_R += c.accept_R / static_cast<double>(f.chains.size());
        summary.chain_seeds.push_back(c.seed);
      }
      auto diagnose = [&](const std::string& parameter, auto&& value) {
        std::vector<std::vector<double>> chains;
        for (const auto& c : f.chains) {
          std::vector<double> t;
          for (const auto& d : c.draws) t.push_back(value(d));
          chains.push_back(std::move(t));
        }
        const Convergence cv = rhat_ess(chains);
        result.diagnostics.push_back({name, parameter, cv.rhat, cv.ess});
      };
      for (Index j = 0; j < k; ++j)
        for (Index i = 0; i < X.cols(); ++i)
          diagnose("B[" + term_name(i) + "," + outcome_name(j) + "]", [=](const ChainState& d) { return d.B(i, j); });
      for (Index i = 0; i < k; ++i)
        for (Index j = i; j < k; ++j)
          diagnose("M[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]",
                   [=](const ChainState& d) { return d.M(i, j); });
      for (Index j = 0; j < k; ++j)
        diagnose("r[" + std::to_string(j + 1) + "]", [=](const ChainState& d) { return d.r(j); });
    }
    result.models.push_back(summary);
  }

  const auto& dir = *config.out;
  ensure_directory(dir);
  {
    std::ofstream out = open_output(dir / "coefficients.csv");
    out << "model,outcome,term,mean,hpd_lower,hpd_upper,significant\n";
    for (const auto& c : result.coefficients) {
      out << c.model << ',' << c.outcome << ',' << c.term << ',' << format_number(c.mean) << ','
          << format_number(c.lower) << ',' << format_number(c.upper) << ',' << (c.significant ? "yes" : "no") << '\n';
    }
    finish_output(out, dir / "coefficients.csv");
  }
  {
    std::ofstream out = open_output(dir / "autocorrelation.csv");
    out << "outcome,morans_i,moran_p,gearys_c,geary_p,permutations\n";
    for (const auto& a : result.autocorrelation) {
      out << a.outcome << ',' << format_number(a.moran.statistic) << ',' << format_number(a.moran.p_value) << ','
          << format_number(a.geary.statistic) << ',' << format_number(a.geary.p_value) << ',' << a.moran.permutations
          << '\n';
    }
    finish_output(out, dir / "autocorrelation.csv");
  }
  {
    std::ofstream out = open_output(dir / "diagnostics.csv");
    out << "model,parameter,rhat,ess\n";
    for (const auto& d : result.diagnostics) {
      out << d.model << ',' << csv_quote(d.parameter) << ',' << format_number(d.rhat) << ',' << format_number(d.ess)
          << '\n';
    }
    finish_output(out, dir / "diagnostics.csv");
  }
  {
    std::ofstream out = open_output(dir / "models.csv");
    out << "model,dic,p_d,accept_M,accept_R\n";
    for (const auto& m : result.models) {
      out << m.model << ',' << format_number(m.dic.dic) << ',' << format_number(m.dic.p_d) << ','
          << format_number(m.accept_M) << ',' << format_number(m.accept_R) << '\n';
    }
    finish_output(out, dir / "models.csv");
  }
  if (config.spatial.save_draws) {
    for (const auto& f : fits) {
      if (!f.chains.empty()) write_draws(dir / ("draws_" + std::string(to_string(f.kind)) + ".csv"), f);
    }
  }

  ordered_json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = "analyze";
  manifest["master_seed"] = config.seed;
  manifest["jobs"] = jobs;
  manifest["config"] = nlohmann::json::parse(config_to_json(config));
  manifest["regions"] = n;
  manifest["seed_derivation"] =
      "model: derive_seed(master, model name); chain c: derive_seed(model, c); permutation tests: "
      "derive_seed(master, \"autocorrelation:\" + outcome)";
  ordered_json models = ordered_json::object();
  for (std::size_t m = 0; m < fits.size(); ++m) {
    ordered_json e;
    e["seed"] = fits[m].seed;
    if (!result.models[m].chain_seeds.empty()) {
      e["chain_seeds"] = result.models[m].chain_seeds;
      e["accept_M"] = rounded(result.models[m].accept_M);
      e["accept_R"] = rounded(result.models[m].accept_R);
      std::vector<double> secs;
      for (const auto& c : fits[m].chains) secs.push_back(c.wall_seconds);
      e["chain_seconds"] = secs;
    }
    models[result.models[m].model] = e;
  }
  manifest["models"] = models;
  manifest["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ofstream out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  finish_output(out, dir / "manifest.json");
  log << "wrote " << dir.string() << '\n';
  return result;
}

}  // namespace mbym2::cli
