#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "mbym2/cli/commands.hpp"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"
#include "mbym2/mcmc.hpp"
#include "output.hpp"

namespace mbym2::cli {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

bool is_mcmc(ModelKind kind) { return kind == ModelKind::unconditioned_car || kind == ModelKind::unconditioned_sar; }

void write_report_csv(const std::filesystem::path& path, const StudyResult& r) {
  std::ofstream out = open_output(path);
  out << "model,term,outcome,truth,mse,coverage,avg_posterior_variance,replicates\n";
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    const auto& rep = r.reports[m];
    for (Index i = 0; i < r.F.rows(); ++i) {
      for (Index j = 0; j < r.F.cols(); ++j) {
        out << to_string(r.models[m]) << ',' << term_name(i) << ',' << outcome_name(j) << ','
            << format_number(r.F(i, j)) << ',' << format_number(rep.mse(i, j)) << ','
            << format_number(rep.coverage(i, j)) << ',' << format_number(rep.avg_posterior_variance(i, j)) << ','
            << rep.replicate_count << '\n';
      }
    }
  }
  finish_output(out, path);
}

ordered_json matrix_json(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(rounded(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

void write_report_json(const std::filesystem::path& path, const StudyResult& r) {
  ordered_json doc;
  doc["rows"] = "terms (intercept, x1..xp)";
  doc["columns"] = "outcomes (y1..yk)";
  doc["F"] = matrix_json(r.F);
  doc["replicates"] = r.replicates.size();
  doc["failed"] = r.failed;
  ordered_json models = ordered_json::object();
  for (std::size_t m = 0; m < r.models.size(); ++m) {
    const auto& rep = r.reports[m];
    models[std::string(to_string(r.models[m]))] = {{"mse", matrix_json(rep.mse)},
                                                   {"coverage", matrix_json(rep.coverage)},
                                                   {"avg_posterior_variance", matrix_json(rep.avg_posterior_variance)},
                                                   {"replicate_count", rep.replicate_count}};
  }
  doc["models"] = models;
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
  finish_output(out, path);
}

void write_kl_csv(const std::filesystem::path& path, const StudyResult& r) {
  std::ofstream out = open_output(path);
  out << "replicate";
  for (auto m : r.models) out << ',' << to_string(m);
  out << '\n';
  for (const auto& rep : r.replicates) {
    out << rep.index;
    for (std::size_t m = 0; m < r.models.size(); ++m) {
      out << ',';
      if (!rep.error) out << format_number(rep.fits[m].kl);
    }
    out << '\n';
  }
  finish_output(out, path);
}

void write_replicates_csv(const std::filesystem::path& path, const StudyResult& r) {
  std::ofstream out = open_output(path);
  out << "replicate,seed,dataset_seed,status,error\n";
  for (const auto& rep : r.replicates) {
    out << rep.index << ',' << rep.seed << ',' << dataset_seed(rep.seed) << ',' << (rep.error ? "failed" : "ok") << ','
        << (rep.error ? csv_quote(*rep.error) : "") << '\n';
  }
  finish_output(out, path);
}

void write_manifest(const std::filesystem::path& path, const RunConfig& config, const StudyResult& r, unsigned jobs) {
  ordered_json doc;
  doc["version"] = kVersion;
  doc["command"] = "simulate";
  doc["master_seed"] = config.seed;
  doc["jobs"] = jobs;
  doc["config"] = json::parse(config_to_json(config));
  doc["seed_derivation"] =
      "replicate i: derive_seed(master, i); dataset: derive_seed(replicate, \"dataset\"); model: "
      "derive_seed(replicate, model name); chain c: derive_seed(model, c)";
  ordered_json reps = ordered_json::array();
  for (const auto& rep : r.replicates) {
    ordered_json e;
    e["index"] = rep.index;
    e["seed"] = rep.seed;
    e["dataset_seed"] = dataset_seed(rep.seed);
    ordered_json models = ordered_json::object();
    for (std::size_t m = 0; m < r.models.size(); ++m) {
      const auto kind = r.models[m];
      ordered_json me;
      me["seed"] = model_seed(rep.seed, kind);
      if (is_mcmc(kind)) {
        std::vector<std::uint64_t> chains;
        for (Index c = 0; c < config.spatial.chains; ++c) {
          chains.push_back(derive_seed(model_seed(rep.seed, kind), static_cast<std::uint64_t>(c)));
        }
        me["chain_seeds"] = chains;
        if (!rep.error) {
          me["accept_M"] = rounded(rep.fits[m].accept_M);
          me["accept_R"] = rounded(rep.fits[m].accept_R);
        }
      }
      models[std::string(to_string(kind))] = me;
    }
    e["models"] = models;
    e["seconds"] = rep.seconds;
    if (rep.error) e["error"] = *rep.error;
    reps.push_back(e);
  }
  doc["replicates"] = reps;
  doc["failed"] = r.failed;
  doc["wall_seconds"] = r.seconds;
  std::ofstream out = open_output(path);
  out << doc.dump(2) << '\n';
  finish_output(out, path);
}

}  // namespace

StudyResult cmd_simulate(const RunConfig& config, unsigned jobs, std::ostream& log) {
  config.validate();
  const AdjacencyGraph graph = config_graph(config);
  const StudyConfig sc = study_config(config, graph);
  if (config.out) ensure_directory(*config.out);

  log << "simulate: " << sc.replicates << " replicates, " << sc.models.size() << " models, n = " << graph.n
      << ", jobs = " << jobs << '\n';
  const Index step = std::max<Index>(1, sc.replicates / 20);
  const StudyResult result = run_study(sc, jobs, [&](Index done, Index total) {
    if (done % step == 0 || done == total) log << "  " << done << '/' << total << " replicates\n" << std::flush;
  });
  if (result.failed > 0) log << "  " << result.failed << " replicates failed (see replicates.csv)\n";

  if (config.out) {
    const auto& dir = *config.out;
    write_report_csv(dir / "report.csv", result);
    write_report_json(dir / "report.json", result);
    if (sc.compute_kl) write_kl_csv(dir / "kl.csv", result);
    write_replicates_csv(dir / "replicates.csv", result);
    write_manifest(dir / "manifest.json", config, result, jobs);
    log << "wrote " << dir.string() << '\n';
  }
  return result;
}

}  // namespace mbym2::cli
