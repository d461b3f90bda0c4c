#include "mbym2/cli/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"

namespace mbym2::cli {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& known) {
  if (!obj.is_object()) throw InvalidArgument("config: '" + where + "' must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw InvalidArgument("config: unknown key '" + where + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InvalidArgument("config: '" + where + key + "' has the wrong type");
  }
}

VectorXd to_vector(const json& j, const std::string& name) {
  if (!j.is_array()) throw InvalidArgument("config: '" + name + "' must be an array of numbers");
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidArgument("config: '" + name + "' must be an array of numbers");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

MatrixXd to_matrix(const json& j, const std::string& name) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw InvalidArgument("config: '" + name + "' must be an array of rows");
  }
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j[0].size());
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const VectorXd row = to_vector(j[static_cast<std::size_t>(i)], name);
    if (row.size() != cols) throw InvalidArgument("config: rows of '" + name + "' differ in length");
    m.row(i) = row.transpose();
  }
  return m;
}

json from_vector(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json from_matrix(const MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(from_vector(m.row(i).transpose()));
  return rows;
}

void parse_generation(const json& g, GenerationBlock& out) {
  reject_unknown(g, "generation.", {"kind", "alpha", "beta0", "B1", "delta0", "D1", "mu", "A", "C", "rho"});
  if (g.contains("kind")) {
    if (!g["kind"].is_string()) throw InvalidArgument("config: 'generation.kind' must be \"car\" or \"sar\"");
    out.kind = precision_kind_from_string(g["kind"].get<std::string>());
  }
  read(g, "alpha", out.alpha, "generation.");
  for (auto [key, slot] : {std::pair{"beta0", &out.beta0}, {"delta0", &out.delta0}, {"mu", &out.mu}, {"rho", &out.rho}}) {
    if (g.contains(key)) *slot = to_vector(g[key], std::string("generation.") + key);
  }
  for (auto [key, slot] : {std::pair{"B1", &out.B1}, {"D1", &out.D1}, {"A", &out.A}, {"C", &out.C}}) {
    if (g.contains(key)) *slot = to_matrix(g[key], std::string("generation.") + key);
  }
}

void parse_spatial(const json& s, SpatialBlock& out) {
  reject_unknown(s, "spatial.", {"v", "lambda_R", "alpha", "sar_alpha", "s1", "s2", "s3", "burn_in", "samples", "thin",
                                 "chains", "save_draws", "store_G"});
  const std::string w = "spatial.";
  read(s, "v", out.v, w);
  read(s, "lambda_R", out.lambda_R, w);
  read(s, "alpha", out.alpha, w);
  read(s, "sar_alpha", out.sar_alpha, w);
  read(s, "s1", out.s1, w);
  read(s, "s2", out.s2, w);
  read(s, "s3", out.s3, w);
  read(s, "burn_in", out.burn_in, w);
  read(s, "samples", out.samples, w);
  read(s, "thin", out.thin, w);
  read(s, "chains", out.chains, w);
  read(s, "save_draws", out.save_draws, w);
  read(s, "store_G", out.store_G, w);
}

void parse_evaluation(const json& e, EvaluationBlock& out) {
  reject_unknown(e, "evaluation.", {"replicates", "level", "models", "nonspatial_draws", "conditioned_draws",
                                    "compute_kl", "max_failure_fraction"});
  const std::string w = "evaluation.";
  read(e, "replicates", out.replicates, w);
  read(e, "level", out.level, w);
  read(e, "nonspatial_draws", out.nonspatial_draws, w);
  read(e, "conditioned_draws", out.conditioned_draws, w);
  read(e, "compute_kl", out.compute_kl, w);
  read(e, "max_failure_fraction", out.max_failure_fraction, w);
  if (e.contains("models")) {
    std::vector<std::string> names;
    read(e, "models", names, w);
    out.models.clear();
    for (const auto& n : names) out.models.push_back(model_kind_from_string(n));
  }
}

void parse_analysis(const json& a, AnalysisBlock& out) {
  reject_unknown(a, "analysis.", {"standardize", "permutations", "unconditioned_sar"});
  read(a, "standardize", out.standardize, "analysis.");
  read(a, "permutations", out.permutations, "analysis.");
  read(a, "unconditioned_sar", out.unconditioned_sar, "analysis.");
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::simulate:
      return "simulate";
    case Mode::analyze:
      return "analyze";
    case Mode::scale_precision:
      return "scale-precision";
  }
  return "unknown";
}

void RunConfig::validate() const {
  if (jobs && *jobs < 1) throw InvalidArgument("jobs must be at least 1");
  const auto& s = spatial;
  if (!(s.v > 0.0)) throw InvalidArgument("spatial.v must be positive");
  if (!(s.lambda_R > 0.0)) throw InvalidArgument("spatial.lambda_R must be positive");
  if (!(s.alpha > 0.0 && s.alpha < 1.0) || !(s.sar_alpha > 0.0 && s.sar_alpha < 1.0)) {
    throw InvalidArgument("spatial alpha values must lie in (0, 1)");
  }
  if (!(s.s1 > 0.0 && s.s2 > 0.0 && s.s3 > 0.0)) throw InvalidArgument("proposal standard deviations must be positive");
  if (s.burn_in < 0 || s.samples < 1 || s.thin < 1 || s.chains < 1) throw InvalidArgument("invalid MCMC lengths");
  if (mode == Mode::simulate) {
    if (evaluation.replicates < 1) throw InvalidArgument("evaluation.replicates must be at least 1");
    if (evaluation.models.empty()) throw InvalidArgument("evaluation.models is empty");
    if (!(evaluation.level > 0.0 && evaluation.level < 1.0)) throw InvalidArgument("evaluation.level must lie in (0, 1)");
    if (!(generation.alpha > 0.0 && generation.alpha < 1.0)) throw InvalidArgument("generation.alpha must lie in (0, 1)");
  }
  if (mode == Mode::analyze) {
    if (!data) throw InvalidArgument("analyze needs a data file");
    if (!out) throw InvalidArgument("analyze needs an output directory");
    if (!adjacency) throw InvalidArgument("analyze needs an adjacency file");
    if (analysis.permutations < 999) throw InvalidArgument("analysis.permutations must be at least 999");
    if (s.samples * s.chains < 100) throw InvalidArgument("too few MCMC draws (HPD needs 100)");
  }
}

RunConfig default_config(Mode mode) {
  RunConfig c;
  c.mode = mode;
  if (mode == Mode::analyze) {
    c.spatial.v = 3.0;
    c.spatial.s1 = 0.05;
    c.spatial.s2 = 0.05;
    c.spatial.s3 = 0.45;
    c.spatial.burn_in = 10000;
    c.spatial.samples = 10000;
    c.spatial.thin = 5;
    c.spatial.chains = 4;
  }
  return c;
}

RunConfig parse_config(const std::string& json_text, Mode mode) {
  json doc;
  try {
    doc = json::parse(json_text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(doc, "", {"mode", "seed", "jobs", "adjacency", "data", "out", "generation", "spatial", "evaluation",
                           "analysis"});
  RunConfig c = default_config(mode);
  if (doc.contains("mode")) {
    std::string m;
    read(doc, "mode", m, "");
    if (m != to_string(mode)) throw InvalidArgument("config mode '" + m + "' does not match the command");
  }
  read(doc, "seed", c.seed, "");
  if (doc.contains("jobs")) {
    unsigned j = 0;
    read(doc, "jobs", j, "");
    c.jobs = j;
  }
  for (auto [key, slot] : {std::pair{"adjacency", &c.adjacency}, {"data", &c.data}, {"out", &c.out}}) {
    if (doc.contains(key)) {
      std::string p;
      read(doc, key, p, "");
      *slot = p;
    }
  }
  if (doc.contains("generation")) parse_generation(doc["generation"], c.generation);
  if (doc.contains("spatial")) parse_spatial(doc["spatial"], c.spatial);
  if (doc.contains("evaluation")) parse_evaluation(doc["evaluation"], c.evaluation);
  if (doc.contains("analysis")) parse_analysis(doc["analysis"], c.analysis);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), mode);
}

std::string config_to_json(const RunConfig& c, int indent) {
  json doc;
  doc["mode"] = std::string(to_string(c.mode));
  doc["seed"] = c.seed;
  if (c.jobs) doc["jobs"] = *c.jobs;
  doc["adjacency"] = c.adjacency ? c.adjacency->string() : std::string("(bundled california_counties)");
  if (c.data) doc["data"] = c.data->string();
  if (c.out) doc["out"] = c.out->string();
  const auto& s = c.spatial;
  doc["spatial"] = {{"v", s.v},         {"lambda_R", s.lambda_R},     {"alpha", s.alpha},   {"sar_alpha", s.sar_alpha},
                    {"s1", s.s1},       {"s2", s.s2},                 {"s3", s.s3},         {"burn_in", s.burn_in},
                    {"samples", s.samples}, {"thin", s.thin},         {"chains", s.chains}, {"save_draws", s.save_draws},
                    {"store_G", s.store_G}};
  if (c.mode == Mode::simulate) {
    const auto g = generation_params(c, config_graph(c));
    doc["generation"] = {{"kind", std::string(to_string(c.generation.kind))},
                         {"alpha", c.generation.alpha},
                         {"beta0", from_vector(g.beta0)},
                         {"B1", from_matrix(g.B1)},
                         {"delta0", from_vector(g.delta0)},
                         {"D1", from_matrix(g.D1)},
                         {"mu", from_vector(g.mu)},
                         {"A", from_matrix(g.A)},
                         {"C", from_matrix(g.C)},
                         {"rho", from_vector(g.rho)}};
    const auto& e = c.evaluation;
    std::vector<std::string> models;
    for (auto m : e.models) models.emplace_back(to_string(m));
    doc["evaluation"] = {{"replicates", e.replicates},
                         {"level", e.level},
                         {"models", models},
                         {"nonspatial_draws", e.nonspatial_draws},
                         {"conditioned_draws", e.conditioned_draws},
                         {"compute_kl", e.compute_kl},
                         {"max_failure_fraction", e.max_failure_fraction}};
  }
  if (c.mode == Mode::analyze) {
    doc["analysis"] = {{"standardize", c.analysis.standardize},
                       {"permutations", c.analysis.permutations},
                       {"unconditioned_sar", c.analysis.unconditioned_sar}};
  }
  return doc.dump(indent);
}

AdjacencyGraph config_graph(const RunConfig& config) {
  return config.adjacency ? read_adjacency(*config.adjacency) : california_counties();
}

GenerationParams generation_params(const RunConfig& config, const AdjacencyGraph& graph) {
  const auto& g = config.generation;
  GenerationParams p = default_generation_params(make_scaled_precision(graph, g.kind, g.alpha));
  if (g.beta0) p.beta0 = *g.beta0;
  if (g.B1) p.B1 = *g.B1;
  if (g.delta0) p.delta0 = *g.delta0;
  if (g.D1) p.D1 = *g.D1;
  if (g.mu) p.mu = *g.mu;
  if (g.A) p.A = *g.A;
  if (g.C) p.C = *g.C;
  if (g.rho) p.rho = *g.rho;
  p.validate();
  return p;
}

StudyConfig study_config(const RunConfig& config, const AdjacencyGraph& graph) {
  StudyConfig sc;
  sc.params = generation_params(config, graph);
  sc.graph = graph;
  const auto& s = config.spatial;
  const auto& e = config.evaluation;
  sc.sar_alpha = s.sar_alpha;
  sc.models = e.models;
  sc.replicates = e.replicates;
  sc.level = e.level;
  sc.seed = config.seed;
  sc.v = s.v;
  sc.lambda_R = s.lambda_R;
  sc.s1 = s.s1;
  sc.s2 = s.s2;
  sc.s3 = s.s3;
  sc.burn_in = s.burn_in;
  sc.samples = s.samples;
  sc.thin = s.thin;
  sc.chains = s.chains;
  sc.nonspatial_draws = e.nonspatial_draws;
  sc.conditioned_draws = e.conditioned_draws;
  sc.compute_kl = e.compute_kl;
  sc.max_failure_fraction = e.max_failure_fraction;
  sc.validate();
  return sc;
}

unsigned default_jobs() {
  const char* env = std::getenv("MBYM2_JOBS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long j = std::strtol(env, &end, 10);
  if (*end != '\0' || j < 1) throw InvalidArgument(std::string("MBYM2_JOBS must be a positive integer, got '") + env + "'");
  return static_cast<unsigned>(j);
}

}  // namespace mbym2::cli
