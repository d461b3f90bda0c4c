#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mbym2/cli/commands.hpp"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"

namespace mbym2::cli {
namespace {

struct Flags {
  std::string config;
  std::optional<unsigned> jobs;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, adjacency, out;
  std::string kind = "car";
  double alpha = 0.99;
};

RunConfig effective_config(const Flags& f, Mode mode) {
  RunConfig c = f.config.empty() ? default_config(mode) : load_config(f.config, mode);
  if (f.seed) c.seed = *f.seed;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.data) c.data = *f.data;
  if (f.adjacency) c.adjacency = *f.adjacency;
  if (f.out) c.out = *f.out;
  return c;
}

unsigned effective_jobs(const RunConfig& c) { return c.jobs ? *c.jobs : default_jobs(); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coregionalized multivariate BYM2 regression: simulation study, data analysis and precision scaling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "replicated simulation study with frequentist evaluation");
  sim->add_option("--config", f.config, "JSON run configuration")->required();
  sim->add_option("--jobs", f.jobs, "parallel replicates (default: config \"jobs\", then MBYM2_JOBS, then 1)")->check(CLI::PositiveNumber);
  sim->add_option("--seed", f.seed, "master seed");
  sim->add_option("--adjacency", f.adjacency, "adjacency file (default: bundled California counties)");
  sim->add_option("--out", f.out, "output directory");

  auto* ana = app.add_subcommand("analyze", "fit non-spatial and spatial models to a dataset");
  ana->add_option("--config", f.config, "JSON run configuration")->required();
  ana->add_option("--data", f.data, "dataset CSV (region,x1..xp,y1..yk)");
  ana->add_option("--adjacency", f.adjacency, "adjacency file");
  ana->add_option("--out", f.out, "output directory");
  ana->add_option("--jobs", f.jobs, "parallel chains (default: config \"jobs\", then MBYM2_JOBS, then 1)")->check(CLI::PositiveNumber);
  ana->add_option("--seed", f.seed, "master seed");

  auto* scale = app.add_subcommand("scale-precision", "scaling constant and spectrum of a CAR/SAR precision");
  scale->add_option("--adjacency", f.adjacency, "adjacency file (default: bundled California counties)");
  scale->add_option("--alpha", f.alpha, "spatial dependence parameter in (0, 1)");
  scale->add_option("--kind", f.kind, "car or sar")->check(CLI::IsMember({"car", "sar"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    if (*sim) {
      const RunConfig c = effective_config(f, Mode::simulate);
      cmd_simulate(c, effective_jobs(c), err);
    } else if (*ana) {
      const RunConfig c = effective_config(f, Mode::analyze);
      cmd_analyze(c, effective_jobs(c), err);
    } else if (*scale) {
      const AdjacencyGraph g = f.adjacency ? read_adjacency(*f.adjacency) : california_counties();
      print_scale_report(cmd_scale_precision(g, precision_kind_from_string(f.kind), f.alpha), out);
    }
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  }
  return kOk;
}

}  // namespace mbym2::cli
