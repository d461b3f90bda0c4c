#include "mbym2/study.hpp"

#include <array>
#include <chrono>
#include <mutex>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/mcmc.hpp"
#include "mbym2/nonspatial.hpp"
#include "mbym2/parallel.hpp"
#include "mbym2/spatial_closed_form.hpp"

namespace mbym2 {
namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 5> kModelNames = {{
    {ModelKind::nonspatial, "nonspatial"},
    {ModelKind::conditioned_car, "conditioned-car"},
    {ModelKind::conditioned_sar, "conditioned-sar"},
    {ModelKind::unconditioned_car, "unconditioned-car"},
    {ModelKind::unconditioned_sar, "unconditioned-sar"},
}};

bool uses_sar(ModelKind kind) { return kind == ModelKind::conditioned_sar || kind == ModelKind::unconditioned_sar; }

// Entry (i, j) of a sequence of matrices.
std::vector<double> entry_trace(const std::vector<MatrixXd>& draws, Index i, Index j) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d(i, j));
  return out;
}

ReplicateRecord summarize_draws(const std::vector<MatrixXd>& draws, double level) {
  const Index rows = draws.front().rows(), cols = draws.front().cols();
  ReplicateRecord rec{MatrixXd::Zero(rows, cols), MatrixXd(rows, cols), MatrixXd(rows, cols), MatrixXd(rows, cols)};
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const auto trace = entry_trace(draws, i, j);
      double mean = 0.0;
      for (double x : trace) mean += x;
      mean /= static_cast<double>(trace.size());
      double var = 0.0;
      for (double x : trace) var += (x - mean) * (x - mean);
      rec.estimate(i, j) = mean;
      rec.posterior_variance(i, j) = var / static_cast<double>(trace.size() - 1);
      const auto [lo, hi] = hpd_interval(trace, level);
      rec.lower(i, j) = lo;
      rec.upper(i, j) = hi;
    }
  }
  return rec;
}

struct Structures {
  ScaledPrecision car;
  ScaledPrecision sar;
  SpectralBasis car_basis;
  SpectralBasis sar_basis;
  std::optional<KroneckerKl> kl_car;
  std::optional<KroneckerKl> kl_sar;
};

class ReplicateFitter {
 public:
  ReplicateFitter(const StudyConfig& config, const Structures& s) : config_(config), s_(s) {}

  ModelFit fit(ModelKind kind, const Dataset& data, std::uint64_t seed) const {
    Rng rng = make_rng(seed);
    const ScaledPrecision& precision = uses_sar(kind) ? s_.sar : s_.car;
    const KroneckerGaussian generation =
        config_.compute_kl ? generation_kronecker(config_.params, data.X) : KroneckerGaussian{};
    const KroneckerKl* kl = nullptr;
    if (config_.compute_kl) kl = uses_sar(kind) ? &*s_.kl_sar : &*s_.kl_car;

    switch (kind) {
      case ModelKind::nonspatial:
        return fit_nonspatial_model(data, generation, rng);
      case ModelKind::conditioned_car:
      case ModelKind::conditioned_sar:
        return fit_conditioned(data, precision, generation, kl, rng);
      case ModelKind::unconditioned_car:
      case ModelKind::unconditioned_sar:
        return fit_unconditioned(data, precision, generation, kl, seed);
    }
    throw InvalidArgument("unknown model kind");
  }

 private:
  ModelFit fit_nonspatial_model(const Dataset& data, const KroneckerGaussian& generation, Rng& rng) const {
    const MatrixXd sigma0 = default_sigma0(data.Y, data.X);
    const NonSpatialPosterior post = fit_nonspatial(data.Y, data.X, config_.v, sigma0);
    const NonSpatialDraws draws = sample_nonspatial(post, config_.nonspatial_draws, rng);
    ModelFit fit;
    fit.record = summarize_draws(draws.B, config_.level);
    fit.record.estimate = post.B_hat;
    if (post.v_star - static_cast<double>(post.k()) - 1.0 > 0.0) {
      const MatrixXd cov = post.coefficient_covariance();
      fit.record.posterior_variance = unvec(cov.diagonal(), post.B_hat.rows(), post.k());
    }
    if (config_.compute_kl) {
      std::vector<ModelDraw> md;
      md.reserve(draws.B.size());
      const VectorXd zero = VectorXd::Zero(post.k());
      for (std::size_t s = 0; s < draws.B.size(); ++s) md.push_back({draws.B[s], upper_cholesky(draws.Sigma[s]), zero});
      fit.kl = kl_fit_summary(*s_.kl_car, generation, data.X, md);
    }
    return fit;
  }

  ModelFit fit_conditioned(const Dataset& data, const ScaledPrecision& precision, const KroneckerGaussian& generation,
                           const KroneckerKl* kl, Rng& rng) const {
    const auto& p = config_.params;
    const ConditionedPosterior cp = conditioned_estimate(data.Y, data.X, p.A, p.rho, precision);
    const IntervalMatrix iv = conditional_intervals(cp, config_.level);
    ModelFit fit;
    fit.record = {cp.B_tilde, iv.lower, iv.upper, coefficient_variances(cp)};
    if (kl) {
      const auto draws = sample_conditioned(cp, config_.conditioned_draws, rng);
      std::vector<ModelDraw> md;
      md.reserve(draws.size());
      for (const auto& b : draws) md.push_back({b, p.A, p.rho});
      fit.kl = kl_fit_summary(*kl, generation, data.X, md);
    }
    return fit;
  }

  ModelFit fit_unconditioned(const Dataset& data, const ScaledPrecision& precision,
                             const KroneckerGaussian& generation, const KroneckerKl* kl, std::uint64_t seed) const {
    SpatialConfig sc;
    sc.precision = precision;
    sc.v = config_.v;
    sc.Sigma0 = default_sigma0(data.Y, data.X);
    sc.lambda_R = config_.lambda_R;
    sc.s1 = config_.s1;
    sc.s2 = config_.s2;
    sc.s3 = config_.s3;
    sc.burn_in = config_.burn_in;
    sc.thin = config_.thin;
    sc.iterations = config_.burn_in + config_.samples * config_.thin;
    sc.chain_count = config_.chains;
    sc.seed = seed;
    sc.store_G = false;
    const auto chains = run_chains(sc, data.Y, data.X);

    std::vector<MatrixXd> B;
    std::vector<ModelDraw> md;
    double accept_M = 0.0, accept_R = 0.0;
    for (const auto& c : chains) {
      accept_M += c.accept_M / static_cast<double>(chains.size());
      accept_R += c.accept_R / static_cast<double>(chains.size());
      for (const auto& d : c.draws) {
        B.push_back(d.B);
        if (kl) md.push_back({d.B, d.M, d.r});
      }
    }
    ModelFit fit;
    fit.record = summarize_draws(B, config_.level);
    fit.accept_M = accept_M;
    fit.accept_R = accept_R;
    if (kl) fit.kl = kl_fit_summary(*kl, generation, data.X, md);
    return fit;
  }

  const StudyConfig& config_;
  const Structures& s_;
};

}  // namespace

std::string_view to_string(ModelKind kind) {
  for (const auto& [k, name] : kModelNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ModelKind model_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kModelNames) {
    if (n == name) return k;
  }
  throw InvalidArgument("unknown model '" + std::string(name) +
                        "' (expected nonspatial, conditioned-car, conditioned-sar, unconditioned-car or "
                        "unconditioned-sar)");
}

const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds = {ModelKind::nonspatial, ModelKind::conditioned_car,
                                               ModelKind::conditioned_sar, ModelKind::unconditioned_car,
                                               ModelKind::unconditioned_sar};
  return kinds;
}

void StudyConfig::validate() const {
  params.validate();
  if (graph.n != params.n()) throw InvalidArgument("graph and generation structure disagree on n");
  if (models.empty()) throw InvalidArgument("model list is empty");
  if (replicates < 1) throw InvalidArgument("replicates must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
  if (!(sar_alpha > 0.0 && sar_alpha < 1.0)) throw InvalidArgument("SAR alpha must lie in (0, 1)");
  if (!(v > static_cast<double>(params.k()) - 1.0)) throw InvalidArgument("v must exceed k - 1");
  if (!(lambda_R > 0.0)) throw InvalidArgument("lambda_R must be positive");
  if (!(s1 > 0.0 && s2 > 0.0 && s3 > 0.0)) throw InvalidArgument("proposal standard deviations must be positive");
  if (burn_in < 0 || samples < 1 || thin < 1 || chains < 1) throw InvalidArgument("invalid MCMC lengths");
  if (nonspatial_draws < 100 || conditioned_draws < 1) throw InvalidArgument("too few exact draws (HPD needs 100)");
  if (samples * chains < 100) throw InvalidArgument("too few MCMC draws (HPD needs 100)");
}

std::uint64_t replicate_seed(std::uint64_t master, Index replicate) {
  return derive_seed(master, static_cast<std::uint64_t>(replicate));
}

std::uint64_t dataset_seed(std::uint64_t rep_seed) { return derive_seed(rep_seed, std::string_view("dataset")); }

std::uint64_t model_seed(std::uint64_t rep_seed, ModelKind kind) { return derive_seed(rep_seed, to_string(kind)); }

Dataset study_dataset(const StudyConfig& config, Index replicate) {
  return generate_dataset(config.params, dataset_seed(replicate_seed(config.seed, replicate)));
}

StudyResult run_study(const StudyConfig& config, unsigned jobs, const StudyProgress& progress) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  Structures s;
  s.car = config.params.V_phi;
  s.car_basis = spectral_decompose(s.car);
  bool need_sar = false;
  for (auto m : config.models) need_sar = need_sar || uses_sar(m);
  if (need_sar) {
    s.sar = make_scaled_precision(config.graph, PrecisionKind::sar, config.sar_alpha);
    s.sar_basis = spectral_decompose(s.sar);
  }
  if (config.compute_kl) {
    s.kl_car.emplace(s.car_basis, s.car_basis);
    if (need_sar) s.kl_sar.emplace(s.car_basis, s.sar_basis);
  }
  const ReplicateFitter fitter(config, s);
  const DatasetGenerator generator(config.params);

  StudyResult result;
  result.F = unconditional_estimand(config.params);
  result.models = config.models;
  result.replicates.resize(static_cast<std::size_t>(config.replicates));
  std::mutex progress_mutex;
  Index completed = 0;

  parallel_for(result.replicates.size(), jobs, [&](std::size_t i) {
    auto& rep = result.replicates[i];
    const auto t0 = std::chrono::steady_clock::now();
    rep.index = static_cast<Index>(i);
    rep.seed = replicate_seed(config.seed, rep.index);
    try {
      Rng data_rng = make_rng(dataset_seed(rep.seed));
      const Dataset data = generator.generate(data_rng);
      for (auto kind : config.models) rep.fits.push_back(fitter.fit(kind, data, model_seed(rep.seed, kind)));
    } catch (const Error& e) {
      rep.fits.clear();
      rep.error = e.what();
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (progress) {
      std::lock_guard lock(progress_mutex);
      progress(++completed, config.replicates);
    }
  });

  for (const auto& rep : result.replicates) {
    if (rep.error) ++result.failed;
  }
  if (static_cast<double>(result.failed) > config.max_failure_fraction * static_cast<double>(config.replicates)) {
    std::string first;
    for (const auto& rep : result.replicates) {
      if (rep.error) {
        first = *rep.error;
        break;
      }
    }
    throw NumericalError(std::to_string(result.failed) + " of " + std::to_string(config.replicates) +
                         " replicates failed; first error: " + first);
  }
  for (std::size_t m = 0; m < config.models.size(); ++m) {
    std::vector<ReplicateRecord> records;
    for (const auto& rep : result.replicates) {
      if (!rep.error) records.push_back(rep.fits[m].record);
    }
    result.reports.push_back(frequentist_eval(records, result.F, config.min_replicates));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace mbym2
