#include "mbym2/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>

#include "mbym2/error.hpp"
#include "mbym2/linalg.hpp"

namespace mbym2 {
namespace {

using Chains = std::vector<std::vector<double>>;

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size()); }

double sample_variance(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size() - 1);
}

Chains split_chains(const Chains& chains) {
  Chains out;
  for (const auto& c : chains) {
    const std::size_t half = c.size() / 2;
    out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
    out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
  }
  return out;
}

// Pooled average ranks mapped through Φ^{-1}((rank - 3/8)/(S + 1/4)).
Chains rank_normalize(const Chains& chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], c * chains[0].size() + i);
  }
  std::sort(pooled.begin(), pooled.end());
  const double S = static_cast<double>(pooled.size());
  std::vector<double> z(pooled.size());
  for (std::size_t a = 0; a < pooled.size();) {
    std::size_t b = a;
    while (b + 1 < pooled.size() && pooled[b + 1].first == pooled[a].first) ++b;
    const double rank = 0.5 * static_cast<double>(a + b) + 1.0;
    const double value = normal_quantile((rank - 0.375) / (S + 0.25));
    for (std::size_t i = a; i <= b; ++i) z[pooled[i].second] = value;
    a = b + 1;
  }
  Chains out(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    out[c].assign(z.begin() + static_cast<std::ptrdiff_t>(c * chains[0].size()),
                  z.begin() + static_cast<std::ptrdiff_t>((c + 1) * chains[0].size()));
  }
  return out;
}

double basic_rhat(const Chains& chains) {
  const double n = static_cast<double>(chains[0].size());
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    means.push_back(mean_of(c));
    vars.push_back(sample_variance(c));
  }
  const double within = mean_of(vars);
  const double between = sample_variance(means);  // B / N
  return std::sqrt(((n - 1.0) / n * within + between) / within);
}

double bulk_ess(const Chains& chains) {
  const std::size_t m = chains.size(), n = chains[0].size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(m);
  for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c]);
  // Mean over chains of the biased autocovariance at lag t.
  auto acov = [&](std::size_t t) {
    double total = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
      total += s / nd;
    }
    return total / static_cast<double>(m);
  };
  const double mean_var = acov(0) * nd / (nd - 1.0);
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += sample_variance(means);
  auto rho = [&](std::size_t t) { return 1.0 - (mean_var - acov(t)) / var_plus; };

  std::vector<double> rho_hat(n, 0.0);
  rho_hat[0] = 1.0;
  double even = 1.0, odd = rho(1);
  rho_hat[1] = odd;
  std::size_t t = 1;
  while (t + 5 < n && even + odd > 0.0) {
    even = rho(t + 1);
    odd = rho(t + 2);
    if (even + odd >= 0.0) {
      rho_hat[t + 1] = even;
      rho_hat[t + 2] = odd;
    }
    t += 2;
  }
  const std::size_t max_t = t;
  if (even > 0.0 && max_t + 1 < n) rho_hat[max_t + 1] = even;
  // Initial monotone sequence.
  for (std::size_t s = 1; s + 3 <= max_t; s += 2) {
    if (rho_hat[s + 1] + rho_hat[s + 2] > rho_hat[s - 1] + rho_hat[s]) {
      rho_hat[s + 1] = 0.5 * (rho_hat[s - 1] + rho_hat[s]);
      rho_hat[s + 2] = rho_hat[s + 1];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0;
  for (std::size_t s = 0; s <= max_t && s < n; ++s) tau += 2.0 * rho_hat[s];
  if (max_t + 1 < n) tau += rho_hat[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument(std::string("record field has the wrong shape: ") + what);
}

struct BlockSolve {
  double log_det = 0.0;
  Eigen::LLT<MatrixXd> llt;
};

BlockSolve block(const MatrixXd& s_i, const MatrixXd& s_w, double omega) {
  BlockSolve b;
  b.llt.compute(s_i + omega * s_w);
  if (b.llt.info() != Eigen::Success) throw NumericalError("covariance block is not positive definite");
  b.log_det = 2.0 * b.llt.matrixLLT().diagonal().array().log().sum();
  return b;
}

// S1 + ωS2 = T^{-T} diag(1 + ωγ) T^{-1} for every ω, from S1 = LLᵀ and the
// eigendecomposition of L^{-1} S2 L^{-T}. Empty when S1 is not positive definite.
struct PencilBasis {
  double log_det_s1 = 0.0;
  MatrixXd T;
  VectorXd gamma;
};

std::optional<PencilBasis> pencil_basis(const MatrixXd& s1, const MatrixXd& s2) {
  const Eigen::LLT<MatrixXd> llt(s1);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const MatrixXd l_inv = llt.matrixL().solve(MatrixXd::Identity(s1.rows(), s1.cols()));
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(l_inv * s2 * l_inv.transpose());
  return PencilBasis{2.0 * llt.matrixLLT().diagonal().array().log().sum(), l_inv.transpose() * es.eigenvectors(),
                     es.eigenvalues()};
}

}  // namespace

std::pair<double, double> hpd_interval(std::vector<double> samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("HPD level must lie in (0, 1)");
  if (samples.size() < 100) throw InvalidArgument("HPD interval needs at least 100 draws");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  const auto m = std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(level * double(n) - 1e-9)));
  std::size_t best = 0;
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + m <= n; ++j) {
    const double w = samples[j + m - 1] - samples[j];
    if (w < width) {
      width = w;
      best = j;
    }
  }
  return {samples[best], samples[best + m - 1]};
}

Convergence rhat_ess(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw InvalidArgument("no chains");
  const std::size_t n = chains[0].size();
  for (const auto& c : chains) {
    if (c.size() != n) throw InvalidArgument("chains must have equal length");
  }
  if (n < 4) throw InvalidArgument("chains need at least 4 draws");
  const Chains split = split_chains(chains);
  const auto [lo, hi] = std::minmax_element(chains[0].begin(), chains[0].end());
  bool constant = *lo == *hi;
  for (const auto& c : chains) constant = constant && std::all_of(c.begin(), c.end(), [&](double x) { return x == *lo; });
  if (constant) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }

  const Chains z = rank_normalize(split);
  std::vector<double> pooled;
  for (const auto& c : split) pooled.insert(pooled.end(), c.begin(), c.end());
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(pooled.size() / 2), pooled.end());
  double median = pooled[pooled.size() / 2];
  if (pooled.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(pooled.size() / 2)));
  }
  Chains folded = split;
  for (auto& c : folded) {
    for (double& x : c) x = std::abs(x - median);
  }
  const Chains zf = rank_normalize(folded);
  return {std::max(basic_rhat(z), basic_rhat(zf)), bulk_ess(z)};
}

EvalReport frequentist_eval(std::span<const ReplicateRecord> records, const MatrixXd& F, Index min_replicates) {
  if (static_cast<Index>(records.size()) < std::max<Index>(1, min_replicates)) {
    throw InvalidArgument("frequentist evaluation needs at least " + std::to_string(min_replicates) + " replicates");
  }
  EvalReport r;
  r.mse = MatrixXd::Zero(F.rows(), F.cols());
  r.coverage = MatrixXd::Zero(F.rows(), F.cols());
  r.avg_posterior_variance = MatrixXd::Zero(F.rows(), F.cols());
  for (const auto& rec : records) {
    check_same_shape(rec.estimate, F, "estimate");
    check_same_shape(rec.lower, F, "lower");
    check_same_shape(rec.upper, F, "upper");
    check_same_shape(rec.posterior_variance, F, "posterior_variance");
    r.mse += (rec.estimate - F).cwiseAbs2();
    r.coverage += ((rec.lower.array() <= F.array()) && (F.array() <= rec.upper.array())).cast<double>().matrix();
    r.avg_posterior_variance += rec.posterior_variance;
  }
  r.replicate_count = static_cast<Index>(records.size());
  const double count = static_cast<double>(records.size());
  r.mse /= count;
  r.coverage /= count;
  r.avg_posterior_variance /= count;
  return r;
}

double gaussian_kl(const GaussianSpec& p, const GaussianSpec& q) {
  if (p.dim() != q.dim() || p.cov.rows() != p.dim() || q.cov.rows() != q.dim()) {
    throw InvalidArgument("Gaussian KL needs specs of equal dimension");
  }
  Eigen::LLT<MatrixXd> lp(p.cov), lq(q.cov);
  if (lp.info() != Eigen::Success || lq.info() != Eigen::Success) {
    throw NumericalError("Gaussian KL needs positive definite covariances");
  }
  const double logdet_p = 2.0 * lp.matrixLLT().diagonal().array().log().sum();
  const double logdet_q = 2.0 * lq.matrixLLT().diagonal().array().log().sum();
  const double trace = lq.solve(p.cov).trace();
  const VectorXd z = lq.matrixL().solve(q.mean - p.mean);
  const double out = 0.5 * (trace + z.squaredNorm() - static_cast<double>(p.dim()) + logdet_q - logdet_p);
  return std::max(out, 0.0);
}

GaussianSpec to_dense(const KroneckerGaussian& g, const MatrixXd& V) {
  const Index n = g.mean.rows();
  MatrixXd cov = kron(g.S_I, MatrixXd::Identity(n, n)) + kron(g.S_V, V);
  return {vec(g.mean), 0.5 * (cov + cov.transpose())};
}

KroneckerKl::KroneckerKl(const SpectralBasis& generation, const SpectralBasis& analysis)
    : v_eigen_(generation.lambda.cwiseInverse()), w_eigen_(analysis.lambda.cwiseInverse()), qw_(analysis.Q) {
  if (generation.Q.rows() != analysis.Q.rows()) throw InvalidArgument("spatial structures disagree on n");
  const MatrixXd t = analysis.Q.transpose() * generation.Q;
  v_rotated_ = t.cwiseAbs2() * v_eigen_;
}

double KroneckerKl::operator()(const KroneckerGaussian& p, const KroneckerGaussian& q) const {
  const Index n = qw_.rows(), k = p.S_I.rows();
  if (p.mean.rows() != n || q.mean.rows() != n || p.mean.cols() != k || q.mean.cols() != k) {
    throw InvalidArgument("KL arguments have inconsistent dimensions");
  }
  const auto bq = pencil_basis(q.S_I, q.S_V);
  const auto bp = pencil_basis(p.S_I, p.S_V);
  if (!bq || !bp) return blockwise(p, q);

  const MatrixXd f = qw_.transpose() * (q.mean - p.mean) * bq->T;
  const VectorXd a = (bq->T.transpose() * p.S_I * bq->T).diagonal();
  const VectorXd b = (bq->T.transpose() * p.S_V * bq->T).diagonal();
  double trace = 0.0, maha = 0.0;
  double logdet_q = static_cast<double>(n) * bq->log_det_s1;
  double logdet_p = static_cast<double>(n) * bp->log_det_s1;
  for (Index i = 0; i < n; ++i) {
    for (Index m = 0; m < k; ++m) {
      const double dq = 1.0 + w_eigen_(i) * bq->gamma(m);
      const double dp = 1.0 + v_eigen_(i) * bp->gamma(m);
      if (!(dq > 0.0 && dp > 0.0)) throw NumericalError("KL covariance is not positive definite");
      logdet_q += std::log(dq);
      logdet_p += std::log(dp);
      trace += (a(m) + v_rotated_(i) * b(m)) / dq;
      maha += f(i, m) * f(i, m) / dq;
    }
  }
  const double out = 0.5 * (trace + maha - static_cast<double>(n * k) + logdet_q - logdet_p);
  return std::max(out, 0.0);
}

double KroneckerKl::blockwise(const KroneckerGaussian& p, const KroneckerGaussian& q) const {
  const Index n = qw_.rows(), k = p.S_I.rows();
  const MatrixXd e = qw_.transpose() * (q.mean - p.mean);
  double trace = 0.0, maha = 0.0, logdet_p = 0.0, logdet_q = 0.0;
  for (Index i = 0; i < n; ++i) {
    const BlockSolve bq = block(q.S_I, q.S_V, w_eigen_(i));
    const BlockSolve bp = block(p.S_I, p.S_V, v_eigen_(i));
    logdet_q += bq.log_det;
    logdet_p += bp.log_det;
    trace += bq.llt.solve(p.S_I + v_rotated_(i) * p.S_V).trace();
    const VectorXd row = e.row(i).transpose();
    maha += row.dot(bq.llt.solve(row));
  }
  const double out = 0.5 * (trace + maha - static_cast<double>(n * k) + logdet_q - logdet_p);
  return std::max(out, 0.0);
}

KroneckerGaussian generation_kronecker(const GenerationParams& params, const MatrixXd& X) {
  if (X.rows() != params.n() || X.cols() != params.p() + 1) throw InvalidArgument("design does not match parameters");
  const MatrixXd& A = params.A;
  const VectorXd one_minus = 1.0 - params.rho.array();
  return {X * unconditional_estimand(params), A.transpose() * one_minus.asDiagonal() * A,
          A.transpose() * params.rho.asDiagonal() * A};
}

KroneckerGaussian analysis_kronecker(const MatrixXd& X, const MatrixXd& B, const MatrixXd& M, const VectorXd& r) {
  const VectorXd one_minus = 1.0 - r.array();
  return {X * B, M.transpose() * one_minus.asDiagonal() * M, M.transpose() * r.asDiagonal() * M};
}

double kl_fit_summary(const KroneckerKl& kl, const KroneckerGaussian& generation, const MatrixXd& X,
                      std::span<const ModelDraw> draws) {
  if (draws.empty()) throw InvalidArgument("KL summary needs at least one draw");
  double total = 0.0;
  for (const auto& d : draws) total += kl(generation, analysis_kronecker(X, d.B, d.M, d.r));
  return total / static_cast<double>(draws.size());
}

namespace {

VectorXd centred(const VectorXd& e, const char* what) {
  if (e.size() < 2) throw InvalidArgument(std::string(what) + " needs at least two residuals");
  VectorXd c = e.array() - e.mean();
  if (!(c.squaredNorm() > 1e-24 * std::max(1.0, e.squaredNorm()))) {
    throw InvalidArgument(std::string(what) + " is undefined for constant residuals");
  }
  return c;
}

}  // namespace

double morans_i(const VectorXd& residuals, const AdjacencyGraph& graph) {
  if (residuals.size() != graph.n) throw InvalidArgument("residual length does not match the graph");
  const VectorXd e = centred(residuals, "Moran's I");
  const double s0 = graph.W.sum();
  return static_cast<double>(graph.n) / s0 * e.dot(graph.W * e) / e.squaredNorm();
}

double gearys_c(const VectorXd& residuals, const AdjacencyGraph& graph) {
  if (residuals.size() != graph.n) throw InvalidArgument("residual length does not match the graph");
  const VectorXd e = centred(residuals, "Geary's C");
  const double s0 = graph.W.sum();
  double sum = 0.0;
  for (const auto& [i, j] : graph.edges) sum += 2.0 * (e(i) - e(j)) * (e(i) - e(j));
  return (static_cast<double>(graph.n) - 1.0) / (2.0 * s0) * sum / e.squaredNorm();
}

PermutationResult permutation_test(const AutocorrelationStatistic& stat, const VectorXd& residuals,
                                   const AdjacencyGraph& graph, Index n_perm, Sidedness sidedness,
                                   double null_center, Rng& rng) {
  if (n_perm < 999) throw InvalidArgument("permutation test needs at least 999 permutations");
  PermutationResult out;
  out.statistic = stat(residuals, graph);
  out.permutations = n_perm;
  const double tol = 1e-12 * std::max(1.0, std::abs(out.statistic));
  auto extreme = [&](double s) {
    switch (sidedness) {
      case Sidedness::two_sided:
        return std::abs(s - null_center) >= std::abs(out.statistic - null_center) - tol;
      case Sidedness::lower:
        return s <= out.statistic + tol;
      case Sidedness::upper:
        return s >= out.statistic - tol;
    }
    return false;
  };
  std::vector<Index> order(static_cast<std::size_t>(residuals.size()));
  std::iota(order.begin(), order.end(), Index{0});
  VectorXd permuted(residuals.size());
  Index count = 0;
  for (Index b = 0; b < n_perm; ++b) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index i = 0; i < residuals.size(); ++i) permuted(i) = residuals(order[static_cast<std::size_t>(i)]);
    if (extreme(stat(permuted, graph))) ++count;
  }
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(n_perm + 1);
  return out;
}

PermutationResult moran_test(const VectorXd& residuals, const AdjacencyGraph& graph, Index n_perm, Rng& rng) {
  const double center = -1.0 / (static_cast<double>(graph.n) - 1.0);
  return permutation_test(morans_i, residuals, graph, n_perm, Sidedness::two_sided, center, rng);
}

PermutationResult geary_test(const VectorXd& residuals, const AdjacencyGraph& graph, Index n_perm, Rng& rng) {
  return permutation_test(gearys_c, residuals, graph, n_perm, Sidedness::lower, 1.0, rng);
}

LikelihoodDraw spatial_likelihood_draw(const MatrixXd& B, const MatrixXd& M, const VectorXd& r) {
  const VectorXd one_minus = 1.0 - r.array();
  return {B, M.transpose() * one_minus.asDiagonal() * M, M.transpose() * r.asDiagonal() * M};
}

double kronecker_log_likelihood(const LikelihoodDraw& draw, const MatrixXd& Y, const MatrixXd& X,
                                const SpectralBasis& spectral) {
  const Index n = Y.rows(), k = Y.cols();
  if (X.rows() != n || spectral.Q.rows() != n) throw InvalidArgument("Y, X and the spatial structure disagree on n");
  const MatrixXd e = spectral.Q.transpose() * (Y - X * draw.B);
  double out = -0.5 * static_cast<double>(n * k) * std::log(2.0 * std::numbers::pi);
  for (Index i = 0; i < n; ++i) {
    const BlockSolve b = block(draw.S_I, draw.S_W, 1.0 / spectral.lambda(i));
    const VectorXd row = e.row(i).transpose();
    out -= 0.5 * (b.log_det + row.dot(b.llt.solve(row)));
  }
  return out;
}

DicResult dic(std::span<const LikelihoodDraw> draws, const MatrixXd& Y, const MatrixXd& X,
              const SpectralBasis& spectral) {
  if (draws.empty()) throw InvalidArgument("DIC needs at least one draw");
  LikelihoodDraw mean{MatrixXd::Zero(draws[0].B.rows(), draws[0].B.cols()),
                      MatrixXd::Zero(draws[0].S_I.rows(), draws[0].S_I.cols()),
                      MatrixXd::Zero(draws[0].S_W.rows(), draws[0].S_W.cols())};
  double total = 0.0;
  for (const auto& d : draws) {
    total += kronecker_log_likelihood(d, Y, X, spectral);
    mean.B += d.B;
    mean.S_I += d.S_I;
    mean.S_W += d.S_W;
  }
  const double count = static_cast<double>(draws.size());
  mean.B /= count;
  mean.S_I /= count;
  mean.S_W /= count;
  DicResult r;
  r.mean_log_lik = total / count;
  r.log_lik_at_mean = kronecker_log_likelihood(mean, Y, X, spectral);
  r.p_d = 2.0 * (r.log_lik_at_mean - r.mean_log_lik);
  r.dic = -2.0 * r.log_lik_at_mean + 2.0 * r.p_d;
  if (!std::isfinite(r.dic)) throw NumericalError("DIC is not finite");
  return r;
}

}  // namespace mbym2
