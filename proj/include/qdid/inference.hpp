#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "qdid/empirical.hpp"
#include "qdid/estimators.hpp"
#include "qdid/rng.hpp"

namespace qdid {

enum class BootstrapScheme { multinomial, dirichlet };

inline const char* to_string(BootstrapScheme s) {
  return s == BootstrapScheme::multinomial ? "multinomial" : "dirichlet";
}

inline BootstrapScheme parse_scheme(const std::string& name) {
  if (name == "multinomial") return BootstrapScheme::multinomial;
  if (name == "dirichlet") return BootstrapScheme::dirichlet;
  throw std::invalid_argument("unknown bootstrap scheme '" + name + "'");
}

struct BootstrapConfig {
  BootstrapScheme scheme = BootstrapScheme::multinomial;
  std::size_t iterations = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("bootstrap iterations must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  }
};

/// Runs body(i) for i in [0, count) on up to `threads` threads. Work is
/// split into contiguous blocks; body must only write to slot i.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = count * w / workers;
    const std::size_t end = count * (w + 1) / workers;
    pool.emplace_back([begin, end, &body] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
}

/// Exchangeable weights for one arm of size n, summing to n.
/// multinomial: counts of n uniform draws over n units (empirical bootstrap).
/// dirichlet: n * E_i / sum(E), E_i ~ Exp(1) (Bayesian bootstrap).
inline std::vector<double> draw_weights(std::size_t n, BootstrapScheme scheme, Rng& rng) {
  std::vector<double> w(n, 0.0);
  if (n == 0) return w;
  if (scheme == BootstrapScheme::multinomial) {
    for (std::size_t k = 0; k < n; ++k) w[rng.index(n)] += 1.0;
    return w;
  }
  double total = 0.0;
  for (auto& x : w) {
    x = rng.exponential();
    total += x;
  }
  const double scale = static_cast<double>(n) / total;
  for (auto& x : w) x *= scale;
  return w;
}

/// Control and treated arms are drawn independently, control first.
inline PanelWeights draw_weights(const PanelCellData& cell, BootstrapScheme scheme, Rng& rng) {
  PanelWeights w;
  w.control = draw_weights(cell.control_pre.size(), scheme, rng);
  w.treated = draw_weights(cell.treated_pre.size(), scheme, rng);
  return w;
}

inline RcsWeights draw_weights(const RcsCellData& cell, BootstrapScheme scheme, Rng& rng) {
  RcsWeights w;
  w.control_pre = draw_weights(cell.control_pre.size(), scheme, rng);
  w.control_post = draw_weights(cell.control_post.size(), scheme, rng);
  w.treated_pre = draw_weights(cell.treated_pre.size(), scheme, rng);
  w.treated_post = draw_weights(cell.treated_post.size(), scheme, rng);
  return w;
}

/// Bootstrap replicates of a process on a fixed tau grid; draws[b][k].
struct BootstrapDraws {
  std::vector<double> taus;
  std::vector<std::vector<double>> draws;
  std::size_t iterations() const { return draws.size(); }
};

/// Generic bootstrap driver. Draw b gets its own Rng keyed by
/// (seed, tag, stream, b), so results do not depend on thread count.
template <class Replicate>
BootstrapDraws run_bootstrap(std::span<const double> taus, const BootstrapConfig& config,
                             StreamTag tag, std::uint64_t stream, Replicate&& replicate) {
  config.validate();
  BootstrapDraws out;
  out.taus.assign(taus.begin(), taus.end());
  out.draws.resize(config.iterations);
  parallel_for(config.iterations, config.threads, [&](std::size_t b) {
    Rng rng(config.seed, tag, {stream, static_cast<std::uint64_t>(b)});
    out.draws[b] = replicate(rng);
  });
  return out;
}

inline BootstrapDraws bootstrap_process(const PanelCellData& cell, std::span<const double> taus,
                                        const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  check_tau_grid(taus);
  return run_bootstrap(taus, config, StreamTag::bootstrap, cell_index, [&](Rng& rng) {
    const auto w = draw_weights(cell, config.scheme, rng);
    const auto r = counterfactual_cdf_panel(cell, &w);
    return quantile_difference(r.treated, r.counterfactual, taus);
  });
}

inline BootstrapDraws bootstrap_process(const RcsCellData& cell, std::span<const double> taus,
                                        const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  check_tau_grid(taus);
  return run_bootstrap(taus, config, StreamTag::bootstrap, cell_index, [&](Rng& rng) {
    const auto w = draw_weights(cell, config.scheme, rng);
    const auto r = counterfactual_cdf_rcs(cell, &w);
    return quantile_difference(r.treated, r.counterfactual, taus);
  });
}

inline BootstrapDraws bootstrap_cic(const PanelCellData& cell, std::span<const double> taus,
                                    const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  check_tau_grid(taus);
  return run_bootstrap(taus, config, StreamTag::bootstrap, cell_index, [&](Rng& rng) {
    const auto w = draw_weights(cell, config.scheme, rng);
    return cic_panel_values(cell, taus, &w);
  });
}

inline BootstrapDraws bootstrap_cic(const RcsCellData& cell, std::span<const double> taus,
                                    const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  check_tau_grid(taus);
  return run_bootstrap(taus, config, StreamTag::bootstrap, cell_index, [&](Rng& rng) {
    const auto w = draw_weights(cell, config.scheme, rng);
    return cic_rcs_values(cell, taus, &w);
  });
}

/// Unconditional QTT bootstrap: every cell is reweighted with the same
/// substream it would use on its own, then the mixture is re-inverted.
template <class CellData>
BootstrapDraws bootstrap_unconditional(std::span<const CellData> cells, std::span<const double> shares,
                                       std::span<const double> taus, const BootstrapConfig& config) {
  check_tau_grid(taus);
  config.validate();
  BootstrapDraws out;
  out.taus.assign(taus.begin(), taus.end());
  out.draws.resize(config.iterations);
  parallel_for(config.iterations, config.threads, [&](std::size_t b) {
    std::vector<CounterfactualResult> results;
    results.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      Rng rng(config.seed, StreamTag::bootstrap, {c, static_cast<std::uint64_t>(b)});
      const auto w = draw_weights(cells[c], config.scheme, rng);
      if constexpr (std::is_same_v<CellData, PanelCellData>) {
        results.push_back(counterfactual_cdf_panel(cells[c], &w));
      } else {
        results.push_back(counterfactual_cdf_rcs(cells[c], &w));
      }
    }
    out.draws[b] = unconditional_qtt(results, shares, taus).values;
  });
  return out;
}

struct KsResult {
  double statistic = 0.0;
  double critical_value = 0.0;
  bool reject = false;
};

namespace detail {

inline double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline void check_draws(std::span<const double> estimate, const BootstrapDraws& draws) {
  if (draws.draws.empty()) throw std::invalid_argument("at least one bootstrap draw is required");
  for (const auto& d : draws.draws) {
    if (d.size() != estimate.size()) {
      throw std::invalid_argument("bootstrap draw length differs from the estimate grid");
    }
  }
}

}  // namespace detail

/// Sup-norm over the grid of each recentered draw, sqrt(n) * max_k |draw_k - estimate_k|.
inline std::vector<double> bootstrap_sup_stats(std::span<const double> estimate,
                                               const BootstrapDraws& draws, std::size_t n) {
  detail::check_draws(estimate, draws);
  const double root_n = std::sqrt(static_cast<double>(n));
  std::vector<double> sups;
  sups.reserve(draws.iterations());
  for (const auto& d : draws.draws) {
    double m = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) m = std::max(m, std::abs(d[k] - estimate[k]));
    sups.push_back(root_n * m);
  }
  return sups;
}

/// KS test of a zero effect over the grid. The critical value is the
/// generalized-inverse (1 - alpha) quantile of the recentered bootstrap
/// sup statistics. Rejection is decided as max|estimate| > c / sqrt(n),
/// the same comparison the uniform band uses.
inline KsResult ks_test(std::span<const double> estimate, const BootstrapDraws& draws, std::size_t n,
                        double alpha) {
  if (n == 0) throw std::invalid_argument("ks_test: n must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("ks_test: alpha must lie in (0, 1)");
  const auto sups = bootstrap_sup_stats(estimate, draws, n);
  const double root_n = std::sqrt(static_cast<double>(n));
  KsResult r;
  const double max_abs = detail::sup_abs(estimate);
  r.statistic = root_n * max_abs;
  r.critical_value = StepDistribution::fit(sups).quantile(1.0 - alpha);
  r.reject = max_abs > r.critical_value / root_n;
  return r;
}

struct UniformBand {
  std::vector<double> lower;
  std::vector<double> upper;
  double half_width = 0.0;

  bool excludes_zero() const {
    for (std::size_t k = 0; k < lower.size(); ++k) {
      if (lower[k] > 0.0 || upper[k] < 0.0) return true;
    }
    return false;
  }
};

inline UniformBand uniform_band(std::span<const double> estimate, double critical_value,
                                std::size_t n) {
  if (!(critical_value >= 0.0)) throw std::invalid_argument("uniform_band: negative critical value");
  if (n == 0) throw std::invalid_argument("uniform_band: n must be positive");
  UniformBand band;
  band.half_width = critical_value / std::sqrt(static_cast<double>(n));
  band.lower.reserve(estimate.size());
  band.upper.reserve(estimate.size());
  for (double v : estimate) {
    band.lower.push_back(v - band.half_width);
    band.upper.push_back(v + band.half_width);
  }
  return band;
}

/// Sample standard deviation (divisor B - 1) of the draws at each tau.
inline std::vector<double> pointwise_se(const BootstrapDraws& draws) {
  const std::size_t b = draws.iterations();
  if (b < 2) throw std::invalid_argument("pointwise_se: need at least two bootstrap draws");
  const std::size_t g = draws.draws.front().size();
  std::vector<double> se(g, 0.0);
  for (std::size_t k = 0; k < g; ++k) {
    double mean = 0.0;
    for (const auto& d : draws.draws) mean += d[k];
    mean /= static_cast<double>(b);
    double ss = 0.0;
    for (const auto& d : draws.draws) ss += (d[k] - mean) * (d[k] - mean);
    se[k] = std::sqrt(ss / static_cast<double>(b - 1));
  }
  return se;
}

/// Pointwise test of estimate(tau) == null_value at each tau, with the
/// (1 - alpha) quantile of |draw - estimate| as critical value.
inline std::vector<bool> pointwise_test(std::span<const double> estimate, const BootstrapDraws& draws,
                                        double alpha, double null_value = 0.0) {
  detail::check_draws(estimate, draws);
  std::vector<bool> reject(estimate.size());
  std::vector<double> dev(draws.iterations());
  for (std::size_t k = 0; k < estimate.size(); ++k) {
    for (std::size_t b = 0; b < dev.size(); ++b) dev[b] = std::abs(draws.draws[b][k] - estimate[k]);
    const double crit = StepDistribution::fit(dev).quantile(1.0 - alpha);
    reject[k] = std::abs(estimate[k] - null_value) > crit;
  }
  return reject;
}

struct InferenceReport {
  CqttProcess process;
  KsResult ks;
  UniformBand band;
  std::vector<double> se;  // empty when fewer than two draws
  BootstrapConfig config;
};

inline InferenceReport summarize(CqttProcess process, const BootstrapDraws& draws,
                                 const BootstrapConfig& config) {
  InferenceReport report;
  report.ks = ks_test(process.values, draws, process.n, config.alpha);
  report.band = uniform_band(process.values, report.ks.critical_value, process.n);
  if (draws.iterations() >= 2) report.se = pointwise_se(draws);
  report.process = std::move(process);
  report.config = config;
  return report;
}

inline InferenceReport infer_cell(const PanelCellData& cell, std::span<const double> taus,
                                  const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  auto process = cqtt(counterfactual_cdf_panel(cell), taus);
  return summarize(std::move(process), bootstrap_process(cell, taus, config, cell_index), config);
}

inline InferenceReport infer_cell(const RcsCellData& cell, std::span<const double> taus,
                                  const BootstrapConfig& config, std::uint64_t cell_index = 0) {
  auto process = cqtt(counterfactual_cdf_rcs(cell), taus);
  return summarize(std::move(process), bootstrap_process(cell, taus, config, cell_index), config);
}

}  // namespace qdid
