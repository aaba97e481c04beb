#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdid/data_model.hpp"
#include "qdid/empirical.hpp"

namespace qdid {

/// Outcome samples of one covariate cell in a two-period panel.
struct PanelCellData {
  CovariateVector codes;
  std::vector<double> control_pre;
  std::vector<double> control_change;  // y_post - y_pre per control unit
  std::vector<double> treated_pre;
  std::vector<double> treated_post;
};

/// Outcome samples of one covariate cell from repeated cross sections.
struct RcsCellData {
  CovariateVector codes;
  std::vector<double> control_pre;
  std::vector<double> control_post;
  std::vector<double> treated_pre;
  std::vector<double> treated_post;
};

/// Per-unit resampling weights for a panel cell.
struct PanelWeights {
  std::vector<double> control;
  std::vector<double> treated;
};

/// Per-observation resampling weights for the four RCS samples.
struct RcsWeights {
  std::vector<double> control_pre;
  std::vector<double> control_post;
  std::vector<double> treated_pre;
  std::vector<double> treated_post;
};

struct CounterfactualResult {
  CovariateVector codes;
  StepDistribution treated;         // observed treated post-period outcomes
  StepDistribution counterfactual;  // untreated potential outcomes of the treated
  std::vector<double> transformed;  // one imputed outcome per control (pre-period) unit
  std::size_t n_control = 0;
  std::size_t n_treated = 0;
};

struct CqttProcess {
  CovariateVector codes;
  std::vector<double> taus;
  std::vector<double> values;
  std::size_t n_control = 0;
  std::size_t n_treated = 0;
  std::size_t n = 0;  // sample size behind the sqrt(n) scaling
};

inline PanelCellData extract_cell(const PanelDataset& data, const CovariateCell& cell) {
  PanelCellData out;
  out.codes = cell.codes;
  for (std::size_t r : cell.control_rows) {
    const auto& u = data.units[r];
    out.control_pre.push_back(u.y_pre);
    out.control_change.push_back(u.y_post - u.y_pre);
  }
  for (std::size_t r : cell.treated_rows) {
    const auto& u = data.units[r];
    out.treated_pre.push_back(u.y_pre);
    out.treated_post.push_back(u.y_post);
  }
  return out;
}

inline RcsCellData extract_cell(const RcsDataset& data, const CovariateCell& cell) {
  RcsCellData out;
  out.codes = cell.codes;
  for (std::size_t r : cell.control_rows) {
    const auto& o = data.observations[r];
    (o.period == Period::pre ? out.control_pre : out.control_post).push_back(o.y);
  }
  for (std::size_t r : cell.treated_rows) {
    const auto& o = data.observations[r];
    (o.period == Period::pre ? out.treated_pre : out.treated_post).push_back(o.y);
  }
  return out;
}

/// Evenly spaced grid lo, lo+step, ..., hi. Points are snapped to 12 decimals
/// so that e.g. 0.29 is the same double as 29.0/100.
inline std::vector<double> tau_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo > 0.0) || !(hi < 1.0) || lo > hi) {
    throw std::invalid_argument("tau_grid: need 0 < lo <= hi < 1 and step > 0");
  }
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid;
  grid.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    grid.push_back(std::round((lo + static_cast<double>(k) * step) * 1e12) / 1e12);
  }
  return grid;
}

inline void check_tau_grid(std::span<const double> taus) {
  if (taus.empty()) throw std::invalid_argument("tau grid is empty");
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (!(taus[k] > 0.0 && taus[k] < 1.0)) {
      throw std::invalid_argument("tau grid points must lie in (0, 1)");
    }
    if (k > 0 && !(taus[k] > taus[k - 1])) {
      throw std::invalid_argument("tau grid must be strictly increasing");
    }
  }
}

namespace detail {

inline std::optional<std::span<const double>> maybe(const std::vector<double>* w) {
  if (w == nullptr) return std::nullopt;
  return std::span<const double>(*w);
}

inline void require_nonempty(std::span<const double> sample, const char* what) {
  if (sample.empty()) {
    throw std::invalid_argument(std::string("undersized cell: empty ") + what + " sample");
  }
}

}  // namespace detail

/// Counterfactual distribution of untreated outcomes for the treated group,
/// panel case: each control unit's change is added to the treated
/// pre-period outcome at the same rank,
///   Y~_i = dY_i + F^{-1}_{pre|treated}(F_{pre|control}(Y_{i,pre})).
/// When weights are given they enter every empirical CDF in the composition.
inline CounterfactualResult counterfactual_cdf_panel(const PanelCellData& cell,
                                                     const PanelWeights* weights = nullptr) {
  detail::require_nonempty(cell.control_pre, "control");
  detail::require_nonempty(cell.treated_pre, "treated");
  if (cell.control_change.size() != cell.control_pre.size() ||
      cell.treated_post.size() != cell.treated_pre.size()) {
    throw std::invalid_argument("counterfactual_cdf_panel: unbalanced panel samples");
  }
  const std::vector<double>* wc = weights ? &weights->control : nullptr;
  const std::vector<double>* wt = weights ? &weights->treated : nullptr;

  const auto control_pre = StepDistribution::fit(cell.control_pre, detail::maybe(wc));
  const auto treated_pre = StepDistribution::fit(cell.treated_pre, detail::maybe(wt));

  CounterfactualResult out;
  out.codes = cell.codes;
  out.transformed.resize(cell.control_pre.size());
  for (std::size_t i = 0; i < cell.control_pre.size(); ++i) {
    out.transformed[i] =
        cell.control_change[i] + rank_transform(control_pre, treated_pre, cell.control_pre[i]);
  }
  out.counterfactual = StepDistribution::fit(out.transformed, detail::maybe(wc));
  out.treated = StepDistribution::fit(cell.treated_post, detail::maybe(wt));
  out.n_control = cell.control_pre.size();
  out.n_treated = cell.treated_pre.size();
  return out;
}

/// Repeated cross sections under rank invariance: the control change of a
/// pre-period control unit is imputed by matching its rank in the
/// post-period control sample.
inline CounterfactualResult counterfactual_cdf_rcs(const RcsCellData& cell,
                                                   const RcsWeights* weights = nullptr) {
  detail::require_nonempty(cell.control_pre, "control pre-period");
  detail::require_nonempty(cell.control_post, "control post-period");
  detail::require_nonempty(cell.treated_pre, "treated pre-period");
  detail::require_nonempty(cell.treated_post, "treated post-period");

  const auto control_pre =
      StepDistribution::fit(cell.control_pre, detail::maybe(weights ? &weights->control_pre : nullptr));
  const auto control_post = StepDistribution::fit(
      cell.control_post, detail::maybe(weights ? &weights->control_post : nullptr));
  const auto treated_pre =
      StepDistribution::fit(cell.treated_pre, detail::maybe(weights ? &weights->treated_pre : nullptr));

  CounterfactualResult out;
  out.codes = cell.codes;
  out.transformed.resize(cell.control_pre.size());
  for (std::size_t i = 0; i < cell.control_pre.size(); ++i) {
    const double y = cell.control_pre[i];
    const double change = rank_transform(control_pre, control_post, y) - y;
    out.transformed[i] = change + rank_transform(control_pre, treated_pre, y);
  }
  out.counterfactual = StepDistribution::fit(
      out.transformed, detail::maybe(weights ? &weights->control_pre : nullptr));
  out.treated = StepDistribution::fit(
      cell.treated_post, detail::maybe(weights ? &weights->treated_post : nullptr));
  out.n_control = cell.control_pre.size() + cell.control_post.size();
  out.n_treated = cell.treated_pre.size() + cell.treated_post.size();
  return out;
}

inline std::vector<double> quantile_difference(const StepDistribution& treated,
                                               const StepDistribution& counterfactual,
                                               std::span<const double> taus) {
  std::vector<double> values(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    values[k] = treated.quantile(taus[k]) - counterfactual.quantile(taus[k]);
  }
  return values;
}

inline CqttProcess cqtt(const CounterfactualResult& result, std::span<const double> taus) {
  check_tau_grid(taus);
  CqttProcess p;
  p.codes = result.codes;
  p.taus.assign(taus.begin(), taus.end());
  p.values = quantile_difference(result.treated, result.counterfactual, taus);
  p.n_control = result.n_control;
  p.n_treated = result.n_treated;
  p.n = result.n_control + result.n_treated;
  return p;
}

/// Treated-group covariate shares n_x^(1) / sum_x n_x^(1).
inline std::vector<double> treated_shares(std::span<const CounterfactualResult> results) {
  double total = 0.0;
  for (const auto& r : results) total += static_cast<double>(r.n_treated);
  std::vector<double> shares;
  shares.reserve(results.size());
  for (const auto& r : results) shares.push_back(static_cast<double>(r.n_treated) / total);
  return shares;
}

/// QTT on the treated population: both treated and counterfactual CDFs are
/// averaged over cells with the given shares before inversion.
inline CqttProcess unconditional_qtt(std::span<const CounterfactualResult> results,
                                     std::span<const double> shares,
                                     std::span<const double> taus) {
  if (results.empty()) throw std::invalid_argument("unconditional_qtt: no cells");
  if (shares.size() != results.size()) {
    throw std::invalid_argument("unconditional_qtt: one share per cell is required");
  }
  check_tau_grid(taus);
  std::vector<StepDistribution> treated;
  std::vector<StepDistribution> counterfactual;
  CqttProcess p;
  for (const auto& r : results) {
    treated.push_back(r.treated);
    counterfactual.push_back(r.counterfactual);
    p.n_control += r.n_control;
    p.n_treated += r.n_treated;
  }
  const auto mix1 = StepDistribution::mixture(treated, shares);
  const auto mix0 = StepDistribution::mixture(counterfactual, shares);
  p.taus.assign(taus.begin(), taus.end());
  p.values = quantile_difference(mix1, mix0, taus);
  p.n = p.n_control + p.n_treated;
  return p;
}

/// Changes-in-changes QTT values: the treated pre-period quantile is pushed
/// through the control group's period-to-period quantile map.
inline std::vector<double> cic_values(const StepDistribution& control_pre,
                                      const StepDistribution& control_post,
                                      const StepDistribution& treated_pre,
                                      const StepDistribution& treated_post,
                                      std::span<const double> taus) {
  std::vector<double> values(taus.size());
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double counterfactual =
        rank_transform(control_pre, control_post, treated_pre.quantile(taus[k]));
    values[k] = treated_post.quantile(taus[k]) - counterfactual;
  }
  return values;
}

/// CIC on a panel cell; the control post-period sample is pre + change.
inline std::vector<double> cic_panel_values(const PanelCellData& cell, std::span<const double> taus,
                                            const PanelWeights* weights = nullptr) {
  detail::require_nonempty(cell.control_pre, "control");
  detail::require_nonempty(cell.treated_pre, "treated");
  std::vector<double> control_post(cell.control_pre.size());
  for (std::size_t i = 0; i < control_post.size(); ++i) {
    control_post[i] = cell.control_pre[i] + cell.control_change[i];
  }
  const auto wc = detail::maybe(weights ? &weights->control : nullptr);
  const auto wt = detail::maybe(weights ? &weights->treated : nullptr);
  return cic_values(StepDistribution::fit(cell.control_pre, wc), StepDistribution::fit(control_post, wc),
                    StepDistribution::fit(cell.treated_pre, wt),
                    StepDistribution::fit(cell.treated_post, wt), taus);
}

inline std::vector<double> cic_rcs_values(const RcsCellData& cell, std::span<const double> taus,
                                          const RcsWeights* weights = nullptr) {
  detail::require_nonempty(cell.control_pre, "control pre-period");
  detail::require_nonempty(cell.control_post, "control post-period");
  detail::require_nonempty(cell.treated_pre, "treated pre-period");
  detail::require_nonempty(cell.treated_post, "treated post-period");
  return cic_values(
      StepDistribution::fit(cell.control_pre, detail::maybe(weights ? &weights->control_pre : nullptr)),
      StepDistribution::fit(cell.control_post, detail::maybe(weights ? &weights->control_post : nullptr)),
      StepDistribution::fit(cell.treated_pre, detail::maybe(weights ? &weights->treated_pre : nullptr)),
      StepDistribution::fit(cell.treated_post, detail::maybe(weights ? &weights->treated_post : nullptr)),
      taus);
}

inline CqttProcess cic_qtt(std::span<const double> control_pre, std::span<const double> control_post,
                           std::span<const double> treated_pre, std::span<const double> treated_post,
                           std::span<const double> taus) {
  check_tau_grid(taus);
  detail::require_nonempty(control_pre, "control pre-period");
  detail::require_nonempty(control_post, "control post-period");
  detail::require_nonempty(treated_pre, "treated pre-period");
  detail::require_nonempty(treated_post, "treated post-period");
  CqttProcess p;
  p.taus.assign(taus.begin(), taus.end());
  p.values = cic_values(StepDistribution::fit(control_pre), StepDistribution::fit(control_post),
                        StepDistribution::fit(treated_pre), StepDistribution::fit(treated_post),
                        taus);
  p.n_control = control_pre.size();
  p.n_treated = treated_pre.size();
  p.n = p.n_control + p.n_treated;
  return p;
}

}  // namespace qdid
