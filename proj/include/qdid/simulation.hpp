#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qdid/data_model.hpp"
#include "qdid/estimators.hpp"
#include "qdid/inference.hpp"
#include "qdid/rng.hpp"

namespace qdid {

// Outcome model for both designs:
//   Y_s(d) = mu(d) + theta_s + v_i + eps_is,  theta_s = 1,  mu(0) = 0,  mu(1) = TE.
// Observed: y_pre = Y_pre(0), y_post = Y_post(D).

enum class DgpVariant { dgp1, dgp2 };

/// Which arm carries the v-eps_post correlation rho_bar in DGP 2.
enum class ViolationArm { control, treated };

struct DgpSpec {
  DgpVariant variant = DgpVariant::dgp1;
  std::size_t n_per_arm = 200;
  double te = 0.0;
  // DGP 2 only.
  double rho_bar = 0.0;
  ViolationArm violation_arm = ViolationArm::control;

  static constexpr double theta = 1.0;
  static constexpr double rho_v_pre = 0.0;    // corr(v, eps_pre)
  static constexpr double rho_pre_post = 0.5;  // corr(eps_pre, eps_post)

  /// corr(v, eps_post) for arm d.
  double rho_v_post(int d) const {
    const bool carries = violation_arm == ViolationArm::treated ? d == 1 : d == 0;
    return carries ? rho_bar : 0.0;
  }
};

using Matrix3 = std::array<std::array<double, 3>, 3>;

/// Covariance of (v, eps_post, eps_pre) given D = d in DGP 2.
inline Matrix3 dgp2_covariance_matrix(const DgpSpec& spec, int d) {
  const double a = spec.rho_v_post(d);
  const double b = DgpSpec::rho_v_pre;
  const double c = DgpSpec::rho_pre_post;
  return {{{1.0, a, b}, {a, 1.0, c}, {b, c, 1.0}}};
}

/// Cov(Y_pre(0), dY(0) | D = d) = rho_{v,post} - rho_{v,pre} + rho_{pre,post} - 1.
inline double dgp2_outcome_covariance(const DgpSpec& spec, int d) {
  return spec.rho_v_post(d) - DgpSpec::rho_v_pre + DgpSpec::rho_pre_post - 1.0;
}

/// Lower Cholesky factor; throws if the matrix is not positive definite.
inline Matrix3 cholesky(const Matrix3& m) {
  Matrix3 l{};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      if (i == j) {
        if (!(s > 0.0)) throw std::invalid_argument("covariance matrix is not positive definite");
        l[i][i] = std::sqrt(s);
      } else {
        l[i][j] = s / l[j][j];
      }
    }
  }
  return l;
}

namespace detail {

inline PanelUnit make_unit(std::size_t id, int d, double y_pre, double y_post) {
  PanelUnit u;
  u.unit_id = std::to_string(id);
  u.treated = d == 1;
  u.y_pre = y_pre;
  u.y_post = y_post;
  return u;
}

}  // namespace detail

/// v | D=d ~ N(d, 1), eps_pre and eps_post iid N(0, 1). Controls first.
inline PanelDataset simulate_dgp1(const DgpSpec& spec, Rng& rng) {
  if (spec.variant != DgpVariant::dgp1) throw std::invalid_argument("simulate_dgp1: wrong variant");
  PanelDataset data;
  data.units.reserve(2 * spec.n_per_arm);
  std::size_t id = 0;
  for (int d = 0; d <= 1; ++d) {
    const double mu = d == 1 ? spec.te : 0.0;
    for (std::size_t i = 0; i < spec.n_per_arm; ++i) {
      const double v = static_cast<double>(d) + rng.normal();
      const double eps_pre = rng.normal();
      const double eps_post = rng.normal();
      data.units.push_back(detail::make_unit(id++, d, DgpSpec::theta + v + eps_pre,
                                             mu + DgpSpec::theta + v + eps_post));
    }
  }
  return data;
}

/// (v, eps_post, eps_pre) | D=d ~ N(0, V_d). Controls first.
inline PanelDataset simulate_dgp2(const DgpSpec& spec, Rng& rng) {
  if (spec.variant != DgpVariant::dgp2) throw std::invalid_argument("simulate_dgp2: wrong variant");
  const std::array<Matrix3, 2> factors = {cholesky(dgp2_covariance_matrix(spec, 0)),
                                          cholesky(dgp2_covariance_matrix(spec, 1))};
  PanelDataset data;
  data.units.reserve(2 * spec.n_per_arm);
  std::size_t id = 0;
  for (int d = 0; d <= 1; ++d) {
    const auto& l = factors[static_cast<std::size_t>(d)];
    const double mu = d == 1 ? spec.te : 0.0;
    for (std::size_t i = 0; i < spec.n_per_arm; ++i) {
      const double z0 = rng.normal();
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      const double v = l[0][0] * z0;
      const double eps_post = l[1][0] * z0 + l[1][1] * z1;
      const double eps_pre = l[2][0] * z0 + l[2][1] * z1 + l[2][2] * z2;
      data.units.push_back(detail::make_unit(id++, d, DgpSpec::theta + v + eps_pre,
                                             mu + DgpSpec::theta + v + eps_post));
    }
  }
  return data;
}

inline PanelDataset simulate(const DgpSpec& spec, Rng& rng) {
  return spec.variant == DgpVariant::dgp1 ? simulate_dgp1(spec, rng) : simulate_dgp2(spec, rng);
}

enum class McEstimator { ddid, cic };

inline const char* to_string(McEstimator e) { return e == McEstimator::ddid ? "ddid" : "cic"; }

struct McConfig {
  DgpSpec dgp;
  std::size_t reps = 100;
  std::vector<double> taus = {0.1, 0.5, 0.9};
  std::vector<McEstimator> estimators = {McEstimator::ddid, McEstimator::cic};
  /// Pointwise tests are run only when set.
  std::optional<BootstrapConfig> inference;
  double null_value = 0.0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct McRow {
  McEstimator estimator = McEstimator::ddid;
  double tau = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  std::optional<double> rejection;
};

struct McResult {
  McConfig config;
  std::vector<McRow> rows;  // estimator-major, then tau

  const McRow& at(McEstimator e, double tau) const {
    for (const auto& r : rows) {
      if (r.estimator == e && std::abs(r.tau - tau) < 1e-12) return r;
    }
    throw std::out_of_range("McResult::at: no such row");
  }
};

/// Per-replication estimates; exposed for tests that need the raw draws.
struct McReplication {
  // [estimator][tau]
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<bool>> rejections;
};

inline McReplication run_replication(const McConfig& config, std::size_t rep) {
  Rng rng(config.seed, StreamTag::simulation, {rep});
  const auto data = simulate(config.dgp, rng);
  const auto cells = build_cells(data, 1);
  const auto cell = extract_cell(data, cells.front());

  McReplication out;
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    const auto estimator = config.estimators[e];
    const auto values = estimator == McEstimator::ddid
                            ? cqtt(counterfactual_cdf_panel(cell), config.taus).values
                            : cic_panel_values(cell, config.taus);
    if (config.inference) {
      BootstrapConfig boot = *config.inference;
      boot.seed = config.seed;
      boot.threads = 1;
      const std::uint64_t stream = rep * config.estimators.size() + e;
      auto draws = run_bootstrap(config.taus, boot, StreamTag::mc_bootstrap, stream, [&](Rng& r) {
        const auto w = draw_weights(cell, boot.scheme, r);
        if (estimator == McEstimator::ddid) {
          const auto res = counterfactual_cdf_panel(cell, &w);
          return quantile_difference(res.treated, res.counterfactual, config.taus);
        }
        return cic_panel_values(cell, config.taus, &w);
      });
      out.rejections.push_back(pointwise_test(values, draws, boot.alpha, config.null_value));
    }
    out.estimates.push_back(values);
  }
  return out;
}

/// Monte Carlo bias, RMSE and pointwise rejection frequency per
/// (estimator, tau). Replication r draws data from substream (seed, r), so
/// the result is independent of the thread count.
inline McResult run_mc(const McConfig& config) {
  if (config.reps < 1) throw std::invalid_argument("run_mc: reps must be >= 1");
  check_tau_grid(config.taus);
  if (config.estimators.empty()) throw std::invalid_argument("run_mc: no estimators");
  if (config.inference) config.inference->validate();

  std::vector<McReplication> reps(config.reps);
  parallel_for(config.reps, config.threads, [&](std::size_t r) { reps[r] = run_replication(config, r); });

  McResult result;
  result.config = config;
  const double count = static_cast<double>(config.reps);
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    for (std::size_t k = 0; k < config.taus.size(); ++k) {
      McRow row;
      row.estimator = config.estimators[e];
      row.tau = config.taus[k];
      double sum = 0.0;
      for (const auto& rep : reps) sum += rep.estimates[e][k] - config.dgp.te;
      row.bias = sum / count;
      double ss = 0.0;
      for (const auto& rep : reps) {
        const double dev = rep.estimates[e][k] - config.dgp.te - row.bias;
        ss += dev * dev;
      }
      row.rmse = std::sqrt(row.bias * row.bias + ss / count);
      if (config.inference) {
        std::size_t rejected = 0;
        for (const auto& rep : reps) rejected += rep.rejections[e][k] ? 1 : 0;
        row.rejection = static_cast<double>(rejected) / count;
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

}  // namespace qdid
