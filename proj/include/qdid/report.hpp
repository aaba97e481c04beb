#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qdid/data_model.hpp"
#include "qdid/estimators.hpp"
#include "qdid/inference.hpp"
#include "qdid/io.hpp"
#include "qdid/simulation.hpp"

namespace qdid {

inline constexpr const char* kReportSchema = "qdid.report.v1";

enum class OutputFormat { json, csv };

struct RunConfig {
  CsvSchema schema;
  std::string input;
  std::vector<double> taus = tau_grid(0.05, 0.95, 0.01);
  BootstrapConfig bootstrap;
  std::vector<McEstimator> estimators = {McEstimator::ddid};
  bool unconditional = false;
  OutputFormat format = OutputFormat::json;
  std::size_t min_cell_size = 2;
};

/// Raised when no covariate cell has enough observations to estimate.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CellReport {
  McEstimator estimator = McEstimator::ddid;
  InferenceReport report;
};

struct EstimationRun {
  RunConfig config;
  std::vector<CellReport> cells;          // cell-code order, then estimator order
  std::vector<CovariateCell> skipped;     // flagged cells, not estimated
  std::optional<InferenceReport> unconditional;
};

namespace detail {

// Stream ids: DDID draws for cell c use stream c (shared with the
// unconditional bootstrap), CIC draws use c + 2^32.
inline constexpr std::uint64_t kCicStreamOffset = std::uint64_t{1} << 32;

template <class Dataset>
EstimationRun estimate_dataset(const RunConfig& config, const Dataset& data) {
  using CellData = decltype(extract_cell(data, std::declval<const CovariateCell&>()));
  check_tau_grid(config.taus);
  config.bootstrap.validate();
  require_valid(data);

  EstimationRun run;
  run.config = config;
  std::vector<CellData> viable;
  for (const auto& cell : build_cells(data, config.min_cell_size)) {
    if (cell.viable()) {
      viable.push_back(extract_cell(data, cell));
    } else {
      run.skipped.push_back(cell);
    }
  }
  if (viable.empty()) {
    throw InfeasibleError("no covariate cell has at least " + std::to_string(config.min_cell_size) +
                          " observations in every treatment arm and period");
  }

  std::vector<CounterfactualResult> results;
  for (std::size_t c = 0; c < viable.size(); ++c) {
    const auto& cell = viable[c];
    CounterfactualResult result;
    if constexpr (std::is_same_v<CellData, PanelCellData>) {
      result = counterfactual_cdf_panel(cell);
    } else {
      result = counterfactual_cdf_rcs(cell);
    }
    for (auto estimator : config.estimators) {
      CellReport cr;
      cr.estimator = estimator;
      if (estimator == McEstimator::ddid) {
        cr.report = summarize(cqtt(result, config.taus),
                              bootstrap_process(cell, config.taus, config.bootstrap, c), config.bootstrap);
      } else {
        CqttProcess p;
        p.codes = cell.codes;
        p.taus = config.taus;
        if constexpr (std::is_same_v<CellData, PanelCellData>) {
          p.values = cic_panel_values(cell, config.taus);
        } else {
          p.values = cic_rcs_values(cell, config.taus);
        }
        p.n_control = result.n_control;
        p.n_treated = result.n_treated;
        p.n = p.n_control + p.n_treated;
        cr.report = summarize(std::move(p),
                              bootstrap_cic(cell, config.taus, config.bootstrap, c + kCicStreamOffset),
                              config.bootstrap);
      }
      run.cells.push_back(std::move(cr));
    }
    results.push_back(std::move(result));
  }

  if (config.unconditional) {
    const auto shares = treated_shares(results);
    auto process = unconditional_qtt(results, shares, config.taus);
    auto draws = bootstrap_unconditional<CellData>(viable, shares, config.taus, config.bootstrap);
    run.unconditional = summarize(std::move(process), draws, config.bootstrap);
  }
  return run;
}

}  // namespace detail

/// Per-cell CQTT with KS test, uniform band and pointwise SEs, plus the
/// optional unconditional QTT. Throws ValidationError or InfeasibleError.
inline EstimationRun run_estimation(const RunConfig& config,
                                    const std::variant<PanelDataset, RcsDataset>& data) {
  return std::visit([&](const auto& d) { return detail::estimate_dataset(config, d); }, data);
}

inline EstimationRun run_estimation(const RunConfig& config) {
  return run_estimation(config, load_csv(config.input, config.schema));
}

inline nlohmann::json config_json(const RunConfig& c) {
  nlohmann::json j;
  j["mode"] = to_string(c.schema.mode);
  j["input"] = c.input;
  j["columns"] = {{"id", c.schema.id_column},
                  {"period", c.schema.period_column},
                  {"outcome", c.schema.outcome_column},
                  {"treatment", c.schema.treatment_column}};
  j["covariates"] = c.schema.covariate_columns;
  j["taus"] = c.taus;
  j["bootstrap"] = {{"scheme", to_string(c.bootstrap.scheme)},
                    {"iterations", c.bootstrap.iterations},
                    {"alpha", c.bootstrap.alpha},
                    {"seed", c.bootstrap.seed}};
  std::vector<std::string> estimators;
  for (auto e : c.estimators) estimators.emplace_back(to_string(e));
  j["estimators"] = estimators;
  j["unconditional"] = c.unconditional;
  j["min_cell_size"] = c.min_cell_size;
  j["sup_over"] = "grid";
  return j;
}

namespace detail {

inline nlohmann::json process_json(const InferenceReport& r) {
  nlohmann::json j;
  j["codes"] = r.process.codes;
  j["cell"] = format_codes(r.process.codes);
  j["n_control"] = r.process.n_control;
  j["n_treated"] = r.process.n_treated;
  j["n"] = r.process.n;
  j["ks"] = {{"statistic", r.ks.statistic},
             {"critical_value", r.ks.critical_value},
             {"reject", r.ks.reject}};
  j["band_half_width"] = r.band.half_width;
  j["tau"] = r.process.taus;
  j["estimate"] = r.process.values;
  if (r.se.empty()) {
    j["se"] = nullptr;
  } else {
    j["se"] = r.se;
  }
  j["lower"] = r.band.lower;
  j["upper"] = r.band.upper;
  return j;
}

}  // namespace detail

inline nlohmann::json report_json(const EstimationRun& run) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["config"] = config_json(run.config);
  j["cells"] = nlohmann::json::array();
  for (const auto& cell : run.cells) {
    auto c = detail::process_json(cell.report);
    c["estimator"] = to_string(cell.estimator);
    j["cells"].push_back(std::move(c));
  }
  j["skipped_cells"] = nlohmann::json::array();
  for (const auto& cell : run.skipped) {
    j["skipped_cells"].push_back({{"codes", cell.codes},
                                  {"cell", format_codes(cell.codes)},
                                  {"status", to_string(cell.status)},
                                  {"n_control", cell.n_control()},
                                  {"n_treated", cell.n_treated()}});
  }
  if (run.unconditional) {
    auto u = detail::process_json(*run.unconditional);
    u["estimator"] = "ddid";
    j["unconditional"] = std::move(u);
  } else {
    j["unconditional"] = nullptr;
  }
  return j;
}

/// One row per (estimator, cell, tau); the unconditional QTT uses cell "unconditional".
inline void write_report_csv(std::ostream& out, const EstimationRun& run) {
  out << "estimator,cell,tau,estimate,se,lower,upper,ks_statistic,critical_value,reject,n\n";
  auto emit = [&](const std::string& estimator, const std::string& cell, const InferenceReport& r) {
    for (std::size_t k = 0; k < r.process.taus.size(); ++k) {
      out << estimator << ',' << csv_field(cell) << ',' << format_real(r.process.taus[k]) << ','
          << format_real(r.process.values[k]) << ',' << (r.se.empty() ? "" : format_real(r.se[k]))
          << ',' << format_real(r.band.lower[k]) << ',' << format_real(r.band.upper[k]) << ','
          << format_real(r.ks.statistic) << ',' << format_real(r.ks.critical_value) << ','
          << (r.ks.reject ? 1 : 0) << ',' << r.process.n << '\n';
    }
  };
  for (const auto& cell : run.cells) {
    emit(to_string(cell.estimator), format_codes(cell.report.process.codes), cell.report);
  }
  if (run.unconditional) emit("ddid", "unconditional", *run.unconditional);
}

/// Plot-ready band data: (tau, estimate, lower, upper) per cell.
inline void write_bands_csv(std::ostream& out, const EstimationRun& run) {
  out << "estimator,cell,tau,estimate,lower,upper\n";
  auto emit = [&](const std::string& estimator, const std::string& cell, const InferenceReport& r) {
    for (std::size_t k = 0; k < r.process.taus.size(); ++k) {
      out << estimator << ',' << csv_field(cell) << ',' << format_real(r.process.taus[k]) << ','
          << format_real(r.process.values[k]) << ',' << format_real(r.band.lower[k]) << ','
          << format_real(r.band.upper[k]) << '\n';
    }
  };
  for (const auto& cell : run.cells) {
    emit(to_string(cell.estimator), format_codes(cell.report.process.codes), cell.report);
  }
  if (run.unconditional) emit("ddid", "unconditional", *run.unconditional);
}

namespace detail {

inline std::optional<std::size_t> grid_index(const std::vector<double>& taus, double tau) {
  for (std::size_t k = 0; k < taus.size(); ++k) {
    if (std::abs(taus[k] - tau) < 1e-9) return k;
  }
  return std::nullopt;
}

}  // namespace detail

/// Subgroup summary: per cell the KS decision plus estimate and SE at a
/// few quantiles. Quantiles not on the grid are left blank.
inline void write_summary_csv(std::ostream& out, const EstimationRun& run,
                              const std::vector<double>& quantiles = {0.1, 0.5, 0.9}) {
  out << "estimator,cell";
  for (const auto& name : run.config.schema.covariate_columns) out << ',' << csv_field(name);
  out << ",n,reject";
  for (double q : quantiles) out << ",est_" << format_real(q) << ",se_" << format_real(q);
  out << '\n';
  auto emit = [&](const std::string& estimator, const std::string& cell, const CovariateVector& codes,
                  const InferenceReport& r) {
    out << estimator << ',' << csv_field(cell);
    for (std::size_t i = 0; i < run.config.schema.covariate_columns.size(); ++i) {
      out << ',';
      if (i < codes.size()) out << codes[i];
    }
    out << ',' << r.process.n << ',' << (r.ks.reject ? "yes" : "no");
    for (double q : quantiles) {
      const auto k = detail::grid_index(r.process.taus, q);
      out << ',' << (k ? format_real(r.process.values[*k]) : "") << ','
          << (k && !r.se.empty() ? format_real(r.se[*k]) : "");
    }
    out << '\n';
  };
  for (const auto& cell : run.cells) {
    emit(to_string(cell.estimator), format_codes(cell.report.process.codes), cell.report.process.codes,
         cell.report);
  }
  if (run.unconditional) emit("ddid", "unconditional", {}, *run.unconditional);
}

/// Monte Carlo table: one row per (te, statistic, design point), one column
/// per (estimator, tau). `key` names the design-point column ("n" or "rho_bar").
struct McTableEntry {
  double key = 0.0;
  McResult result;
};

inline void write_mc_table(std::ostream& out, const std::string& key, const std::vector<McTableEntry>& entries) {
  if (entries.empty()) return;
  const auto& first = entries.front().result.config;
  out << "dgp,te,statistic," << key;
  for (auto e : first.estimators) {
    for (double t : first.taus) out << ',' << to_string(e) << '_' << format_real(t);
  }
  out << ",reps,bootstrap,n_per_arm,violation_arm,seed\n";

  std::vector<double> tes;
  for (const auto& entry : entries) {
    const double te = entry.result.config.dgp.te;
    if (std::find(tes.begin(), tes.end(), te) == tes.end()) tes.push_back(te);
  }
  const bool have_rejection = first.inference.has_value();
  std::vector<std::string> stats = {"bias", "rmse"};
  if (have_rejection) stats.emplace_back("rej_prob");

  for (double te : tes) {
    for (const auto& stat : stats) {
      for (const auto& entry : entries) {
        const auto& r = entry.result;
        if (r.config.dgp.te != te) continue;
        out << (r.config.dgp.variant == DgpVariant::dgp1 ? 1 : 2) << ',' << format_real(te) << ','
            << stat << ',' << format_real(entry.key);
        for (const auto& row : r.rows) {
          double v = stat == "bias" ? row.bias : stat == "rmse" ? row.rmse : row.rejection.value_or(NAN);
          out << ',' << format_real(v);
        }
        out << ',' << r.config.reps << ','
            << (r.config.inference ? r.config.inference->iterations : 0) << ','
            << r.config.dgp.n_per_arm << ','
            << (r.config.dgp.violation_arm == ViolationArm::control ? "control" : "treated") << ','
            << r.config.seed << '\n';
      }
    }
  }
}

}  // namespace qdid
