#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qdid {

using CovariateCode = std::int64_t;
using CovariateVector = std::vector<CovariateCode>;

enum class Period { pre, post };

/// One unit observed in both periods.
struct PanelUnit {
  std::string unit_id;
  double y_pre = 0.0;
  double y_post = 0.0;
  bool treated = false;
  CovariateVector covariates;
};

/// One observation from a repeated cross section. unit_id may be empty.
struct RcsObservation {
  std::string unit_id;
  double y = 0.0;
  Period period = Period::pre;
  bool treated = false;
  CovariateVector covariates;
};

struct PanelDataset {
  std::vector<std::string> covariate_names;
  std::vector<PanelUnit> units;
  std::size_t size() const { return units.size(); }
};

struct RcsDataset {
  std::vector<std::string> covariate_names;
  std::vector<RcsObservation> observations;
  std::size_t size() const { return observations.size(); }
};

struct ValidationIssue {
  std::size_t row = 0;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool clean() const { return issues.empty(); }
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : std::runtime_error(summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = "dataset failed validation (" + std::to_string(issues.size()) + " issue" +
                      (issues.size() == 1 ? "" : "s") + ")";
    const std::size_t shown = std::min<std::size_t>(issues.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      out += "\n  row " + std::to_string(issues[i].row) + ": " + issues[i].message;
    }
    if (issues.size() > shown) out += "\n  ...";
    return out;
  }

  std::vector<ValidationIssue> issues_;
};

namespace detail {

inline std::size_t expected_arity(std::size_t names, std::size_t first_row) {
  return names > 0 ? names : first_row;
}

}  // namespace detail

inline ValidationReport validate(const PanelDataset& data) {
  ValidationReport report;
  if (data.units.empty()) {
    report.issues.push_back({0, "dataset is empty"});
    return report;
  }
  const std::size_t arity =
      detail::expected_arity(data.covariate_names.size(), data.units.front().covariates.size());
  std::set<std::string> seen;
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    const auto& u = data.units[i];
    if (!std::isfinite(u.y_pre)) report.issues.push_back({i, "non-finite pre-period outcome"});
    if (!std::isfinite(u.y_post)) report.issues.push_back({i, "non-finite post-period outcome"});
    if (u.covariates.size() != arity) {
      report.issues.push_back({i, "covariate arity " + std::to_string(u.covariates.size()) +
                                      ", expected " + std::to_string(arity)});
    }
    if (!u.unit_id.empty() && !seen.insert(u.unit_id).second) {
      report.issues.push_back({i, "duplicate unit '" + u.unit_id + "'"});
    }
  }
  return report;
}

inline ValidationReport validate(const RcsDataset& data) {
  ValidationReport report;
  if (data.observations.empty()) {
    report.issues.push_back({0, "dataset is empty"});
    return report;
  }
  const std::size_t arity = detail::expected_arity(data.covariate_names.size(),
                                                   data.observations.front().covariates.size());
  std::set<std::pair<std::string, Period>> seen;
  for (std::size_t i = 0; i < data.observations.size(); ++i) {
    const auto& o = data.observations[i];
    if (!std::isfinite(o.y)) report.issues.push_back({i, "non-finite outcome"});
    if (o.covariates.size() != arity) {
      report.issues.push_back({i, "covariate arity " + std::to_string(o.covariates.size()) +
                                      ", expected " + std::to_string(arity)});
    }
    if (!o.unit_id.empty() && !seen.insert({o.unit_id, o.period}).second) {
      report.issues.push_back({i, "duplicate (unit, period) for unit '" + o.unit_id + "'"});
    }
  }
  return report;
}

template <class Dataset>
void require_valid(const Dataset& data) {
  auto report = validate(data);
  if (!report.clean()) throw ValidationError(std::move(report.issues));
}

enum class CellStatus { ok, too_few_control, too_few_treated, too_few_both };

inline const char* to_string(CellStatus s) {
  switch (s) {
    case CellStatus::ok: return "ok";
    case CellStatus::too_few_control: return "too_few_control";
    case CellStatus::too_few_treated: return "too_few_treated";
    case CellStatus::too_few_both: return "too_few_both";
  }
  return "unknown";
}

/// Rows sharing one covariate vector, split by treatment arm. For repeated
/// cross sections the arm lists hold rows from both periods; the per-period
/// counts are kept separately so viability can be checked per sample.
struct CovariateCell {
  CovariateVector codes;
  std::vector<std::size_t> treated_rows;
  std::vector<std::size_t> control_rows;
  // Index [d][period]: sizes of the four samples (panel: both periods equal).
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
  CellStatus status = CellStatus::ok;

  std::size_t n_treated() const { return treated_rows.size(); }
  std::size_t n_control() const { return control_rows.size(); }
  std::size_t n() const { return n_treated() + n_control(); }
  bool viable() const { return status == CellStatus::ok; }
};

namespace detail {

inline const CovariateVector& covariates_of(const PanelUnit& u) { return u.covariates; }
inline const CovariateVector& covariates_of(const RcsObservation& o) { return o.covariates; }
inline const std::vector<PanelUnit>& rows_of(const PanelDataset& d) { return d.units; }
inline const std::vector<RcsObservation>& rows_of(const RcsDataset& d) { return d.observations; }

inline void count_row(CovariateCell& cell, const PanelUnit& u) {
  const int d = u.treated ? 1 : 0;
  ++cell.counts[d][0];
  ++cell.counts[d][1];
}

inline void count_row(CovariateCell& cell, const RcsObservation& o) {
  ++cell.counts[o.treated ? 1 : 0][o.period == Period::post ? 1 : 0];
}

}  // namespace detail

/// Partition rows by exact covariate-vector equality, ordered
/// lexicographically by code vector. Cells with fewer than min_cell_size
/// observations in any required sample are kept but flagged.
template <class Dataset>
std::vector<CovariateCell> build_cells(const Dataset& data, std::size_t min_cell_size = 2) {
  std::map<CovariateVector, CovariateCell> by_code;
  const auto& rows = detail::rows_of(data);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    auto& cell = by_code[detail::covariates_of(row)];
    if (row.treated) {
      cell.treated_rows.push_back(i);
    } else {
      cell.control_rows.push_back(i);
    }
    detail::count_row(cell, row);
  }

  std::vector<CovariateCell> cells;
  cells.reserve(by_code.size());
  for (auto& [codes, cell] : by_code) {
    cell.codes = codes;
    const bool control_ok =
        cell.counts[0][0] >= min_cell_size && cell.counts[0][1] >= min_cell_size;
    const bool treated_ok =
        cell.counts[1][0] >= min_cell_size && cell.counts[1][1] >= min_cell_size;
    if (!control_ok && !treated_ok) {
      cell.status = CellStatus::too_few_both;
    } else if (!control_ok) {
      cell.status = CellStatus::too_few_control;
    } else if (!treated_ok) {
      cell.status = CellStatus::too_few_treated;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

inline std::string format_codes(const CovariateVector& codes) {
  std::string out;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (i) out += ':';
    out += std::to_string(codes[i]);
  }
  return out.empty() ? "all" : out;
}

}  // namespace qdid
