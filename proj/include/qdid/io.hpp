#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qdid/data_model.hpp"

namespace qdid {

enum class DesignMode { panel, rcs };

inline const char* to_string(DesignMode m) { return m == DesignMode::panel ? "panel" : "rcs"; }

/// Column mapping for long-format input: one row per (unit, period).
struct CsvSchema {
  DesignMode mode = DesignMode::panel;
  std::string id_column = "id";
  std::string period_column = "period";
  std::string outcome_column = "y";
  std::string treatment_column = "d";
  std::vector<std::string> covariate_columns;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based file line of each row

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Splits one record. Supports quoted fields with doubled quotes; records
/// spanning several lines are not supported.
inline std::vector<std::string> split_csv_record(std::string_view line, std::size_t line_number) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !was_quoted) {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      field += c;
    }
  }
  if (quoted) throw CsvError("line " + std::to_string(line_number) + ": unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto fields = split_csv_record(line, line_number);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw CsvError("line " + std::to_string(line_number) + ": expected " +
                     std::to_string(table.header.size()) + " fields, found " +
                     std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_number);
  }
  if (!have_header) throw CsvError("empty CSV input: no header row");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("cannot open '" + path + "'");
  return read_csv(in);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_real(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_integer(std::string_view token) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) return std::nullopt;
  return value;
}

/// Accepts integer-valued reals such as "1.0" as well as plain integers.
inline std::optional<long long> parse_code(std::string_view token) {
  if (auto i = parse_integer(token)) return i;
  if (auto r = parse_real(token); r && std::floor(*r) == *r && std::abs(*r) < 9e15) {
    return static_cast<long long>(*r);
  }
  return std::nullopt;
}

struct ParsedRow {
  std::string id;
  int period = 0;
  double y = 0.0;
  bool treated = false;
  CovariateVector covariates;
};

}  // namespace detail

/// Parses a long-format table. Panel mode pivots to one unit per id and
/// requires exactly one pre (period 0) and one post (period 1) row per unit.
/// A panel unit is treated when its post-period row has d = 1.
inline std::variant<PanelDataset, RcsDataset> load_table(const CsvTable& table, const CsvSchema& schema) {
  std::vector<ValidationIssue> issues;
  auto require = [&](const std::string& name) -> std::size_t {
    auto c = table.column(name);
    if (!c) throw CsvError("missing column '" + name + "'");
    return *c;
  };
  const auto period_col = require(schema.period_column);
  const auto outcome_col = require(schema.outcome_column);
  const auto treatment_col = require(schema.treatment_column);
  std::optional<std::size_t> id_col = table.column(schema.id_column);
  if (schema.mode == DesignMode::panel && !id_col) {
    throw CsvError("missing column '" + schema.id_column + "' (required in panel mode)");
  }
  std::vector<std::size_t> covariate_cols;
  for (const auto& name : schema.covariate_columns) covariate_cols.push_back(require(name));

  std::vector<detail::ParsedRow> parsed;
  std::vector<std::size_t> parsed_lines;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    detail::ParsedRow p;
    bool ok = true;
    if (id_col) p.id = std::string(detail::trim(row[*id_col]));
    if (auto y = detail::parse_real(row[outcome_col])) {
      p.y = *y;
    } else {
      issues.push_back({line, "outcome '" + row[outcome_col] + "' is not a finite number"});
      ok = false;
    }
    auto period = detail::parse_code(row[period_col]);
    if (!period || (*period != 0 && *period != 1)) {
      issues.push_back({line, "period '" + row[period_col] + "' must be 0 or 1"});
      ok = false;
    } else {
      p.period = static_cast<int>(*period);
    }
    auto d = detail::parse_code(row[treatment_col]);
    if (!d || (*d != 0 && *d != 1)) {
      issues.push_back({line, "treatment '" + row[treatment_col] + "' must be 0 or 1"});
      ok = false;
    } else {
      p.treated = *d == 1;
    }
    for (std::size_t k = 0; k < covariate_cols.size(); ++k) {
      const auto& token = row[covariate_cols[k]];
      if (auto code = detail::parse_code(token)) {
        p.covariates.push_back(*code);
      } else {
        issues.push_back({line, "covariate '" + schema.covariate_columns[k] + "' value '" + token +
                                    "' is not an integer category code"});
        ok = false;
      }
    }
    if (ok) {
      parsed.push_back(std::move(p));
      parsed_lines.push_back(line);
    }
  }

  if (schema.mode == DesignMode::rcs) {
    RcsDataset data;
    data.covariate_names = schema.covariate_columns;
    for (auto& p : parsed) {
      data.observations.push_back(
          {p.id, p.y, p.period == 1 ? Period::post : Period::pre, p.treated, std::move(p.covariates)});
    }
    auto report = validate(data);
    for (auto& issue : report.issues) {
      issue.row = issue.row < parsed_lines.size() ? parsed_lines[issue.row] : issue.row;
      issues.push_back(issue);
    }
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return data;
  }

  struct Slot {
    std::optional<std::size_t> pre;
    std::optional<std::size_t> post;
    std::size_t rows = 0;
  };
  std::map<std::string, Slot> slots;
  std::vector<std::string> order;
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    auto [it, inserted] = slots.try_emplace(parsed[i].id);
    if (inserted) order.push_back(parsed[i].id);
    auto& slot = it->second;
    ++slot.rows;
    (parsed[i].period == 0 ? slot.pre : slot.post) = i;
  }

  PanelDataset data;
  data.covariate_names = schema.covariate_columns;
  for (const auto& id : order) {
    const auto& slot = slots[id];
    if (slot.rows != 2 || !slot.pre || !slot.post) {
      const std::size_t any = slot.pre ? *slot.pre : *slot.post;
      issues.push_back({parsed_lines[any], "unit '" + id + "' has " + std::to_string(slot.rows) +
                                               " row(s); panel mode needs one per period"});
      continue;
    }
    const auto& pre = parsed[*slot.pre];
    const auto& post = parsed[*slot.post];
    if (pre.treated && !post.treated) {
      issues.push_back({parsed_lines[*slot.pre], "unit '" + id + "' is treated before but not after"});
      continue;
    }
    if (pre.covariates != post.covariates) {
      issues.push_back({parsed_lines[*slot.post], "unit '" + id + "' changes covariates across periods"});
      continue;
    }
    data.units.push_back({id, pre.y, post.y, post.treated, pre.covariates});
  }
  if (issues.empty()) {
    auto report = validate(data);
    for (auto& issue : report.issues) issues.push_back(issue);
  }
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return data;
}

inline std::variant<PanelDataset, RcsDataset> load_csv(const std::string& path, const CsvSchema& schema) {
  return load_table(read_csv_file(path), schema);
}

/// RFC-4180 quoting for fields containing separators or quotes.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_real(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

/// Long-format panel CSV (id, period, y, d, covariates...), the inverse of load_table.
inline void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  out << "id,period,y,d";
  for (const auto& name : data.covariate_names) out << ',' << csv_field(name);
  out << '\n';
  for (const auto& u : data.units) {
    for (int period = 0; period <= 1; ++period) {
      out << csv_field(u.unit_id) << ',' << period << ','
          << format_real(period == 0 ? u.y_pre : u.y_post) << ','
          << (u.treated ? 1 : 0);
      for (auto c : u.covariates) out << ',' << c;
      out << '\n';
    }
  }
}

}  // namespace qdid
