// qdid: quantile treatment effects on the treated for two-period
// difference-in-differences designs.
//
//   qdid estimate --input data.csv --covariates race,sex --out report.json
//   qdid mc --dgp 1 --n 100,200,500 --te 0 --reps 1000 --out mc_dgp1.csv
//   qdid simulate --dgp 1 --n 500 --te 1 --out draw.csv

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qdid/qdid.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitValidation = 2;
constexpr int kExitInfeasible = 3;

std::vector<double> parse_tau_spec(const std::string& spec) {
  // "lo:hi:step" or a comma-separated list
  if (spec.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(std::stod(item));
    if (parts.size() != 3) throw std::invalid_argument("tau grid must be lo:hi:step");
    return qdid::tau_grid(parts[0], parts[1], parts[2]);
  }
  std::vector<double> taus;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) taus.push_back(std::stod(item));
  qdid::check_tau_grid(taus);
  return taus;
}

std::vector<qdid::McEstimator> parse_estimators(const std::vector<std::string>& names) {
  std::vector<qdid::McEstimator> out;
  for (const auto& n : names) {
    if (n == "ddid") {
      out.push_back(qdid::McEstimator::ddid);
    } else if (n == "cic") {
      out.push_back(qdid::McEstimator::cic);
    } else {
      throw std::invalid_argument("unknown estimator '" + n + "' (expected ddid or cic)");
    }
  }
  return out;
}

template <class Writer>
void write_to(const std::string& path, Writer&& writer) {
  if (path.empty() || path == "-") {
    writer(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  writer(out);
}

struct EstimateOptions {
  qdid::RunConfig config;
  std::string tau_spec = "0.05:0.95:0.01";
  std::vector<std::string> estimators = {"ddid"};
  std::string mode = "panel";
  std::string scheme = "multinomial";
  std::string format = "json";
  std::string out;
  std::string summary;
  std::string bands;
};

int run_estimate(EstimateOptions& o) {
  auto& c = o.config;
  c.schema.mode = o.mode == "rcs" ? qdid::DesignMode::rcs : qdid::DesignMode::panel;
  c.taus = parse_tau_spec(o.tau_spec);
  c.estimators = parse_estimators(o.estimators);
  c.bootstrap.scheme = qdid::parse_scheme(o.scheme);
  c.format = o.format == "csv" ? qdid::OutputFormat::csv : qdid::OutputFormat::json;

  const auto run = qdid::run_estimation(c);
  write_to(o.out, [&](std::ostream& os) {
    if (c.format == qdid::OutputFormat::json) {
      os << qdid::report_json(run).dump(2) << '\n';
    } else {
      qdid::write_report_csv(os, run);
    }
  });
  if (!o.summary.empty()) write_to(o.summary, [&](std::ostream& os) { qdid::write_summary_csv(os, run); });
  if (!o.bands.empty()) write_to(o.bands, [&](std::ostream& os) { qdid::write_bands_csv(os, run); });
  for (const auto& cell : run.skipped) {
    std::cerr << "skipped cell " << qdid::format_codes(cell.codes) << ": " << qdid::to_string(cell.status)
              << '\n';
  }
  return kExitOk;
}

struct DgpOptions {
  int dgp = 1;
  std::vector<std::size_t> n = {200};
  std::vector<double> te = {0.0};
  std::vector<double> rho = {0.0};
  std::string violation_arm = "control";
  std::uint64_t seed = 0;
};

qdid::DgpSpec make_spec(const DgpOptions& o, std::size_t n, double te, double rho) {
  if (o.dgp != 1 && o.dgp != 2) throw std::invalid_argument("--dgp must be 1 or 2");
  if (o.violation_arm != "control" && o.violation_arm != "treated") {
    throw std::invalid_argument("--violation-arm must be control or treated");
  }
  qdid::DgpSpec spec;
  spec.variant = o.dgp == 1 ? qdid::DgpVariant::dgp1 : qdid::DgpVariant::dgp2;
  spec.n_per_arm = n;
  spec.te = te;
  spec.rho_bar = rho;
  spec.violation_arm =
      o.violation_arm == "treated" ? qdid::ViolationArm::treated : qdid::ViolationArm::control;
  if (spec.variant == qdid::DgpVariant::dgp2) {
    qdid::cholesky(qdid::dgp2_covariance_matrix(spec, 0));
    qdid::cholesky(qdid::dgp2_covariance_matrix(spec, 1));
  }
  return spec;
}

struct McOptions {
  DgpOptions dgp;
  std::size_t reps = 100;
  std::size_t bootstrap = 200;
  double alpha = 0.05;
  std::string taus = "0.1,0.5,0.9";
  std::vector<std::string> estimators = {"ddid", "cic"};
  unsigned threads = 1;
  std::string out;
};

int run_mc_command(const McOptions& o) {
  const bool by_rho = o.dgp.dgp == 2;
  auto configure = [&](std::size_t n, double te, double rho) {
    qdid::McConfig cfg;
    cfg.dgp = make_spec(o.dgp, n, te, rho);
    cfg.reps = o.reps;
    cfg.taus = parse_tau_spec(o.taus);
    cfg.estimators = parse_estimators(o.estimators);
    cfg.seed = o.dgp.seed;
    cfg.threads = o.threads;
    if (o.bootstrap > 0) {
      qdid::BootstrapConfig boot;
      boot.iterations = o.bootstrap;
      boot.alpha = o.alpha;
      cfg.inference = boot;
    }
    return cfg;
  };

  std::vector<qdid::McTableEntry> entries;
  for (double te : o.dgp.te) {
    for (std::size_t n : o.dgp.n) {
      if (by_rho) {
        for (double rho : o.dgp.rho) entries.push_back({rho, qdid::run_mc(configure(n, te, rho))});
      } else {
        entries.push_back({static_cast<double>(n), qdid::run_mc(configure(n, te, 0.0))});
      }
    }
  }
  write_to(o.out, [&](std::ostream& os) { qdid::write_mc_table(os, by_rho ? "rho_bar" : "n", entries); });
  return kExitOk;
}

int run_simulate(const DgpOptions& o, const std::string& out) {
  const auto spec = make_spec(o, o.n.front(), o.te.front(), o.rho.front());
  qdid::Rng rng(o.seed, qdid::StreamTag::simulation, {0});
  const auto data = qdid::simulate(spec, rng);
  write_to(out, [&](std::ostream& os) { qdid::write_panel_csv(os, data); });
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile treatment effects on the treated in difference-in-differences designs"};
  app.require_subcommand(1);

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Estimate CQTT processes with bootstrap inference");
  estimate->add_option("--input,-i", est.config.input, "Long-format CSV (one row per unit and period)")
      ->required();
  estimate->add_option("--mode", est.mode, "panel or rcs")->check(CLI::IsMember({"panel", "rcs"}));
  estimate->add_option("--id-col", est.config.schema.id_column);
  estimate->add_option("--period-col", est.config.schema.period_column);
  estimate->add_option("--outcome-col", est.config.schema.outcome_column);
  estimate->add_option("--treatment-col", est.config.schema.treatment_column);
  estimate->add_option("--covariates", est.config.schema.covariate_columns, "Discrete covariate columns")
      ->delimiter(',');
  estimate->add_option("--taus", est.tau_spec, "lo:hi:step or comma list");
  estimate->add_option("--bootstrap,-B", est.config.bootstrap.iterations, "Bootstrap iterations")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--alpha", est.config.bootstrap.alpha)->check(CLI::Range(0.0, 1.0));
  estimate->add_option("--seed", est.config.bootstrap.seed);
  estimate->add_option("--scheme", est.scheme)->check(CLI::IsMember({"multinomial", "dirichlet"}));
  estimate->add_option("--estimators", est.estimators, "ddid,cic")->delimiter(',');
  estimate->add_flag("--unconditional", est.config.unconditional, "Also estimate the unconditional QTT");
  estimate->add_option("--format", est.format)->check(CLI::IsMember({"json", "csv"}));
  estimate->add_option("--out,-o", est.out, "Output path (default stdout)");
  estimate->add_option("--summary", est.summary, "Per-cell summary CSV at tau 0.1/0.5/0.9");
  estimate->add_option("--bands", est.bands, "Plot-ready band CSV");
  estimate->add_option("--min-cell-size", est.config.min_cell_size)->check(CLI::PositiveNumber);
  estimate->add_option("--threads", est.config.bootstrap.threads);

  McOptions mc;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo bias / RMSE / rejection tables");
  mc_cmd->add_option("--dgp", mc.dgp.dgp)->check(CLI::IsMember({1, 2}));
  mc_cmd->add_option("--n", mc.dgp.n, "Observations per arm")->delimiter(',');
  mc_cmd->add_option("--te", mc.dgp.te)->delimiter(',');
  mc_cmd->add_option("--rho", mc.dgp.rho, "DGP 2 rho_bar values")->delimiter(',');
  mc_cmd->add_option("--violation-arm", mc.dgp.violation_arm, "DGP 2 arm with rho_bar");
  mc_cmd->add_option("--reps", mc.reps)->check(CLI::PositiveNumber);
  mc_cmd->add_option("--bootstrap,-B", mc.bootstrap, "Bootstrap iterations per rep (0: bias/RMSE only)");
  mc_cmd->add_option("--alpha", mc.alpha)->check(CLI::Range(0.0, 1.0));
  mc_cmd->add_option("--taus", mc.taus);
  mc_cmd->add_option("--estimators", mc.estimators)->delimiter(',');
  mc_cmd->add_option("--seed", mc.dgp.seed);
  mc_cmd->add_option("--threads", mc.threads);
  mc_cmd->add_option("--out,-o", mc.out);

  DgpOptions sim;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Write one DGP draw as long-format panel CSV");
  sim_cmd->add_option("--dgp", sim.dgp)->check(CLI::IsMember({1, 2}));
  sim_cmd->add_option("--n", sim.n, "Observations per arm")->expected(1);
  sim_cmd->add_option("--te", sim.te)->expected(1);
  sim_cmd->add_option("--rho", sim.rho)->expected(1);
  sim_cmd->add_option("--violation-arm", sim.violation_arm);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--out,-o", sim_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*estimate) return run_estimate(est);
    if (*mc_cmd) return run_mc_command(mc);
    if (*sim_cmd) return run_simulate(sim, sim_out);
  } catch (const qdid::ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const qdid::CsvError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const qdid::InfeasibleError& e) {
    std::cerr << "estimation infeasible: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
