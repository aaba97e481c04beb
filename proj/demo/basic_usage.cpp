// Estimate the QTT on one simulated DGP 1 draw and print a few quantiles
// with the KS decision.

#include <cstdio>

#include "qdid/qdid.hpp"

int main() {
  qdid::DgpSpec spec;
  spec.n_per_arm = 500;
  spec.te = 1.0;
  qdid::Rng rng(2024, qdid::StreamTag::simulation, {0});
  const auto data = qdid::simulate_dgp1(spec, rng);

  const auto cells = qdid::build_cells(data);
  const auto cell = qdid::extract_cell(data, cells.front());
  const auto taus = qdid::tau_grid(0.05, 0.95, 0.01);

  qdid::BootstrapConfig boot;
  boot.iterations = 500;
  boot.seed = 7;
  const auto report = qdid::infer_cell(cell, taus, boot);

  std::printf("KS = %.3f, critical value = %.3f, reject = %s\n", report.ks.statistic,
              report.ks.critical_value, report.ks.reject ? "yes" : "no");
  for (double q : {0.1, 0.5, 0.9}) {
    for (std::size_t k = 0; k < taus.size(); ++k) {
      if (std::abs(taus[k] - q) > 1e-9) continue;
      std::printf("tau %.2f: %.3f (se %.3f) band [%.3f, %.3f]\n", q, report.process.values[k],
                  report.se[k], report.band.lower[k], report.band.upper[k]);
    }
  }
}
