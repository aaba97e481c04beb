#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "qdid/inference.hpp"
#include "qdid/simulation.hpp"

using namespace qdid;

namespace {

PanelCellData dgp1_cell(std::size_t n, double te, std::uint64_t seed) {
  DgpSpec spec;
  spec.n_per_arm = n;
  spec.te = te;
  Rng rng(seed, StreamTag::simulation, {0});
  const auto data = simulate_dgp1(spec, rng);
  return extract_cell(data, build_cells(data).front());
}

// Both arms drawn from one distribution of (y_pre, y_post).
PanelCellData identical_arms(std::size_t n, Rng& rng) {
  PanelCellData cell;
  for (int d = 0; d < 2; ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = rng.normal();
      const double pre = 1.0 + v + rng.normal();
      const double post = 1.0 + v + rng.normal();
      if (d == 0) {
        cell.control_pre.push_back(pre);
        cell.control_change.push_back(post - pre);
      } else {
        cell.treated_pre.push_back(pre);
        cell.treated_post.push_back(post);
      }
    }
  }
  return cell;
}

BootstrapDraws constant_draws(std::size_t b, std::vector<double> value) {
  BootstrapDraws d;
  d.taus.resize(value.size(), 0.5);
  d.draws.assign(b, value);
  return d;
}

}  // namespace

TEST(DrawWeights, ArmOfOneIsAlwaysOne) {
  Rng rng(1, StreamTag::bootstrap, {0});
  for (int k = 0; k < 100; ++k) {
    EXPECT_EQ(draw_weights(1, BootstrapScheme::multinomial, rng), std::vector<double>{1.0});
    EXPECT_DOUBLE_EQ(draw_weights(1, BootstrapScheme::dirichlet, rng).front(), 1.0);
  }
}

TEST(DrawWeights, MultinomialSumsToArmSize) {
  Rng rng(2, StreamTag::bootstrap, {0});
  for (std::size_t n = 1; n < 50; ++n) {
    const auto w = draw_weights(n, BootstrapScheme::multinomial, rng);
    EXPECT_EQ(std::accumulate(w.begin(), w.end(), 0.0), static_cast<double>(n));
    for (double x : w) EXPECT_EQ(x, std::floor(x));
  }
}

TEST(DrawWeights, DirichletPositiveAndSumsToArmSize) {
  Rng rng(3, StreamTag::bootstrap, {0});
  const auto w = draw_weights(40, BootstrapScheme::dirichlet, rng);
  for (double x : w) EXPECT_GT(x, 0.0);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 40.0, 1e-9);
}

TEST(DrawWeights, MeanWeightIsOne) {
  for (auto scheme : {BootstrapScheme::multinomial, BootstrapScheme::dirichlet}) {
    Rng rng(4, StreamTag::bootstrap, {0});
    std::vector<double> total(5, 0.0);
    for (int b = 0; b < 10000; ++b) {
      const auto w = draw_weights(5, scheme, rng);
      for (std::size_t i = 0; i < 5; ++i) total[i] += w[i];
    }
    for (double t : total) EXPECT_NEAR(t / 10000.0, 1.0, 0.05);
  }
}

TEST(Bootstrap, RerunIsBitIdentical) {
  const auto cell = dgp1_cell(60, 0.0, 5);
  const auto taus = tau_grid(0.1, 0.9, 0.1);
  BootstrapConfig config;
  config.iterations = 1;
  config.seed = 42;
  EXPECT_EQ(bootstrap_process(cell, taus, config).draws, bootstrap_process(cell, taus, config).draws);
  config.iterations = 50;
  EXPECT_EQ(bootstrap_process(cell, taus, config).draws, bootstrap_process(cell, taus, config).draws);
  auto other = config;
  other.seed = 43;
  EXPECT_NE(bootstrap_process(cell, taus, config).draws, bootstrap_process(cell, taus, other).draws);
}

TEST(Bootstrap, ThreadCountDoesNotChangeDraws) {
  const auto cell = dgp1_cell(60, 0.5, 6);
  const auto taus = tau_grid(0.1, 0.9, 0.1);
  BootstrapConfig config;
  config.iterations = 64;
  config.seed = 9;
  const auto serial = bootstrap_process(cell, taus, config);
  config.threads = 4;
  EXPECT_EQ(bootstrap_process(cell, taus, config).draws, serial.draws);
}

TEST(Bootstrap, DegenerateDataGivesZeroDraws) {
  PanelCellData cell{{}, {3, 3, 3}, {0, 0, 0}, {3, 3, 3, 3}, {3, 3, 3, 3}};
  const auto taus = tau_grid(0.05, 0.95, 0.01);
  BootstrapConfig config;
  config.iterations = 100;
  for (const auto& d : bootstrap_process(cell, taus, config).draws) {
    for (double v : d) EXPECT_EQ(v, 0.0);
  }
}

TEST(Bootstrap, RcsAndCicDraws) {
  const auto taus = tau_grid(0.1, 0.9, 0.1);
  RcsCellData rcs{{}, {1, 2, 3, 4}, {2, 3, 4, 5}, {1, 2, 3}, {2, 3, 4}};
  BootstrapConfig config;
  config.iterations = 20;
  const auto draws = bootstrap_process(rcs, taus, config);
  ASSERT_EQ(draws.iterations(), 20u);
  for (const auto& d : draws.draws) EXPECT_EQ(d.size(), taus.size());
  EXPECT_EQ(bootstrap_cic(rcs, taus, config).iterations(), 20u);
}

TEST(Bootstrap, UnconditionalSingleCellMatchesCellBootstrap) {
  const auto cell = dgp1_cell(40, 0.0, 7);
  const auto taus = tau_grid(0.1, 0.9, 0.1);
  BootstrapConfig config;
  config.iterations = 30;
  const std::vector<PanelCellData> cells = {cell};
  const std::vector<double> shares = {1.0};
  const auto uncond = bootstrap_unconditional<PanelCellData>(cells, shares, taus, config);
  EXPECT_EQ(uncond.draws, bootstrap_process(cell, taus, config, 0).draws);
}

TEST(KsTest, ZeroEstimateNeverRejects) {
  const std::vector<double> est(5, 0.0);
  const auto r = ks_test(est, constant_draws(10, est), 100, 0.05);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_FALSE(r.reject);
}

TEST(KsTest, ConstantOneAtHundred) {
  const std::vector<double> est(7, 1.0);
  const auto r = ks_test(est, constant_draws(10, est), 100, 0.05);
  EXPECT_EQ(r.statistic, 10.0);
  EXPECT_EQ(r.critical_value, 0.0);
  EXPECT_TRUE(r.reject);
}

TEST(KsTest, CriticalValueNonIncreasingInAlpha) {
  const auto cell = dgp1_cell(80, 0.0, 8);
  const auto taus = tau_grid(0.05, 0.95, 0.01);
  BootstrapConfig config;
  config.iterations = 200;
  const auto est = cqtt(counterfactual_cdf_panel(cell), taus);
  const auto draws = bootstrap_process(cell, taus, config);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha = 0.01; alpha < 0.99; alpha += 0.02) {
    const auto r = ks_test(est.values, draws, est.n, alpha);
    EXPECT_GE(r.critical_value, 0.0);
    EXPECT_LE(r.critical_value, prev);
    prev = r.critical_value;
  }
}

TEST(KsTest, InputErrors) {
  const std::vector<double> est(3, 0.0);
  EXPECT_THROW(ks_test(est, constant_draws(0, est), 10, 0.05), std::invalid_argument);
  EXPECT_THROW(ks_test(est, constant_draws(2, {0, 0}), 10, 0.05), std::invalid_argument);
  EXPECT_THROW(ks_test(est, constant_draws(2, est), 10, 1.0), std::invalid_argument);
}

TEST(UniformBand, ZeroCriticalValueCollapses) {
  const std::vector<double> est = {0.5, -1.0, 2.0};
  const auto band = uniform_band(est, 0.0, 50);
  EXPECT_EQ(band.lower, est);
  EXPECT_EQ(band.upper, est);
}

TEST(UniformBand, HalfWidthArithmetic) {
  const std::vector<double> est = {0.0, 1.0};
  const double s = 0.3;
  const auto band = uniform_band(est, 1.96 * std::sqrt(400.0) * s, 400);
  EXPECT_NEAR(band.half_width, 1.96 * s, 1e-15);
  EXPECT_NEAR(band.upper[1] - band.lower[1], 2 * 1.96 * s, 1e-15);
}

TEST(UniformBandProperty, DualityWithKsTest) {
  const auto taus = tau_grid(0.05, 0.95, 0.01);
  std::size_t rejections = 0;
  for (std::uint64_t trial = 0; trial < 40; ++trial) {
    const auto cell = dgp1_cell(30 + 5 * trial, (trial % 3) * 0.25, 100 + trial);
    BootstrapConfig config;
    config.iterations = 100;
    config.seed = trial;
    const auto report = infer_cell(cell, taus, config);
    EXPECT_EQ(report.ks.reject, report.band.excludes_zero());
    rejections += report.ks.reject ? 1 : 0;
  }
  EXPECT_GT(rejections, 0u);
  EXPECT_LT(rejections, 40u);
}

TEST(PointwiseSe, IdenticalDrawsGiveZero) {
  for (double se : pointwise_se(constant_draws(5, {1.0, 2.0}))) EXPECT_EQ(se, 0.0);
}

TEST(PointwiseSe, TwoPointSample) {
  BootstrapDraws d;
  d.taus = {0.5};
  d.draws = {{0.0}, {2.0}};
  EXPECT_DOUBLE_EQ(pointwise_se(d).front(), std::sqrt(2.0));
  d.draws.pop_back();
  EXPECT_THROW(pointwise_se(d), std::invalid_argument);
}

TEST(PointwiseTest, RejectsOnlyOutsideDeviationQuantile) {
  BootstrapDraws d;
  d.taus = {0.3, 0.7};
  for (int b = 0; b < 20; ++b) d.draws.push_back({b * 0.01, 1.0 + b * 0.01});
  const std::vector<double> est = {0.0, 1.0};
  const auto r = pointwise_test(est, d, 0.05);
  EXPECT_FALSE(r[0]);
  EXPECT_TRUE(r[1]);
}

TEST(PointwiseSe, StableAcrossReruns) {
  const auto cell = dgp1_cell(500, 0.0, 11);
  const std::vector<double> taus = {0.5};
  std::vector<double> ses;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BootstrapConfig config;
    config.iterations = 1000;
    config.seed = seed;
    ses.push_back(pointwise_se(bootstrap_process(cell, taus, config)).front());
  }
  const double mean = std::accumulate(ses.begin(), ses.end(), 0.0) / ses.size();
  double ss = 0.0;
  for (double s : ses) ss += (s - mean) * (s - mean);
  const double cv = std::sqrt(ss / (ses.size() - 1)) / mean;
  EXPECT_LT(cv, 0.10);
}

TEST(BootstrapStatistical, SizeOnIdenticalArms) {
  const std::vector<double> taus = {0.1, 0.5, 0.9};
  std::vector<std::size_t> pointwise(taus.size(), 0);
  std::size_t ks = 0;
  const std::size_t reps = 500;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Rng rng(2024, StreamTag::simulation, {rep});
    const auto cell = identical_arms(200, rng);
    BootstrapConfig config;
    config.iterations = 200;
    config.seed = rep;
    const auto est = cqtt(counterfactual_cdf_panel(cell), taus);
    const auto draws = bootstrap_process(cell, taus, config);
    const auto reject = pointwise_test(est.values, draws, 0.05);
    for (std::size_t k = 0; k < taus.size(); ++k) pointwise[k] += reject[k] ? 1 : 0;
    ks += ks_test(est.values, draws, est.n, 0.05).reject ? 1 : 0;
  }
  for (std::size_t k = 0; k < taus.size(); ++k) {
    const double rate = static_cast<double>(pointwise[k]) / reps;
    EXPECT_GE(rate, 0.02) << "tau " << taus[k];
    EXPECT_LE(rate, 0.09) << "tau " << taus[k];
  }
  // The grid-sup test is conservative at this sample size; it must not over-reject.
  EXPECT_LE(static_cast<double>(ks) / reps, 0.09);
}
