#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qdid/simulation.hpp"

using namespace qdid;

namespace {

struct Moments {
  double mean_pre = 0.0, mean_change = 0.0, cov = 0.0;
};

Moments arm_moments(const PanelDataset& data, bool treated) {
  std::vector<double> pre, change;
  for (const auto& u : data.units) {
    if (u.treated != treated) continue;
    pre.push_back(u.y_pre);
    change.push_back(u.y_post - u.y_pre);
  }
  Moments m;
  const double n = static_cast<double>(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) {
    m.mean_pre += pre[i] / n;
    m.mean_change += change[i] / n;
  }
  for (std::size_t i = 0; i < pre.size(); ++i) {
    m.cov += (pre[i] - m.mean_pre) * (change[i] - m.mean_change) / (n - 1);
  }
  return m;
}

McConfig small_mc(std::size_t reps, bool with_bootstrap) {
  McConfig cfg;
  cfg.dgp.n_per_arm = 50;
  cfg.reps = reps;
  cfg.seed = 17;
  if (with_bootstrap) {
    BootstrapConfig boot;
    boot.iterations = 20;
    cfg.inference = boot;
  }
  return cfg;
}

}  // namespace

TEST(Dgp1, ShapeAndMoments) {
  DgpSpec spec;
  spec.n_per_arm = 50000;
  spec.te = 1.0;
  Rng rng(1, StreamTag::simulation, {0});
  const auto data = simulate_dgp1(spec, rng);
  ASSERT_EQ(data.units.size(), 100000u);
  EXPECT_FALSE(data.units.front().treated);
  EXPECT_TRUE(data.units.back().treated);

  const auto c = arm_moments(data, false);
  const auto t = arm_moments(data, true);
  // E[y_pre | d] = 1 + d, E[dy | d] = TE * d, Var(y_pre | d) = 2
  EXPECT_NEAR(c.mean_pre, 1.0, 0.02);
  EXPECT_NEAR(t.mean_pre, 2.0, 0.02);
  EXPECT_NEAR(c.mean_change, 0.0, 0.02);
  EXPECT_NEAR(t.mean_change, 1.0, 0.02);
  // Cov(y_pre, dy) = -Var(eps_pre) = -1
  EXPECT_NEAR(c.cov, -1.0, 0.03);
}

TEST(Dgp2, CovarianceIdentity) {
  for (double rho : {0.0, 0.5}) {
    DgpSpec spec;
    spec.variant = DgpVariant::dgp2;
    spec.n_per_arm = 50000;
    spec.rho_bar = rho;
    Rng rng(2, StreamTag::simulation, {0});
    const auto data = simulate(spec, rng);
    EXPECT_NEAR(arm_moments(data, false).cov, dgp2_outcome_covariance(spec, 0), 0.03) << rho;
    EXPECT_NEAR(arm_moments(data, true).cov, dgp2_outcome_covariance(spec, 1), 0.03) << rho;
  }
}

TEST(Dgp2, IdentityArithmetic) {
  DgpSpec spec;
  spec.variant = DgpVariant::dgp2;
  spec.rho_bar = 0.5;
  EXPECT_DOUBLE_EQ(dgp2_outcome_covariance(spec, 0), 0.0);
  EXPECT_DOUBLE_EQ(dgp2_outcome_covariance(spec, 1), -0.5);
  spec.violation_arm = ViolationArm::treated;
  EXPECT_DOUBLE_EQ(dgp2_outcome_covariance(spec, 0), -0.5);
  EXPECT_DOUBLE_EQ(dgp2_outcome_covariance(spec, 1), 0.0);
}

TEST(Dgp2, ArmsCoincideWithoutViolation) {
  DgpSpec spec;
  spec.variant = DgpVariant::dgp2;
  EXPECT_EQ(dgp2_covariance_matrix(spec, 0), dgp2_covariance_matrix(spec, 1));
}

TEST(Dgp2, RejectsNonPositiveDefiniteCovariance) {
  DgpSpec spec;
  spec.variant = DgpVariant::dgp2;
  spec.rho_bar = 0.9;
  Rng rng(3, StreamTag::simulation, {0});
  EXPECT_THROW(simulate(spec, rng), std::invalid_argument);
}

TEST(Cholesky, ReproducesMatrix) {
  DgpSpec spec;
  spec.variant = DgpVariant::dgp2;
  spec.rho_bar = 0.5;
  const auto m = dgp2_covariance_matrix(spec, 0);
  const auto l = cholesky(m);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += l[i][k] * l[j][k];
      EXPECT_NEAR(s, m[i][j], 1e-14);
    }
  }
}

TEST(MonteCarlo, SingleRepIsSingleDrawError) {
  auto cfg = small_mc(1, true);
  const auto result = run_mc(cfg);
  const auto rep = run_replication(cfg, 0);
  for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
    for (std::size_t k = 0; k < cfg.taus.size(); ++k) {
      const auto& row = result.at(cfg.estimators[e], cfg.taus[k]);
      EXPECT_EQ(row.bias, rep.estimates[e][k] - cfg.dgp.te);
      EXPECT_EQ(row.rmse, std::abs(row.bias));
      ASSERT_TRUE(row.rejection.has_value());
      EXPECT_TRUE(*row.rejection == 0.0 || *row.rejection == 1.0);
    }
  }
}

TEST(MonteCarlo, ReproducibleAndThreadIndependent) {
  auto cfg = small_mc(12, true);
  const auto a = run_mc(cfg);
  const auto b = run_mc(cfg);
  cfg.threads = 3;
  const auto c = run_mc(cfg);
  ASSERT_EQ(a.rows.size(), c.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].bias, b.rows[i].bias);
    EXPECT_EQ(a.rows[i].bias, c.rows[i].bias);
    EXPECT_EQ(a.rows[i].rmse, c.rows[i].rmse);
    EXPECT_EQ(a.rows[i].rejection, c.rows[i].rejection);
  }
}

TEST(MonteCarlo, RmseDominatesBias) {
  for (double te : {0.0, 1.0}) {
    auto cfg = small_mc(30, false);
    cfg.dgp.te = te;
    for (const auto& row : run_mc(cfg).rows) {
      EXPECT_GE(row.rmse, std::abs(row.bias));
      EXPECT_FALSE(row.rejection.has_value());
    }
  }
}

TEST(MonteCarlo, BiasShrinksWithSampleSizeUnderParallelTrends) {
  const std::vector<std::size_t> sizes = {50, 800};
  std::vector<double> worst;
  for (std::size_t n : sizes) {
    McConfig cfg;
    cfg.dgp.variant = DgpVariant::dgp2;
    cfg.dgp.n_per_arm = n;
    cfg.reps = 200;
    cfg.estimators = {McEstimator::ddid};
    cfg.seed = 5;
    double m = 0.0;
    for (const auto& row : run_mc(cfg).rows) m = std::max(m, std::abs(row.bias));
    worst.push_back(m);
  }
  // Monte Carlo noise at 200 reps of N = 800 is about 0.01
  EXPECT_LT(worst[1], worst[0] + 0.02);
  EXPECT_LT(worst[1], 0.05);
}

TEST(MonteCarlo, RejectsBadConfig) {
  McConfig cfg;
  cfg.reps = 0;
  EXPECT_THROW(run_mc(cfg), std::invalid_argument);
  cfg.reps = 1;
  cfg.estimators.clear();
  EXPECT_THROW(run_mc(cfg), std::invalid_argument);
}
