#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "csma/adaptive.hpp"
#include "csma/errors.hpp"
#include "csma/optimizer.hpp"

using namespace csma;

TEST(Penalty, ThreeBranches) {
  EXPECT_DOUBLE_EQ(penalty(-0.3, 0.0, 3.5), 0.3);
  EXPECT_DOUBLE_EQ(penalty(1.0, 0.0, 3.5), 0.0);
  EXPECT_DOUBLE_EQ(penalty(0.0, 0.0, 3.5), 0.0);
  EXPECT_DOUBLE_EQ(penalty(4.5, 0.0, 3.5), -1.0);
}

TEST(Schedule, Values) {
  const auto h = StepSchedule::harmonic(0.23, 2, 100);
  EXPECT_NEAR(h(1), 0.23 / 2.01, 1e-15);
  EXPECT_NEAR(h(200), 0.23 / 4.0, 1e-15);
  EXPECT_TRUE(h.decreasing());
  EXPECT_DOUBLE_EQ(StepSchedule::reciprocal()(4), 0.25);
  EXPECT_DOUBLE_EQ(StepSchedule::constant(0.1)(1000), 0.1);
  EXPECT_THROW(StepSchedule::harmonic(3.0, 2, 100), ConfigError);
  EXPECT_THROW(StepSchedule::harmonic(0.1, -0.5, 100), ConfigError);
  EXPECT_THROW(StepSchedule::constant(0.0), ConfigError);
}

TEST(Update, ZeroDriftAndUnitPush) {
  ControllerConfig cfg;
  const std::vector<double> r{1.0, 2.0};
  const std::vector<double> same{0.3, 0.4};
  EXPECT_EQ(update(r, same, same, 0.5, cfg), r);
  const std::vector<double> one{1.0, 1.0}, zero{0.0, 0.0};
  const auto next = update(r, one, zero, 0.1, cfg);
  EXPECT_NEAR(next[0], 1.1, 1e-15);
  EXPECT_NEAR(next[1], 2.1, 1e-15);
  cfg.delta = 0.05;
  EXPECT_NEAR(update(r, same, same, 1.0, cfg)[0], 1.05, 1e-15);
}

TEST(Update, RejectsBadInputs) {
  ControllerConfig cfg;
  const std::vector<double> r{1.0}, two{0.1, 0.1};
  EXPECT_THROW(update(r, two, r, 0.1, cfg), DimensionError);
  EXPECT_THROW(update(r, r, r, 0.0, cfg), DomainError);
  EXPECT_THROW(update(r, r, r, 1.5, cfg), DomainError);
}

TEST(Update, AdversarialInputsStayBounded) {
  // Empirical rates are anywhere in [0, 1]; steps are at most one.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& sched : {StepSchedule::harmonic(1.0, 1.0, 1.0), StepSchedule::constant(1.0),
                            StepSchedule::reciprocal(), StepSchedule::harmonic(0.23, 2, 100)}) {
    ControllerConfig cfg;
    cfg.schedule = sched;
    std::vector<double> r{cfg.r_min, cfg.r_max, 1.0};
    for (std::int64_t i = 1; i <= 20000; ++i) {
      std::vector<double> lam(3), s(3);
      for (int k = 0; k < 3; ++k) {
        // Long stretches pushing one way, then the other.
        const bool up = (i / 500) % 2 == 0;
        lam[k] = up ? 1.0 : u(rng) * 0.1;
        s[k] = up ? u(rng) * 0.1 : 1.0;
      }
      r = update(r, lam, s, cfg.schedule(i), cfg);
      for (double v : r) {
        ASSERT_GE(v, cfg.lower_bound()) << sched.describe();
        ASSERT_LE(v, cfg.upper_bound()) << sched.describe();
      }
    }
  }
}

TEST(Controller, ConfigValidation) {
  ControllerConfig cfg;
  cfg.r_min = 2.0;
  cfg.r_max = 1.0;
  EXPECT_THROW(cfg.validate(1), ConfigError);
  cfg = ControllerConfig{};
  cfg.delta = -0.1;
  EXPECT_THROW(cfg.validate(1), ConfigError);
  cfg = ControllerConfig{};
  cfg.r0 = std::vector<double>{0.0, 0.0};
  EXPECT_THROW(cfg.validate(1), DimensionError);
  cfg = ControllerConfig{};
  cfg.r_min = 1.0;
  EXPECT_EQ(cfg.initial_r(2), (std::vector<double>{1.0, 1.0}));
}

TEST(Adaptive, SingleLinkConvergesToLogTwo) {
  SimConfig sim;
  sim.graph = topology::complete(1);
  sim.params = ProtocolParams::uniform(1, 1.0 / 16, 5, 10, 15.0);
  sim.lambda = {6.0 / 11.0};
  ControllerConfig ctl;
  // Shorter runs track their own arrival sample rather than 6/11.
  ctl.periods = 80000;
  ctl.record_every = 100;
  ctl.tail_periods = 20000;
  const auto res = run_adaptive(sim, ctl);
  EXPECT_NEAR(res.trajectory.tail_mean_r[0], std::log(2.0), 0.05);
  EXPECT_TRUE(res.trajectory.within_bounds);
  EXPECT_EQ(res.trajectory.records.size(), 800u);
  EXPECT_EQ(res.metrics.n_slots, 80000 * ctl.M);
}

TEST(Adaptive, DeltaServesMoreThanArrivals) {
  SimConfig sim;
  sim.graph = topology::complete(2);
  sim.params = ProtocolParams::uniform(2, 1.0 / 16, 5, 10, 15.0);
  sim.lambda = {0.2, 0.25};
  ControllerConfig ctl;
  ctl.delta = 0.02;
  ctl.periods = 20000;
  ctl.tail_periods = 10000;
  const auto res = run_adaptive(sim, ctl);
  for (int k = 0; k < 2; ++k) {
    EXPECT_GT(res.trajectory.tail_mean_service[k], sim.lambda[k]) << k;
    EXPECT_NEAR(res.trajectory.tail_mean_service[k], sim.lambda[k] + ctl.delta, 0.01) << k;
  }
}

TEST(MeanField, ConstantStepReachesRStar) {
  const auto g = topology::path(3);
  const auto params = ProtocolParams::uniform(3, 1.0 / 16, 5, 10, 15.0);
  const std::vector<double> lam{0.3, 0.2, 0.3};
  const ProductForm pf(g, params);
  ControllerConfig ctl;
  ctl.schedule = StepSchedule::constant(1.0);
  ctl.r_min = -3.0;
  ctl.r_max = 5.0;
  const auto mf = mean_field_iteration(pf, lam, ctl, 20000, 1e-12);
  const auto rs = solve_rstar(g, params, lam);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(mf.r[k], rs.r_star[k], 1e-6);
  EXPECT_LT(mf.iterations, 20000);
}
