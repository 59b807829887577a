#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "csma/errors.hpp"
#include "csma/optimizer.hpp"
#include "csma/simplex.hpp"

using namespace csma;

namespace {

ProtocolParams evaluation_params(int k) { return ProtocolParams::uniform(k, 1.0 / 16, 5, 10, 15.0); }

std::vector<double> seven_link_rates(double rho) {
  std::vector<double> lam;
  for (double v : topology::seven_link_boundary_rates()) lam.push_back(rho * v);
  return lam;
}

// Closed-form r* for one link: solve lambda = p T / (q + p (tau' + T)) for T.
double single_link_rstar(double lambda, double p, int tau, double t0) {
  const double q = 1 - p;
  const double payload = lambda * (q + p * tau) / (p * (1 - lambda));
  return std::log(payload / t0);
}

}  // namespace

TEST(Simplex, SmallLp) {
  // max x + y s.t. x + 2y + s1 = 4, 3x + y + s2 = 6.
  Eigen::MatrixXd a(2, 4);
  a << 1, 2, 1, 0, 3, 1, 0, 1;
  Eigen::VectorXd b(2), c(4);
  b << 4, 6;
  c << 1, 1, 0, 0;
  const auto res = lp::maximize(c, a, b);
  ASSERT_EQ(res.status, lp::Status::kOptimal);
  EXPECT_NEAR(res.objective, 2.8, 1e-12);
  EXPECT_NEAR(res.x[0], 1.6, 1e-12);
  EXPECT_NEAR(res.x[1], 1.2, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
  Eigen::MatrixXd a(2, 1);
  a << 1, 1;
  Eigen::VectorXd b(2), c(1);
  b << 1, 2;
  c << 1;
  EXPECT_EQ(lp::maximize(c, a, b).status, lp::Status::kInfeasible);
  Eigen::MatrixXd a2(1, 2);
  a2 << 1, -1;
  Eigen::VectorXd b2(1), c2(2);
  b2 << 0;
  c2 << 1, 0;
  EXPECT_EQ(lp::maximize(c2, a2, b2).status, lp::Status::kUnbounded);
}

TEST(Feasibility, PathDefinitionExamples) {
  const auto g = topology::path(3);
  const double half[] = {0.5, 0.5, 0.5};
  const auto b = feasibility(g, half);
  EXPECT_EQ(b.status, Feasibility::kBoundary);
  EXPECT_NEAR(b.margin, 0.0, 1e-9);
  const double inner[] = {0.49, 0.49, 0.49};
  const auto s = feasibility(g, inner);
  EXPECT_EQ(s.status, Feasibility::kStrictlyFeasible);
  EXPECT_NEAR(s.margin, 0.01, 1e-9);
  const double outer[] = {0.6, 0.5, 0.5};
  EXPECT_EQ(feasibility(g, outer).status, Feasibility::kInfeasible);
}

TEST(Feasibility, RejectsRatesAboveOne) {
  const double lam[] = {1.01, 0.1};
  EXPECT_THROW(feasibility(topology::complete(2), lam), DomainError);
}

TEST(Feasibility, ZeroRateIsNotStrict) {
  const double lam[] = {0.0, 0.3};
  EXPECT_NE(feasibility(topology::complete(2), lam).status, Feasibility::kStrictlyFeasible);
}

TEST(Feasibility, SevenLinkDirectionIsBoundary) {
  const auto g = topology::seven_link();
  EXPECT_EQ(feasibility(g, seven_link_rates(1.0)).status, Feasibility::kBoundary);
  const auto r = feasibility(g, seven_link_rates(0.8));
  EXPECT_EQ(r.status, Feasibility::kStrictlyFeasible);
  // The schedule is a distribution over independent sets that dominates lambda + t.
  const auto sets = independent_sets(g);
  ASSERT_EQ(r.schedule.size(), sets.size());
  double total = 0.0;
  std::vector<double> cover(7, 0.0);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    EXPECT_GE(r.schedule[i], -1e-12);
    total += r.schedule[i];
    for (int k = 0; k < 7; ++k) cover[k] += sets[i].active(k) ? r.schedule[i] : 0.0;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  const auto lam = seven_link_rates(0.8);
  for (int k = 0; k < 7; ++k) EXPECT_GE(cover[k] + 1e-9, lam[k] + r.margin);
}

TEST(Feasibility, MarginShrinksTowardBoundary) {
  const auto g = topology::seven_link();
  double prev = std::numeric_limits<double>::infinity();
  for (double rho : {0.5, 0.7, 0.9, 0.99}) {
    const double m = feasibility(g, seven_link_rates(rho)).margin;
    EXPECT_LT(m, prev);
    EXPECT_GT(m, 0.0);
    prev = m;
  }
}

TEST(RStar, SingleLinkIsLogTwo) {
  const double lam[] = {6.0 / 11.0};
  const auto res = solve_rstar(topology::complete(1), evaluation_params(1), lam);
  EXPECT_NEAR(res.r_star[0], std::log(2.0), 1e-9);
  EXPECT_LE(res.residual, 1e-9);
}

TEST(RStar, SingleLinkClosedFormOverGrid) {
  for (double lam : {0.05, 0.3, 0.7, 0.95}) {
    const double l[] = {lam};
    const auto res = solve_rstar(topology::complete(1), evaluation_params(1), l);
    EXPECT_NEAR(res.r_star[0], single_link_rstar(lam, 1.0 / 16, 10, 15.0), 1e-7) << lam;
  }
}

TEST(RStar, SymmetricPairIsSymmetric) {
  const double lam[] = {0.3, 0.3};
  const auto res = solve_rstar(topology::complete(2), evaluation_params(2), lam);
  EXPECT_NEAR(res.r_star[0], res.r_star[1], 1e-9);
}

TEST(RStar, SevenLinkUniqueFromTwoStarts) {
  const auto g = topology::seven_link();
  const auto params = evaluation_params(7);
  const auto lam = seven_link_rates(0.8);
  RStarOptions a, b;
  a.start = std::vector<double>(7, -1.0);
  b.start = std::vector<double>{3, 0, 2, -1, 1, 0.5, 2};
  const auto ra = solve_rstar(g, params, lam, a);
  const auto rb = solve_rstar(g, params, lam, b);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(ra.r_star[k], rb.r_star[k], 1e-6);
  const auto s = service_rates(g, params, ra.r_star);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(s[k], lam[k], 1e-8);
}

TEST(RStar, GradientMethodAgreesAndNeverDecreasesObjective) {
  const auto g = topology::path(3);
  const auto params = evaluation_params(3);
  const std::vector<double> lam{0.3, 0.2, 0.3};
  RStarOptions opt;
  opt.method = AscentMethod::kGradient;
  const auto grad = solve_rstar(g, params, lam, opt);
  const auto newton = solve_rstar(g, params, lam);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(grad.r_star[k], newton.r_star[k], 1e-6);
  for (const auto* run : {&grad, &newton}) {
    for (std::size_t i = 1; i < run->objective_trace.size(); ++i) {
      EXPECT_GE(run->objective_trace[i], run->objective_trace[i - 1] - 1e-12);
    }
  }
}

TEST(RStar, RejectsBoundaryRates) {
  EXPECT_THROW(solve_rstar(topology::seven_link(), evaluation_params(7), seven_link_rates(1.0)), PreconditionError);
}

TEST(RStar, MaxIterCarriesBestIterate) {
  RStarOptions opt;
  opt.max_iter = 1;
  opt.method = AscentMethod::kGradient;
  try {
    solve_rstar(topology::seven_link(), evaluation_params(7), seven_link_rates(0.8), opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.best_iterate().size(), 7u);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(RStar, DetailedLawMeetsRateConstraints) {
  const auto g = topology::path(4);
  const auto params = evaluation_params(4);
  const double lam[] = {0.3, 0.2, 0.25, 0.35};
  const auto res = solve_rstar(g, params, lam);
  std::vector<double> mass(4, 0.0);
  for (const auto& e : detailed_distribution(g, params, res.r_star)) {
    for (int k = 0; k < 4; ++k) mass[k] += has_link(e.state.z, k) ? e.prob : 0.0;
  }
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(mass[k], lam[k], 1e-9);
}

TEST(RegionCheck, Examples) {
  const auto g = topology::seven_link();
  const auto params = evaluation_params(7);
  const auto lam = seven_link_rates(0.8);
  EXPECT_TRUE(region_check(g, params, lam, 0.0, 3.5));
  const auto rs = solve_rstar(g, params, lam).r_star;
  const double lowest = *std::min_element(rs.begin(), rs.end());
  EXPECT_FALSE(region_check(g, params, lam, -1.0, lowest - 0.01));
  const double one[] = {6.0 / 11.0};
  EXPECT_TRUE(region_check(topology::complete(1), evaluation_params(1), one, 0.0, 1.0));
  EXPECT_THROW(region_check(g, params, lam, 1.0, 1.0), DomainError);
}

TEST(LowerBound, ArithmeticAndDominance) {
  const auto params = evaluation_params(2);
  const double lam[] = {0.6, 0.0};
  const auto lb = rstar_lower_bound(params, lam);
  EXPECT_NEAR(lb[0], 0.0, 1e-15);
  EXPECT_EQ(lb[1], std::numeric_limits<double>::lowest());
  const double bad[] = {1.0, 0.1};
  EXPECT_THROW(rstar_lower_bound(params, bad), DomainError);

  const auto g = topology::seven_link();
  for (double rho : {0.3, 0.6, 0.9}) {
    const auto l = seven_link_rates(rho);
    const auto rs = solve_rstar(g, evaluation_params(7), l).r_star;
    const auto b = rstar_lower_bound(evaluation_params(7), l);
    for (int k = 0; k < 7; ++k) EXPECT_GE(rs[k], b[k]);
  }
}

TEST(BoundaryBound, SingleLinkFrozenValues) {
  const double bar[] = {1.0};
  const auto params = evaluation_params(1);
  const auto g = topology::complete(1);
  const auto b = rstar_upper_bound(g, params, bar, 0.1);
  EXPECT_EQ(b.num_detailed, 3u);
  EXPECT_NEAR(b.b, 1.0, 1e-9);
  EXPECT_NEAR(b.value, 5.341204640, 1e-6);
  double prev_ratio = std::numeric_limits<double>::infinity();
  for (double eps : {0.5, 0.1, 0.01, 0.001}) {
    const double lhs = single_link_rstar(1 - eps, 1.0 / 16, 10, 15.0);
    const auto bound = rstar_upper_bound(g, params, bar, eps);
    EXPECT_LE(lhs, bound.value);
    const double ratio = bound.value / std::log(1 / eps);
    if (eps < 0.1) EXPECT_LE(ratio, prev_ratio);
    prev_ratio = ratio;
  }
}

TEST(BoundaryBound, Preconditions) {
  const auto params = evaluation_params(2);
  const double inside[] = {0.3, 0.3};
  EXPECT_THROW(rstar_upper_bound(topology::complete(2), params, inside, 0.1), PreconditionError);
  const double edge[] = {0.5, 0.5};
  EXPECT_THROW(rstar_upper_bound(topology::complete(2), params, edge, 0.0), DomainError);
  EXPECT_THROW(rstar_upper_bound(topology::complete(2), params, edge, 0.1, 4), CapacityError);
}
