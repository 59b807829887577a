#include <cmath>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "csma/config.hpp"
#include "csma/errors.hpp"
#include "csma/experiments.hpp"
#include "csma/random.hpp"
#include "csma/sweep.hpp"
#include "csma/table.hpp"

using namespace csma;
using json = nlohmann::json;

TEST(Config, BuiltinGraphs) {
  EXPECT_EQ(config::builtin_graph("seven_link"), topology::seven_link());
  EXPECT_EQ(config::builtin_graph("path:4"), topology::path(4));
  EXPECT_EQ(config::builtin_graph("line:16:2"), topology::line(16, 2));
  EXPECT_EQ(config::builtin_graph("lattice:5:5"), topology::lattice(5, 5));
  EXPECT_EQ(config::resolve_graph("builtin:complete:3"), topology::complete(3));
  EXPECT_EQ(config::resolve_graph(R"({"num_links": 3, "edges": [[1, 2], [2, 3]]})"), topology::path(3));
  EXPECT_THROW(config::builtin_graph("star:4"), ConfigError);
  EXPECT_THROW(config::builtin_graph("path:x"), ConfigError);
}

TEST(Config, Overrides) {
  const std::string base = R"({"sim": {"M": 500}, "lambda": [0.1, 0.2]})";
  const std::string ov[] = {"sim.M=100", "lambda.1=0.3", "sim.hidden_policy=run_to_end", "controller.step.kind=\"constant\""};
  const auto out = json::parse(config::apply_overrides(base, ov));
  EXPECT_EQ(out["sim"]["M"], 100);
  EXPECT_DOUBLE_EQ(out["lambda"][1].get<double>(), 0.3);
  EXPECT_EQ(out["sim"]["hidden_policy"], "run_to_end");
  EXPECT_EQ(out["controller"]["step"]["kind"], "constant");
  const std::string bad1[] = {"no_equals"};
  EXPECT_THROW(config::apply_overrides(base, bad1), ConfigError);
  const std::string bad2[] = {"lambda.5=1"};
  EXPECT_THROW(config::apply_overrides(base, bad2), ConfigError);
  const std::string bad3[] = {"sim.M.x=1"};
  EXPECT_THROW(config::apply_overrides(base, bad3), ConfigError);
}

TEST(Config, PayloadBecomesLogRatio) {
  const auto e = config::parse_experiment(R"({"graph": "builtin:complete:2", "payload": [30, 15]})");
  EXPECT_NEAR(e.sim.r[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(e.sim.r[1], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(e.sim.params.p[0], 1.0 / 16);
  EXPECT_EQ(e.sim.params.gamma, 5);
  EXPECT_THROW(config::parse_experiment(R"({"graph": "builtin:complete:2", "payload": 30, "r": 0})"), ConfigError);
}

TEST(Config, RhoScalesLambdaBar) {
  const auto e = config::parse_experiment(
      R"({"graph": "builtin:complete:2", "rho": 0.5, "lambda_bar": [0.4, 0.6], "r": 0})");
  EXPECT_NEAR(e.sim.lambda[0], 0.2, 1e-15);
  EXPECT_NEAR(e.sim.lambda[1], 0.3, 1e-15);
  EXPECT_EQ(e.lambda_bar.size(), 2u);
}

TEST(Config, ResolvedIsAFixedPoint) {
  const auto e = config::parse_experiment(
      R"({"graph": "builtin:seven_link", "rho": 0.8, "lambda_bar": [0.2, 0.4, 0.2, 0.2, 0.4, 0.4, 0.2],
          "sim": {"window_links": [3]}, "controller": {"step": {"kind": "reciprocal"}}})");
  const auto again = config::parse_experiment(e.resolved);
  EXPECT_EQ(again.resolved, e.resolved);
  EXPECT_EQ(again.sim.window_links, std::vector<int>{2});
}

TEST(Config, Errors) {
  EXPECT_THROW(config::parse_experiment("[1]"), ConfigError);
  EXPECT_THROW(config::parse_experiment("{"), ConfigError);
  EXPECT_THROW(config::parse_experiment(R"({"r": 0})"), ConfigError);
  EXPECT_THROW(config::parse_experiment(R"({"graph": "builtin:path:2", "r": [0, 0, 0]})"), DimensionError);
  EXPECT_THROW(config::parse_experiment(R"({"graph": "builtin:path:2", "r": 0, "sim": {"window_links": [3]}})"),
               ConfigError);
}

TEST(Sweep, ExpandOrderAndSeeds) {
  const sweep::Axis axes[] = {sweep::parse_axis("rho=0.5,0.6"), sweep::parse_axis("sim.M=10,20,30")};
  const auto cells = sweep::expand(axes, 9);
  ASSERT_EQ(cells.size(), 6u);
  EXPECT_EQ(cells[1].overrides, (std::vector<std::string>{"rho=0.5", "sim.M=20"}));
  EXPECT_EQ(cells[3].overrides, (std::vector<std::string>{"rho=0.6", "sim.M=10"}));
  EXPECT_EQ(cells[4].seed, derive_seed(9, 4));
  const sweep::Axis seeded[] = {sweep::parse_axis("sim.seed=3,4")};
  EXPECT_EQ(sweep::expand(seeded, 9)[1].seed, 4u);
  EXPECT_THROW(sweep::expand(std::span<const sweep::Axis>{}, 1), ConfigError);
  EXPECT_THROW(sweep::parse_axis("rho="), ConfigError);
  EXPECT_THROW(sweep::parse_mode("optimise"), ConfigError);
}

TEST(Sweep, ResultsIndependentOfJobsAndMatchDirectRuns) {
  const std::string base = R"({"graph": "builtin:path:3", "payload": 20, "lambda": 0.1,
                              "sim": {"n_slots": 20000, "M": 100}})";
  const sweep::Axis axes[] = {sweep::parse_axis("payload=10,20,40")};
  sweep::Options one, many;
  one.jobs = 1;
  many.jobs = 3;
  one.master_seed = many.master_seed = 11;
  const auto a = sweep::run(base, axes, one);
  const auto b = sweep::run(base, axes, many);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].metrics.payload_slots, b[i].metrics.payload_slots);

  auto direct = config::parse_experiment(
      R"({"graph": "builtin:path:3", "payload": 10, "lambda": 0.1, "sim": {"n_slots": 20000, "M": 100}})");
  direct.sim.seed = derive_seed(11, 0);
  EXPECT_EQ(run(direct.sim).payload_slots, a[0].metrics.payload_slots);
  const auto t = sweep::summarize(a, axes);
  EXPECT_EQ(t.rows.size(), 9u);
}

TEST(ParallelFor, PropagatesExceptions) {
  std::vector<int> hit(50, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] = 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw DomainError("boom");
               }),
               DomainError);
}

TEST(Table, CsvQuotingAndPreamble) {
  Table t{"t", {"a", "b"}, {}};
  t.add({cell(1.5), cell("x,y")});
  t.add({cell(std::int64_t{-3}), cell("say \"hi\"")});
  EXPECT_THROW(t.add({cell(1)}), DimensionError);
  EXPECT_EQ(to_csv(t, "seed: 1\nconfig: {}"),
            "# seed: 1\n# config: {}\na,b\n1.5,\"x,y\"\n-3,\"say \"\"hi\"\"\"\n");
  EXPECT_EQ(cell(std::nan("")), "nan");
}

TEST(Experiments, TargetsAndSmokeRun) {
  EXPECT_EQ(experiments::targets().size(), 6u);
  EXPECT_THROW(experiments::reproduce("fig99", {}), ConfigError);
  experiments::Options opt;
  opt.scale = 0.02;
  opt.jobs = 1;
  const auto out = experiments::reproduce("lattice_1d", opt);
  EXPECT_EQ(out.target, "lattice_1d");
  EXPECT_FALSE(out.tables.empty());
  EXPECT_FALSE(out.checks.empty());
  EXPECT_TRUE(json::parse(out.config).is_object());
}
