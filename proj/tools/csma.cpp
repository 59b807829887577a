// csma: command-line front end for analysis, simulation, control and
// reproduction runs. Every file written under --out carries the resolved
// config and seed; manifest.json lists the files of one invocation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "csma/adaptive.hpp"
#include "csma/config.hpp"
#include "csma/errors.hpp"
#include "csma/experiments.hpp"
#include "csma/optimizer.hpp"
#include "csma/oracle.hpp"
#include "csma/stationary.hpp"
#include "csma/sweep.hpp"
#include "csma/table.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMiss = 1;
constexpr int kExitInvalid = 2;

struct Common {
  std::string graph;
  std::string params;
  std::string out = "out";
  std::uint64_t seed = 1;
  bool seed_set = false;
  std::int64_t slots = 0;
  std::vector<std::string> overrides;
  unsigned jobs = csma::default_jobs();
};

class OutputDir {
 public:
  OutputDir(const std::string& dir, std::string command, std::string config, std::uint64_t seed)
      : dir_(dir), command_(std::move(command)), config_(std::move(config)), seed_(seed) {
    fs::create_directories(dir_);
  }

  void csv(const csma::Table& t) {
    write(t.name + ".csv", csma::to_csv(t, "seed: " + std::to_string(seed_) + "\nconfig: " + compact()));
  }

  void json_file(const std::string& name, json body) {
    body["seed"] = seed_;
    body["config"] = json::parse(config_);
    write(name, body.dump(2) + "\n");
  }

  void manifest(const std::string& status) {
    json m{{"command", command_}, {"seed", seed_}, {"status", status}, {"files", files_},
           {"config", json::parse(config_)}};
    std::ofstream(dir_ / "manifest.json") << m.dump(2) << "\n";
  }

 private:
  std::string compact() const { return json::parse(config_).dump(); }
  void write(const std::string& name, const std::string& text) {
    std::ofstream f(dir_ / name);
    if (!f) throw csma::ConfigError("cannot write " + (dir_ / name).string());
    f << text;
    files_.push_back(name);
  }

  fs::path dir_;
  std::string command_;
  std::string config_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

void add_common(CLI::App* cmd, Common& c, bool with_slots = true) {
  cmd->add_option("--graph", c.graph, "graph JSON file or builtin:<name>");
  cmd->add_option("--params", c.params, "run config JSON (params, r, lambda, sim, controller)");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s; c.seed_set = true; }, "master seed");
  if (with_slots) cmd->add_option("--slots", c.slots, "simulated slots");
  cmd->add_option("--override", c.overrides, "key.path=value, applied last")->take_all();
  cmd->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
}

// params file + --graph + --seed/--slots + overrides -> resolved experiment.
csma::config::Experiment load(const Common& c, std::vector<std::string> extra = {}) {
  std::string text = "{}";
  std::string base_dir = ".";
  if (!c.params.empty()) {
    text = csma::config::read_file(c.params);
    base_dir = fs::path(c.params).parent_path().string();
    if (base_dir.empty()) base_dir = ".";
  }
  std::vector<std::string> ov;
  if (!c.graph.empty()) {
    std::string g = c.graph;
    if (g.rfind("builtin:", 0) != 0 && g.find('{') == std::string::npos) g = fs::absolute(g).string();
    ov.push_back("graph=" + json(g).dump());
  }
  if (c.seed_set) ov.push_back("sim.seed=" + std::to_string(c.seed));
  if (c.slots > 0) ov.push_back("sim.n_slots=" + std::to_string(c.slots));
  ov.insert(ov.end(), extra.begin(), extra.end());
  ov.insert(ov.end(), c.overrides.begin(), c.overrides.end());
  return csma::config::parse_experiment(csma::config::apply_overrides(text, ov), base_dir);
}

json per_link(const std::vector<double>& v) { return json(v); }

// ---------------------------------------------------------------------------

int cmd_analyze(const Common& c) {
  const auto ex = load(c);
  const auto& sim = ex.sim;
  const int k = sim.graph.num_links();
  std::vector<double> r = sim.r.empty() ? std::vector<double>(k, 0.0) : sim.r;
  const csma::ProductForm model(sim.graph, sim.params);
  const auto dist = model.distribution(r);
  const auto s = model.service_rates(r);

  OutputDir out(c.out, "analyze", ex.resolved, sim.seed);
  csma::Table onoff{"onoff", {"state", "links", "successful", "collision_number", "probability"}, {}};
  for (csma::LinkMask x = 0; x < dist.prob.size(); ++x) {
    std::string links;
    for (int j = 0; j < k; ++j) {
      if (csma::has_link(x, j)) links += (links.empty() ? "" : " ") + std::to_string(j + 1);
    }
    onoff.add({csma::cell(static_cast<std::uint64_t>(x)), links,
               csma::cell(static_cast<int>(csma::popcount(model.successful(x)))),
               csma::cell(model.collision_number(x)), csma::cell(dist.prob[x])});
  }
  out.csv(onoff);

  std::vector<double> payload, intensity;
  for (int j = 0; j < k; ++j) {
    payload.push_back(sim.params.payload_mean(r[j]));
    intensity.push_back(payload.back() / (1.0 / sim.params.p[j] - 1.0));
  }
  json report{{"service_rates", per_link(s)},
              {"payload_mean", payload},
              {"access_intensity", intensity},
              {"log_normalizer", dist.log_normalizer},
              {"independent_sets", csma::independent_sets(sim.graph).size()},
              {"detailed_states", model.num_detailed_states()}};
  if (!sim.lambda.empty()) report["log_likelihood"] = model.log_likelihood(r, sim.lambda).value;
  out.json_file("analyze.json", report);
  out.manifest("ok");
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_solve(const Common& c, const std::vector<double>& epsilons) {
  const auto ex = load(c);
  const auto& sim = ex.sim;
  if (sim.lambda.empty()) throw csma::ConfigError("solve needs 'lambda' (or 'rho' with 'lambda_bar')");
  OutputDir out(c.out, "solve", ex.resolved, sim.seed);
  const auto feas = csma::feasibility(sim.graph, sim.lambda);
  json report{{"feasibility", {{"status", csma::to_string(feas.status)}, {"margin", feas.margin}}}};
  if (std::all_of(sim.lambda.begin(), sim.lambda.end(), [](double v) { return v < 1.0; })) {
    report["lower_bound"] = csma::rstar_lower_bound(sim.params, sim.lambda);
  }
  int rc = kExitOk;
  if (feas.status == csma::Feasibility::kStrictlyFeasible) {
    const auto res = csma::solve_rstar(sim.graph, sim.params, sim.lambda);
    report["r_star"] = res.r_star;
    report["residual"] = res.residual;
    report["iterations"] = res.iterations;
    report["region_check"] =
        csma::region_check(res.r_star, ex.controller.r_min, ex.controller.r_max);
    std::vector<double> payload;
    for (double v : res.r_star) payload.push_back(sim.params.payload_mean(v));
    report["payload_mean"] = payload;
  } else if (epsilons.empty()) {
    std::cerr << "rates are " << csma::to_string(feas.status) << "; r* exists only for strictly feasible rates\n";
    rc = kExitInvalid;
  }
  if (!epsilons.empty()) {
    json bounds = json::array();
    for (double eps : epsilons) {
      const auto b = csma::rstar_upper_bound(sim.graph, sim.params, sim.lambda, eps);
      std::vector<double> scaled;
      for (double v : sim.lambda) scaled.push_back((1.0 - eps) * v);
      const auto rs = csma::solve_rstar(sim.graph, sim.params, scaled);
      double lhs = 0.0;
      for (std::size_t j = 0; j < scaled.size(); ++j) lhs += sim.lambda[j] * rs.r_star[j];
      bounds.push_back({{"epsilon", eps},
                        {"bound", b.value},
                        {"value", lhs},
                        {"b", b.b},
                        {"G", b.G},
                        {"detailed_states", b.num_detailed},
                        {"vertices", b.num_vertices},
                        {"small_epsilon_branch", b.small_epsilon_branch}});
    }
    report["boundary_bound"] = bounds;
  }
  out.json_file("solve.json", report);
  out.manifest(rc == kExitOk ? "ok" : "invalid");
  std::cout << report.dump(2) << "\n";
  return rc;
}

csma::Table link_summary(const csma::Metrics& m, const csma::ProtocolParams& params) {
  csma::Table t{"links",
                {"link", "service_rate", "real_service_rate", "payload_slots", "successes", "failed",
                 "delay_mean", "delay_std", "delay_samples", "access_intensity", "final_queue"},
                {}};
  (void)params;
  for (std::size_t k = 0; k < m.service_rate.size(); ++k) {
    t.add({csma::cell(static_cast<int>(k + 1)), csma::cell(m.service_rate[k]), csma::cell(m.real_service_rate[k]),
           csma::cell(m.payload_slots[k]), csma::cell(m.successes[k]), csma::cell(m.failed[k]),
           csma::cell(m.delay[k].mean), csma::cell(m.delay[k].stddev()), csma::cell(m.delay[k].count),
           csma::cell(m.access_intensity[k]), csma::cell(m.final_queue[k])});
  }
  return t;
}

void write_metrics(OutputDir& out, const csma::Metrics& m, const csma::SimConfig& sim) {
  out.csv(link_summary(m, sim.params));
  if (!m.periods.empty()) {
    csma::Table p{"periods", {"period", "link", "service", "arrival", "queue", "payload_mean"}, {}};
    for (const auto& rec : m.periods) {
      for (std::size_t k = 0; k < rec.service.size(); ++k) {
        p.add({csma::cell(rec.period), csma::cell(static_cast<int>(k + 1)), csma::cell(rec.service[k]),
               csma::cell(rec.arrival[k]), csma::cell(rec.queue[k]), csma::cell(rec.payload_mean[k])});
      }
    }
    out.csv(p);
  }
  if (!m.occupancy.empty()) {
    std::vector<double> r = sim.r.empty() ? std::vector<double>(sim.graph.num_links(), 0.0) : sim.r;
    const bool compare = !sim.hidden() && sim.dummy_bits;
    const auto dist = compare ? csma::onoff_distribution(sim.graph, sim.params, r) : csma::OnOffDistribution{};
    csma::Table o{"occupancy", {"state", "slots", "fraction", "stationary"}, {}};
    for (std::size_t x = 0; x < m.occupancy.size(); ++x) {
      const double frac = static_cast<double>(m.occupancy[x]) / static_cast<double>(m.n_slots);
      o.add({csma::cell(static_cast<std::uint64_t>(x)), csma::cell(m.occupancy[x]), csma::cell(frac),
             compare ? csma::cell(dist.prob[x]) : std::string("nan")});
    }
    out.csv(o);
  }
  if (!m.window_links.empty()) {
    csma::Table w{"windows", {"link", "window", "throughput"}, {}};
    for (std::size_t i = 0; i < m.window_links.size(); ++i) {
      for (std::size_t j = 0; j < m.window_throughput[i].size(); ++j) {
        w.add({csma::cell(m.window_links[i] + 1), csma::cell(static_cast<std::int64_t>(j)),
               csma::cell(m.window_throughput[i][j])});
      }
    }
    out.csv(w);
  }
}

int cmd_simulate(const Common& c) {
  const auto ex = load(c);
  const auto& sim = ex.sim;
  const auto m = sim.hidden() ? csma::run_hidden_node(sim) : csma::run(sim);
  OutputDir out(c.out, "simulate", ex.resolved, sim.seed);
  write_metrics(out, m, sim);
  json summary{{"n_slots", m.n_slots},
               {"service_rate", m.service_rate},
               {"collisions", m.collisions},
               {"warnings", m.warnings}};
  if (!sim.hidden() && sim.dummy_bits) {
    std::vector<double> r = sim.r.empty() ? std::vector<double>(sim.graph.num_links(), 0.0) : sim.r;
    summary["stationary_service_rate"] = csma::service_rates(sim.graph, sim.params, r);
  }
  out.json_file("summary.json", summary);
  out.manifest("ok");
  for (const auto& w : m.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_adapt(const Common& c) {
  const auto ex = load(c);
  const auto& sim = ex.sim;
  if (sim.lambda.empty()) throw csma::ConfigError("adapt needs arrival rates");
  const auto res = csma::run_adaptive(sim, ex.controller);
  const auto& tr = res.trajectory;
  OutputDir out(c.out, "adapt", ex.resolved, sim.seed);
  csma::Table t{"trajectory", {"period", "link", "r", "payload_mean", "arrival", "service", "queue"}, {}};
  for (const auto& rec : tr.records) {
    for (std::size_t k = 0; k < rec.r.size(); ++k) {
      t.add({csma::cell(rec.period), csma::cell(static_cast<int>(k + 1)), csma::cell(rec.r[k]),
             csma::cell(rec.payload_mean[k]), csma::cell(rec.arrival[k]), csma::cell(rec.service[k]),
             csma::cell(rec.queue[k])});
    }
  }
  out.csv(t);
  write_metrics(out, res.metrics, sim);

  json summary{{"converged_r", tr.tail_mean_r},
               {"final_r", tr.final_r},
               {"periods", tr.periods},
               {"min_r", tr.min_r},
               {"max_r", tr.max_r},
               {"within_bounds", tr.within_bounds},
               {"tail_mean_service", tr.tail_mean_service},
               {"tail_mean_arrival", tr.tail_mean_arrival}};
  // Queue drift: least-squares slope of the recorded queue per link, slots/period.
  std::vector<double> drift;
  for (std::size_t k = 0; k < tr.final_r.size(); ++k) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& rec : tr.records) {
      const double x = static_cast<double>(rec.period), y = static_cast<double>(rec.queue[k]);
      n += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double den = n * sxx - sx * sx;
    drift.push_back(den > 0 ? (n * sxy - sx * sy) / den : 0.0);
  }
  summary["queue_drift"] = drift;
  if (!sim.hidden()) {
    std::vector<double> target = sim.lambda;
    for (double& v : target) v += ex.controller.delta;
    try {
      const auto rs = csma::solve_rstar(sim.graph, sim.params, target);
      std::vector<double> diff;
      for (std::size_t k = 0; k < rs.r_star.size(); ++k) diff.push_back(tr.tail_mean_r[k] - rs.r_star[k]);
      summary["r_star"] = rs.r_star;
      summary["residual_vs_rstar"] = diff;
    } catch (const csma::Error& e) {
      summary["r_star_unavailable"] = e.what();
    }
  }
  out.json_file("summary.json", summary);
  out.manifest("ok");
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

int cmd_verify(const Common& c, double pf_tol, double balance_tol) {
  OutputDir out(c.out, "verify",
                json{{"product_form_tol", pf_tol}, {"balance_tol", balance_tol}}.dump(), c.seed);
  csma::Table t{"verify",
                {"instance", "states", "row_sum", "product_form", "marginal", "balance", "length_sum", "involution",
                 "support_symmetry", "pass"},
                {}};
  bool all = true;
  for (const auto& ni : csma::oracle::standard_suite()) {
    const auto r = csma::oracle::verify(ni.instance);
    const bool pass = r.max_product_form_error < pf_tol && r.max_marginal_error < pf_tol &&
                      r.max_balance_error < balance_tol && r.max_length_sum_error < pf_tol && r.involution &&
                      r.support_symmetry && r.max_row_sum_error < balance_tol;
    all = all && pass;
    t.add({ni.name, csma::cell(static_cast<std::uint64_t>(r.num_states)), csma::cell(r.max_row_sum_error),
           csma::cell(r.max_product_form_error), csma::cell(r.max_marginal_error), csma::cell(r.max_balance_error),
           csma::cell(r.max_length_sum_error), csma::cell(r.involution), csma::cell(r.support_symmetry),
           csma::cell(pass)});
    std::cout << (pass ? "ok   " : "FAIL ") << ni.name << ": states " << r.num_states << ", product form "
              << r.max_product_form_error << ", marginal " << r.max_marginal_error << ", balance "
              << r.max_balance_error << "\n";
  }
  out.csv(t);
  out.manifest(all ? "ok" : "miss");
  return all ? kExitOk : kExitMiss;
}

int cmd_sweep(const Common& c, const std::vector<std::string>& grid, const std::string& mode) {
  std::vector<csma::sweep::Axis> axes;
  for (const auto& g : grid) axes.push_back(csma::sweep::parse_axis(g));
  if (axes.empty()) throw csma::ConfigError("sweep needs at least one --grid axis");
  // Resolve the base once so files, graph and flags behave as in simulate.
  const auto base = load(c);
  csma::sweep::Options opt;
  opt.mode = csma::sweep::parse_mode(mode);
  opt.master_seed = c.seed;
  opt.jobs = c.jobs;
  // The resolved base has r and lambda expanded; drop them when an axis sets an
  // alternative form so the two do not collide.
  json base_doc = json::parse(base.resolved);
  for (const auto& a : axes) {
    if (a.key == "payload" || a.key.rfind("payload.", 0) == 0) base_doc.erase("r");
    if (a.key == "rho" || a.key == "lambda_bar") {
      base_doc.erase("lambda");
      if (!base_doc.contains("lambda_bar") && base.sim.lambda.size()) base_doc["lambda_bar"] = base.sim.lambda;
    }
  }
  const auto results = csma::sweep::run(base_doc.dump(), axes, opt);
  json cfg{{"base", base_doc}, {"grid", json::array()}, {"mode", mode}, {"master_seed", c.seed}};
  for (const auto& a : axes) cfg["grid"].push_back({{"key", a.key}, {"values", a.values}});
  OutputDir out(c.out, "sweep", cfg.dump(), c.seed);
  out.csv(csma::sweep::summarize(results, axes));
  out.manifest("ok");
  std::cout << "sweep: " << results.size() << " cells written to " << c.out << "/sweep.csv\n";
  return kExitOk;
}

int cmd_reproduce(const Common& c, const std::string& target, double scale, const std::string& expectations) {
  std::vector<std::string> names;
  if (target == "all") {
    names = csma::experiments::targets();
  } else {
    names = {target};
  }
  csma::experiments::Options opt;
  opt.seed = c.seed;
  opt.scale = scale;
  opt.jobs = c.jobs;
  opt.expectations_path = expectations;
  bool all = true;
  for (const auto& name : names) {
    const auto res = csma::experiments::reproduce(name, opt);
    const std::string dir = names.size() > 1 ? (fs::path(c.out) / name).string() : c.out;
    OutputDir out(dir, "reproduce " + name, res.config, c.seed);
    for (const auto& t : res.tables) out.csv(t);
    csma::Table checks{"checks", {"check", "value", "lo", "hi", "pass", "detail"}, {}};
    std::cout << name << " (" << res.seconds << " s)\n";
    for (const auto& ch : res.checks) {
      checks.add({ch.name, csma::cell(ch.value), csma::cell(ch.lo), csma::cell(ch.hi), csma::cell(ch.pass), ch.detail});
      std::cout << "  " << (ch.pass ? "ok   " : "MISS ") << ch.name << ": " << ch.value << " vs [" << ch.lo
                << ", " << ch.hi << "]\n";
    }
    out.csv(checks);
    out.manifest(res.passed() ? "ok" : "miss");
    all = all && res.passed();
  }
  return all ? kExitOk : kExitMiss;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSMA with collisions: analysis, simulation and adaptive payload control"};
  app.require_subcommand(1);

  Common common;
  auto* analyze = app.add_subcommand("analyze", "exact stationary law and service rates for fixed r");
  add_common(analyze, common, false);

  std::vector<double> epsilons;
  auto* solve = app.add_subcommand("solve", "feasibility, r*(lambda) and bounds");
  add_common(solve, common, false);
  solve->add_option("--epsilon", epsilons, "treat lambda as a boundary point and bound r*((1-eps) lambda)")
      ->take_all();

  auto* simulate = app.add_subcommand("simulate", "slot-level run with fixed payload lengths");
  add_common(simulate, common);

  auto* adapt = app.add_subcommand("adapt", "slot-level run under the payload controller");
  add_common(adapt, common);

  double pf_tol = 1e-9, balance_tol = 1e-12;
  auto* verify = app.add_subcommand("verify", "brute-force chain checks on small instances");
  verify->add_option("--out", common.out, "output directory")->capture_default_str();
  verify->add_option("--product-form-tol", pf_tol)->capture_default_str();
  verify->add_option("--balance-tol", balance_tol)->capture_default_str();

  std::vector<std::string> grid;
  std::string mode = "simulate";
  auto* sweep = app.add_subcommand("sweep", "grid of overrides, one CSV row per cell and link");
  add_common(sweep, common);
  sweep->add_option("--grid", grid, "key.path=v1,v2,... (repeatable)")->take_all();
  sweep->add_option("--mode", mode, "simulate or adapt")->capture_default_str();

  std::string target;
  double scale = 1.0;
  std::string expectations;
  auto* reproduce = app.add_subcommand("reproduce", "rerun a reference experiment and compare");
  reproduce->add_option("target", target, "fig8, table_st, table_R, hidden_nodes, lattice_1d, lattice_2d or all")
      ->required();
  reproduce->add_option("--out", common.out, "output directory")->capture_default_str();
  reproduce->add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t s) { common.seed = s; }, "master seed");
  reproduce->add_option("--scale", scale, "run-length multiplier")->capture_default_str();
  reproduce->add_option("--expectations", expectations, "tolerance file");
  reproduce->add_option("--jobs", common.jobs, "worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*analyze) return cmd_analyze(common);
    if (*solve) return cmd_solve(common, epsilons);
    if (*simulate) return cmd_simulate(common);
    if (*adapt) return cmd_adapt(common);
    if (*verify) return cmd_verify(common, pf_tol, balance_tol);
    if (*sweep) return cmd_sweep(common, grid, mode);
    if (*reproduce) return cmd_reproduce(common, target, scale, expectations);
  } catch (const csma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const csma::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const csma::DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const csma::PreconditionError& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const csma::CapacityError& e) {
    std::cerr << "too large: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const csma::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMiss;
  }
  return kExitInvalid;
}
