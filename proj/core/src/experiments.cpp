#include "csma/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "csma/errors.hpp"
#include "csma/optimizer.hpp"
#include "csma/random.hpp"
#include "csma/stationary.hpp"

#ifndef CSMA_SOURCE_DATA_DIR
#define CSMA_SOURCE_DATA_DIR ""
#endif
#ifndef CSMA_INSTALL_DATA_DIR
#define CSMA_INSTALL_DATA_DIR ""
#endif

namespace csma::experiments {

using nlohmann::json;

Check within(std::string name, double value, double lo, double hi, std::string detail) {
  Check c{std::move(name), value, lo, hi, false, std::move(detail)};
  c.pass = std::isfinite(value) && value >= lo && value <= hi;
  return c;
}

Check relative(std::string name, double value, double reference, double rel_tol, std::string detail) {
  const double half = std::abs(reference) * rel_tol;
  return within(std::move(name), value, reference - half, reference + half, std::move(detail));
}

bool Output::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::string default_expectations_path() {
  if (const char* env = std::getenv("CSMA_EXPECTATIONS")) return env;
  for (const char* dir : {CSMA_SOURCE_DATA_DIR, CSMA_INSTALL_DATA_DIR}) {
    if (*dir == '\0') continue;
    const auto p = std::filesystem::path(dir) / "expectations.json";
    if (std::filesystem::exists(p)) return p.string();
  }
  return "expectations.json";
}

const std::vector<std::string>& targets() {
  static const std::vector<std::string> names{"fig8",         "table_st",   "table_R",
                                              "hidden_nodes", "lattice_1d", "lattice_2d"};
  return names;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Context {
  const json& spec;
  const Options& opt;

  template <typename T>
  T get(const char* key) const {
    if (!spec.contains(key)) throw ConfigError(std::string("expectations entry is missing '") + key + "'");
    try {
      return spec.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("expectations field '") + key + "': " + e.what());
    }
  }
  std::int64_t scaled(const char* key) const {
    return std::max<std::int64_t>(1, std::llround(static_cast<double>(get<std::int64_t>(key)) * opt.scale));
  }
  std::uint64_t seed(std::uint64_t index) const { return derive_seed(opt.seed, index); }
};

StepSchedule harmonic_from(const json& j) {
  return StepSchedule::harmonic(j.at("c").get<double>(), j.at("a").get<double>(), j.at("d").get<double>());
}

std::string label(const char* what, double x) { return std::string(what) + "=" + cell(x); }

ProtocolParams seven_link_params() { return ProtocolParams::uniform(7, 1.0 / 16, 5, 10, 15.0); }

std::vector<double> seven_link_rates(double rho) {
  std::vector<double> lam;
  for (double v : topology::seven_link_boundary_rates()) lam.push_back(rho * v);
  return lam;
}

// ---------------------------------------------------------------------------

Output fig8(const Context& cx) {
  Output out;
  const double rho = cx.get<double>("rho");
  const int seeds = cx.get<int>("seeds");
  const std::int64_t periods = cx.scaled("periods");
  const auto g = topology::seven_link();
  const auto params = seven_link_params();
  const auto lam = seven_link_rates(rho);

  ControllerConfig ctl;
  ctl.delta = 0.005;
  ctl.periods = periods;
  ctl.record_every = cx.get<std::int64_t>("record_every");
  ctl.tail_periods = periods / 4;

  std::vector<AdaptiveResult> runs(static_cast<std::size_t>(seeds));
  parallel_for(runs.size(), cx.opt.jobs, [&](std::size_t s) {
    SimConfig sim;
    sim.graph = g;
    sim.params = params;
    sim.lambda = lam;
    sim.initial_queue = cx.get<std::int64_t>("initial_queue");
    sim.seed = cx.seed(s);
    runs[s] = run_adaptive(sim, ctl);
  });

  Table traj{"fig8_trajectory", {"seed", "period", "link", "r", "payload_mean", "service", "arrival", "queue"}, {}};
  for (const auto& rec : runs.front().trajectory.records) {
    for (std::size_t k = 0; k < rec.r.size(); ++k) {
      traj.add({cell(cx.seed(0)), cell(rec.period), cell(static_cast<int>(k + 1)), cell(rec.r[k]),
                cell(rec.payload_mean[k]), cell(rec.service[k]), cell(rec.arrival[k]), cell(rec.queue[k])});
    }
  }

  const double window = cx.get<double>("plateau_window") * static_cast<double>(periods);
  const double initial_queue = static_cast<double>(cx.get<std::int64_t>("initial_queue"));
  Table per_seed{"fig8_seeds",
                 {"seed", "link", "tail_payload", "plateau_change", "late_queue_mean", "min_r", "max_r"},
                 {}};
  double worst_plateau = 0.0, min_r = kInf, max_r = -kInf;
  std::vector<double> late_queue(7, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const Trajectory& tr = runs[static_cast<std::size_t>(s)].trajectory;
    min_r = std::min(min_r, tr.min_r);
    max_r = std::max(max_r, tr.max_r);
    for (int k = 0; k < 7; ++k) {
      double last = 0, prev = 0, q = 0;
      int n_last = 0, n_prev = 0, n_q = 0;
      for (const auto& rec : tr.records) {
        const double age = static_cast<double>(periods - rec.period);
        if (age < window) {
          last += rec.payload_mean[k];
          ++n_last;
        } else if (age < 2 * window) {
          prev += rec.payload_mean[k];
          ++n_prev;
        }
        if (rec.period > periods / 2) {
          q += static_cast<double>(rec.queue[k]);
          ++n_q;
        }
      }
      last /= std::max(1, n_last);
      prev /= std::max(1, n_prev);
      q /= std::max(1, n_q);
      const double change = std::abs(last - prev) / prev;
      worst_plateau = std::max(worst_plateau, change);
      late_queue[k] += q / seeds;
      per_seed.add({cell(cx.seed(s)), cell(k + 1), cell(params.T0 * std::exp(tr.tail_mean_r[k])), cell(change),
                    cell(q), cell(tr.min_r), cell(tr.max_r)});
    }
  }

  // Deterministic iteration with exact service rates.
  const ProductForm model(g, params);
  const auto rstar = solve_rstar(g, params, lam);
  ControllerConfig mf_ctl;
  mf_ctl.schedule = StepSchedule::constant(1.0);
  const auto mf = mean_field_iteration(model, lam, mf_ctl, cx.get<std::int64_t>("mean_field_iterations"), 1e-12);
  double gap = 0.0;
  for (int k = 0; k < 7; ++k) gap = std::max(gap, std::abs(mf.r[k] - rstar.r_star[k]));

  out.checks.push_back(within("iterates stay above r_min - 2", min_r, ctl.lower_bound(), kInf));
  out.checks.push_back(within("iterates stay below r_max + 2(lambda_bar + delta)", max_r, -kInf, ctl.upper_bound()));
  out.checks.push_back(within("payload means level off (worst relative change between final windows)",
                              worst_plateau, 0.0, cx.get<double>("plateau_rel_tol")));
  for (int k = 0; k < 7; ++k) {
    out.checks.push_back(within("link " + std::to_string(k + 1) + " late queue / initial queue (seed mean)",
                                late_queue[k] / initial_queue, 0.0, 1.0));
  }
  out.checks.push_back(within("mean-field iterate vs r* (max abs)", gap, 0.0, cx.get<double>("mean_field_tol"),
                              std::to_string(mf.iterations) + " iterations"));
  out.tables = {std::move(traj), std::move(per_seed)};
  return out;
}

// ---------------------------------------------------------------------------

Output table_st(const Context& cx) {
  Output out;
  const auto rhos = cx.get<std::vector<double>>("rho");
  const auto ref_mean = cx.get<std::vector<double>>("delay_mean");
  const auto ref_std = cx.get<std::vector<double>>("delay_std");
  if (ref_mean.size() != rhos.size() || ref_std.size() != rhos.size()) {
    throw ConfigError("table_st expectations have mismatched lengths");
  }
  const int link = cx.get<int>("link") - 1;
  const int seeds = cx.get<int>("seeds");
  const double tol = cx.get<double>("rel_tol");
  const std::int64_t periods = cx.scaled("periods");
  const std::int64_t warmup = cx.scaled("warmup_periods");
  const auto g = topology::seven_link();
  const auto params = seven_link_params();

  ControllerConfig ctl;
  ctl.delta = 0.005;
  ctl.periods = periods;
  ctl.record_every = periods;

  const std::size_t n = rhos.size() * static_cast<std::size_t>(seeds);
  std::vector<RunningStats> delay(n);
  parallel_for(n, cx.opt.jobs, [&](std::size_t i) {
    const std::size_t r = i / static_cast<std::size_t>(seeds);
    SimConfig sim;
    sim.graph = g;
    sim.params = params;
    sim.lambda = seven_link_rates(rhos[r]);
    sim.initial_queue = 30000;
    sim.seed = cx.seed(i % static_cast<std::size_t>(seeds));
    sim.delay_warmup = warmup * ctl.M;
    delay[i] = run_adaptive(sim, ctl).metrics.delay[static_cast<std::size_t>(link)];
  });

  Table runs{"table_st_runs", {"rho", "seed", "delay_mean", "delay_std", "samples"}, {}};
  Table summary{"table_st", {"rho", "delay_mean", "delay_std", "reference_mean", "reference_std"}, {}};
  std::vector<double> means, stds;
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    double m = 0, s = 0;
    for (int j = 0; j < seeds; ++j) {
      const RunningStats& d = delay[r * static_cast<std::size_t>(seeds) + static_cast<std::size_t>(j)];
      runs.add({cell(rhos[r]), cell(cx.seed(static_cast<std::uint64_t>(j))), cell(d.mean), cell(d.stddev()),
                cell(d.count)});
      m += d.mean / seeds;
      s += d.stddev() / seeds;
    }
    means.push_back(m);
    stds.push_back(s);
    summary.add({cell(rhos[r]), cell(m), cell(s), cell(ref_mean[r]), cell(ref_std[r])});
    out.checks.push_back(relative("link " + std::to_string(link + 1) + " delay mean, " + label("rho", rhos[r]), m,
                                  ref_mean[r], tol));
    out.checks.push_back(relative("link " + std::to_string(link + 1) + " delay std, " + label("rho", rhos[r]), s,
                                  ref_std[r], tol));
  }
  auto drops = [](const std::vector<double>& v) {
    int c = 0;
    for (std::size_t i = 1; i < v.size(); ++i) c += v[i] <= v[i - 1];
    return static_cast<double>(c);
  };
  out.checks.push_back(within("delay mean increases with rho (violations)", drops(means), 0, 0));
  out.checks.push_back(within("delay std increases with rho (violations)", drops(stds), 0, 0));
  out.tables = {std::move(summary), std::move(runs)};
  return out;
}

// ---------------------------------------------------------------------------

Output table_r(const Context& cx) {
  Output out;
  const auto thetas = cx.get<std::vector<double>>("theta");
  const auto refs = cx.get<std::vector<std::vector<double>>>("R");
  if (refs.size() != thetas.size()) throw ConfigError("table_R expectations have mismatched lengths");
  const int seeds = cx.get<int>("seeds");
  const double tol = cx.get<double>("rel_tol");
  const std::int64_t periods = cx.scaled("periods");
  const int k = 6;
  const auto g = topology::line(k, 2);
  const auto params = ProtocolParams::uniform(k, 1.0 / 16, 1, 1, 15.0);

  ControllerConfig ctl;
  ctl.r_min = cx.get<double>("r_min");
  ctl.r_max = cx.get<double>("r_max");
  ctl.schedule = harmonic_from(cx.spec.at("step"));
  ctl.periods = periods;
  ctl.tail_periods = periods / 2;
  ctl.record_every = periods;

  const std::size_t n = thetas.size() * static_cast<std::size_t>(seeds);
  std::vector<std::vector<double>> tail_r(n);
  parallel_for(n, cx.opt.jobs, [&](std::size_t i) {
    SimConfig sim;
    sim.graph = g;
    sim.params = params;
    sim.lambda.assign(k, thetas[i / static_cast<std::size_t>(seeds)]);
    sim.seed = cx.seed(i % static_cast<std::size_t>(seeds));
    tail_r[i] = run_adaptive(sim, ctl).trajectory.tail_mean_r;
  });

  auto intensity = [&](double r, int j) { return params.T0 * std::exp(r) / (1.0 / params.p[j] - 1.0); };
  Table t{"table_R", {"theta", "link", "R", "R_exact", "reference"}, {}};
  for (std::size_t th = 0; th < thetas.size(); ++th) {
    if (refs[th].size() != static_cast<std::size_t>(k)) throw ConfigError("table_R reference rows need 6 entries");
    const auto exact = solve_rstar(g, params, std::vector<double>(k, thetas[th]));
    for (int j = 0; j < k; ++j) {
      double r = 0;
      for (int s = 0; s < seeds; ++s) r += tail_r[th * static_cast<std::size_t>(seeds) + s][j] / seeds;
      const double R = intensity(r, j);
      t.add({cell(thetas[th]), cell(j + 1), cell(R), cell(intensity(exact.r_star[j], j)), cell(refs[th][j])});
      out.checks.push_back(relative("R link " + std::to_string(j + 1) + ", " + label("theta", thetas[th]), R,
                                    refs[th][j], tol));
    }
  }
  out.tables = {std::move(t)};
  return out;
}

// ---------------------------------------------------------------------------

SimConfig hidden_pair() {
  SimConfig sim;
  sim.graph = topology::complete(2);
  sim.sensing_graph = topology::edgeless(2);
  sim.params = ProtocolParams::uniform(2, 1.0 / 64, 5, 10, 15.0);
  return sim;
}

Output hidden_nodes(const Context& cx) {
  Output out;
  const auto grid = cx.get<std::vector<double>>("payload_grid");
  const std::int64_t slots = cx.scaled("slots");

  std::vector<Metrics> fixed(grid.size());
  parallel_for(grid.size(), cx.opt.jobs, [&](std::size_t i) {
    SimConfig sim = hidden_pair();
    sim.r.assign(2, std::log(grid[i] / sim.params.T0));
    sim.n_slots = slots;
    sim.seed = cx.seed(i);
    fixed[i] = run_hidden_node(sim);
  });

  Table sweep{"hidden_fixed_payload", {"payload", "service_1", "service_2", "service_mean", "failed_1", "failed_2"}, {}};
  double peak = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Metrics& m = fixed[i];
    const double s = 0.5 * (m.service_rate[0] + m.service_rate[1]);
    if (s > peak) {
      peak = s;
      arg = i;
    }
    sweep.add({cell(grid[i]), cell(m.service_rate[0]), cell(m.service_rate[1]), cell(s), cell(m.failed[0]),
               cell(m.failed[1])});
  }
  const double last = 0.5 * (fixed.back().service_rate[0] + fixed.back().service_rate[1]);
  out.checks.push_back(within("peak per-link service rate", peak, cx.get<double>("peak") - cx.get<double>("peak_abs_tol"),
                              cx.get<double>("peak") + cx.get<double>("peak_abs_tol"),
                              "at payload " + cell(grid[arg])));
  out.checks.push_back(within("drop from peak to largest payload", peak - last, cx.get<double>("min_decline"), kInf));

  // Adaptive runs from two starting payloads.
  ControllerConfig ctl;
  ctl.r_min = 0.0;
  ctl.r_max = cx.get<double>("r_max");
  ctl.schedule = harmonic_from(cx.spec.at("step"));
  ctl.periods = cx.scaled("periods");
  ctl.tail_periods = ctl.periods / 4;
  ctl.record_every = std::max<std::int64_t>(1, ctl.periods / 400);
  const std::vector<double> starts{cx.get<double>("low_start_payload"), cx.get<double>("high_start_payload")};
  std::vector<AdaptiveResult> runs(2);
  parallel_for(2, cx.opt.jobs, [&](std::size_t i) {
    SimConfig sim = hidden_pair();
    sim.lambda.assign(2, cx.get<double>("lambda"));
    sim.seed = cx.seed(100 + i);
    ControllerConfig c = ctl;
    c.r0 = std::vector<double>(2, std::log(starts[i] / sim.params.T0));
    runs[i] = run_adaptive(sim, c);
  });
  Table traj{"hidden_adaptive", {"start_payload", "period", "link", "payload_mean", "service", "arrival"}, {}};
  for (std::size_t i = 0; i < 2; ++i) {
    for (const auto& rec : runs[i].trajectory.records) {
      for (int k = 0; k < 2; ++k) {
        traj.add({cell(starts[i]), cell(rec.period), cell(k + 1), cell(rec.payload_mean[k]), cell(rec.service[k]),
                  cell(rec.arrival[k])});
      }
    }
  }
  const double t0 = 15.0;
  for (int k = 0; k < 2; ++k) {
    const double low = t0 * std::exp(runs[0].trajectory.tail_mean_r[k]);
    out.checks.push_back(relative("link " + std::to_string(k + 1) + " settles from payload " + cell(starts[0]), low,
                                  cx.get<double>("converged_payload"), cx.get<double>("converged_rel_tol"),
                                  "tail mean payload"));
  }
  for (int k = 0; k < 2; ++k) {
    out.checks.push_back(within("link " + std::to_string(k + 1) + " runs to r_max from payload " + cell(starts[1]),
                                runs[1].trajectory.tail_mean_r[k], ctl.r_max - cx.get<double>("diverged_margin"),
                                ctl.upper_bound(), "tail mean r"));
  }
  out.tables = {std::move(sweep), std::move(traj)};
  return out;
}

// ---------------------------------------------------------------------------

Output lattice(const Context& cx, const ConflictGraph& g, const std::string& name) {
  Output out;
  const auto payloads = cx.get<std::vector<double>>("payloads");
  const int link = cx.get<int>("window_link");
  if (link < 1 || link > g.num_links()) throw ConfigError("window_link out of range");
  const std::int64_t slots = cx.scaled("slots");

  std::vector<Metrics> runs(payloads.size());
  parallel_for(payloads.size(), cx.opt.jobs, [&](std::size_t i) {
    SimConfig sim;
    sim.graph = g;
    sim.params = ProtocolParams::uniform(g.num_links(), 1.0 / 16, 5, 10, 15.0);
    sim.r.assign(static_cast<std::size_t>(g.num_links()), std::log(payloads[i] / sim.params.T0));
    sim.n_slots = slots;
    sim.window_links = {link - 1};
    sim.seed = cx.seed(i);
    runs[i] = run(sim);
  });

  Table windows{name + "_windows", {"payload", "window", "throughput"}, {}};
  Table summary{name, {"payload", "windows", "mean", "std", "service_rate"}, {}};
  std::vector<double> stds;
  for (std::size_t i = 0; i < payloads.size(); ++i) {
    const auto& w = runs[i].window_throughput.front();
    RunningStats st;
    for (std::size_t j = 0; j < w.size(); ++j) {
      st.add(w[j]);
      windows.add({cell(payloads[i]), cell(static_cast<std::int64_t>(j)), cell(w[j])});
    }
    stds.push_back(st.stddev());
    summary.add({cell(payloads[i]), cell(st.count), cell(st.mean), cell(st.stddev()),
                 cell(runs[i].service_rate[static_cast<std::size_t>(link - 1)])});
  }
  for (std::size_t i = 1; i < payloads.size(); ++i) {
    out.checks.push_back(within("link " + std::to_string(link) + " window std grows from payload " +
                                    cell(payloads[i - 1]) + " to " + cell(payloads[i]),
                                stds[i] - stds[i - 1], 0.0, kInf, "difference of standard deviations"));
  }
  out.tables = {std::move(summary), std::move(windows)};
  return out;
}

}  // namespace

Output reproduce(const std::string& target, const Options& opt) {
  if (std::find(targets().begin(), targets().end(), target) == targets().end()) {
    throw ConfigError("unknown reproduce target '" + target + "'");
  }
  if (!(opt.scale > 0.0)) throw ConfigError("scale must be positive");
  const std::string path = opt.expectations_path.empty() ? default_expectations_path() : opt.expectations_path;
  json doc;
  try {
    doc = json::parse(config::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("expectations file '" + path + "': " + e.what());
  }
  if (!doc.contains(target)) throw ConfigError("expectations file has no entry for '" + target + "'");
  const Context cx{doc.at(target), opt};

  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  if (target == "fig8") {
    out = fig8(cx);
  } else if (target == "table_st") {
    out = table_st(cx);
  } else if (target == "table_R") {
    out = table_r(cx);
  } else if (target == "hidden_nodes") {
    out = hidden_nodes(cx);
  } else if (target == "lattice_1d") {
    out = lattice(cx, topology::line(cx.get<int>("links"), cx.get<int>("hops")), target);
  } else {
    out = lattice(cx, topology::lattice(cx.get<int>("rows"), cx.get<int>("cols")), target);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.target = target;
  out.config = json{{"target", target},
                    {"seed", opt.seed},
                    {"scale", opt.scale},
                    {"expectations_file", path},
                    {"expectations", cx.spec}}
                   .dump(2);
  return out;
}

}  // namespace csma::experiments
