#include "csma/sweep.hpp"

#include <sstream>

#include "csma/errors.hpp"
#include "csma/random.hpp"

namespace csma::sweep {

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("grid axis '" + spec + "' must look like key.path=v1,v2,...");
  }
  Axis a;
  a.key = spec.substr(0, eq);
  std::istringstream in(spec.substr(eq + 1));
  std::string v;
  while (std::getline(in, v, ',')) {
    if (v.empty()) throw ConfigError("grid axis '" + a.key + "' has an empty value");
    a.values.push_back(v);
  }
  if (a.values.empty()) throw ConfigError("grid axis '" + a.key + "' has no values");
  return a;
}

Mode parse_mode(const std::string& name) {
  if (name == "simulate") return Mode::kSimulate;
  if (name == "adapt") return Mode::kAdapt;
  throw ConfigError("sweep mode must be 'simulate' or 'adapt', got '" + name + "'");
}

std::vector<Cell> expand(std::span<const Axis> axes, std::uint64_t master_seed) {
  if (axes.empty()) throw ConfigError("sweep grid is empty");
  std::size_t total = 1;
  for (const Axis& a : axes) {
    if (a.values.empty()) throw ConfigError("grid axis '" + a.key + "' has no values");
    total *= a.values.size();
  }
  std::vector<Cell> cells(total);
  for (std::size_t i = 0; i < total; ++i) {
    Cell& c = cells[i];
    c.index = i;
    c.seed = derive_seed(master_seed, i);
    std::size_t rest = i;
    c.overrides.resize(axes.size());
    for (std::size_t d = axes.size(); d-- > 0;) {
      const Axis& a = axes[d];
      const std::string& v = a.values[rest % a.values.size()];
      rest /= a.values.size();
      c.overrides[d] = a.key + "=" + v;
      if (a.key == "sim.seed") c.seed = std::stoull(v);
    }
  }
  return cells;
}

std::vector<CellResult> run(const std::string& base_json, std::span<const Axis> axes,
                            const Options& opt) {
  const auto cells = expand(axes, opt.master_seed);
  // Parse everything up front so a bad cell fails before any work starts.
  std::vector<CellResult> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::vector<std::string> ov = cells[i].overrides;
    ov.push_back("sim.seed=" + std::to_string(cells[i].seed));
    out[i].cell = cells[i];
    out[i].experiment = config::parse_experiment(config::apply_overrides(base_json, ov), opt.base_dir);
  }
  parallel_for(out.size(), opt.jobs, [&](std::size_t i) {
    CellResult& r = out[i];
    if (opt.mode == Mode::kAdapt) {
      auto res = run_adaptive(r.experiment.sim, r.experiment.controller);
      r.metrics = std::move(res.metrics);
      r.trajectory = std::move(res.trajectory);
    } else {
      r.metrics = r.experiment.sim.hidden() ? run_hidden_node(r.experiment.sim) : csma::run(r.experiment.sim);
    }
  });
  return out;
}

Table summarize(std::span<const CellResult> results, std::span<const Axis> axes) {
  Table t;
  t.name = "sweep";
  t.columns = {"cell", "seed"};
  for (const Axis& a : axes) t.columns.push_back(a.key);
  for (const char* c : {"link", "service_rate", "real_service_rate", "successes", "delay_mean",
                        "delay_std", "access_intensity", "final_queue", "tail_r"}) {
    t.columns.push_back(c);
  }
  for (const CellResult& r : results) {
    const Metrics& m = r.metrics;
    for (std::size_t k = 0; k < m.service_rate.size(); ++k) {
      std::vector<std::string> row{cell(static_cast<std::uint64_t>(r.cell.index)), cell(r.cell.seed)};
      for (const std::string& ov : r.cell.overrides) row.push_back(ov.substr(ov.find('=') + 1));
      row.push_back(cell(static_cast<int>(k + 1)));
      row.push_back(cell(m.service_rate[k]));
      row.push_back(cell(m.real_service_rate[k]));
      row.push_back(cell(m.successes[k]));
      row.push_back(cell(m.delay[k].mean));
      row.push_back(cell(m.delay[k].stddev()));
      row.push_back(cell(m.access_intensity[k]));
      row.push_back(cell(m.final_queue[k]));
      row.push_back(r.trajectory ? cell(r.trajectory->tail_mean_r[k]) : std::string("nan"));
      t.add(std::move(row));
    }
  }
  return t;
}

}  // namespace csma::sweep
