// Acceptance suite: one PASS/FAIL line per criterion, exit code = number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "csma/errors.hpp"
#include "csma/experiments.hpp"
#include "csma/optimizer.hpp"
#include "csma/oracle.hpp"
#include "csma/simulator.hpp"
#include "csma/stationary.hpp"

using namespace csma;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    pass = false;
    if (!detail.empty()) detail += "; ";
    detail += why;
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Random conflict graph on k links with edge probability 1/2.
ConflictGraph random_graph(int k, std::mt19937_64& rng) {
  std::vector<std::pair<int, int>> edges;
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  return ConflictGraph(k, edges);
}

Verdict oracle_product_form() {
  Verdict v;
  const auto t0 = Clock::now();
  double worst_pf = 0.0, worst_marg = 0.0;
  for (const auto& [name, inst] : oracle::standard_suite()) {
    if (inst.b_max() > 6) continue;
    const auto rep = oracle::verify(inst);
    worst_pf = std::max(worst_pf, rep.max_product_form_error);
    worst_marg = std::max(worst_marg, rep.max_marginal_error);
    if (rep.max_product_form_error > 1e-9 || rep.max_marginal_error > 1e-9) v.fail(name);
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) v.fail("too slow");
  v.detail = fmt("max state error %.2e, max marginal error %.2e, %.2f s", worst_pf, worst_marg, secs) +
             (v.detail.empty() ? "" : " [" + v.detail + "]");
  return v;
}

Verdict oracle_balance() {
  Verdict v;
  double worst = 0.0;
  for (const auto& [name, inst] : oracle::standard_suite()) {
    const auto rep = oracle::verify(inst);
    worst = std::max(worst, rep.max_balance_error);
    if (!(rep.max_balance_error < 1e-12)) v.fail(name + " balance");
    if (!rep.involution) v.fail(name + " involution");
  }
  v.detail = fmt("max balance error %.2e", worst) + (v.detail.empty() ? "" : " [" + v.detail + "]");
  return v;
}

Verdict gradient_fd() {
  Verdict v;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> links(1, 6);
  std::uniform_real_distribution<double> ur(-2.0, 3.0), ul(0.01, 0.3), up(0.02, 0.3);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = links(rng);
    const auto g = random_graph(k, rng);
    ProtocolParams params = ProtocolParams::uniform(k, up(rng), 5, 10, 15.0);
    const ProductForm pf(g, params);
    std::vector<double> r(k), lam(k);
    for (int i = 0; i < k; ++i) {
      r[i] = ur(rng);
      lam[i] = ul(rng) / k;
    }
    const auto ll = pf.log_likelihood(r, lam);
    for (int i = 0; i < k; ++i) {
      auto rp = r, rm = r;
      rp[i] += 1e-5;
      rm[i] -= 1e-5;
      const double fd = (pf.log_likelihood(rp, lam).value - pf.log_likelihood(rm, lam).value) / 2e-5;
      const double rel = std::abs(fd - ll.gradient[i]) / std::max(std::abs(ll.gradient[i]), 1e-3);
      worst = std::max(worst, rel);
    }
  }
  if (!(worst < 1e-6)) v.fail("relative error too large");
  v.detail = fmt("50 instances, worst relative error %.2e", worst);
  return v;
}

Verdict rstar_instances() {
  Verdict v;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> links(1, 6);
  std::uniform_real_distribution<double> u01(0.0, 1.0), ustart(-2.0, 4.0);
  double worst_res = 0.0, worst_gap = 0.0;
  int done = 0;
  while (done < 20) {
    const int k = links(rng);
    const auto g = random_graph(k, rng);
    const auto params = ProtocolParams::uniform(k, 1.0 / 16, 5, 10, 15.0);
    // A random mixture of independent sets, shrunk into the interior.
    const auto sets = independent_sets(g);
    std::vector<double> w(sets.size());
    double tot = 0.0;
    for (auto& x : w) tot += (x = u01(rng));
    std::vector<double> lam(k, 0.0);
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (int j = 0; j < k; ++j)
        if (sets[i].active(j)) lam[j] += 0.85 * w[i] / tot;
    if (std::any_of(lam.begin(), lam.end(), [](double x) { return x < 0.01; })) continue;
    if (feasibility(g, lam).status != Feasibility::kStrictlyFeasible) continue;
    RStarOptions a, b;
    a.start = std::vector<double>(k, 0.0);
    b.start = std::vector<double>(k);
    for (auto& x : *b.start) x = ustart(rng);
    try {
      const auto ra = solve_rstar(g, params, lam, a);
      const auto rb = solve_rstar(g, params, lam, b);
      const auto lb = rstar_lower_bound(params, lam);
      worst_res = std::max({worst_res, ra.residual, rb.residual});
      for (int j = 0; j < k; ++j) {
        worst_gap = std::max(worst_gap, std::abs(ra.r_star[j] - rb.r_star[j]));
        if (ra.r_star[j] < lb[j]) v.fail("lower bound violated");
      }
    } catch (const Error& e) {
      v.fail(e.what());
    }
    ++done;
  }
  if (!(worst_res < 1e-8)) v.fail("residual");
  if (!(worst_gap < 1e-6)) v.fail("starts disagree");
  v.detail = fmt("20 instances, worst residual %.2e, worst start gap %.2e", worst_res, worst_gap) +
             (v.detail.empty() ? "" : " [" + v.detail + "]");
  return v;
}

Verdict simulator_fidelity() {
  Verdict v;
  struct Case {
    ConflictGraph g;
    std::vector<double> r;
  };
  const Case cases[] = {{topology::complete(1), {std::log(2.0)}}, {topology::complete(2), {0.5, 1.0}}};
  std::string out;
  for (const auto& c : cases) {
    const int k = c.g.num_links();
    SimConfig sim;
    sim.graph = c.g;
    sim.params = ProtocolParams::uniform(k, 1.0 / 16, 5, 10, 15.0);
    sim.r = c.r;
    sim.n_slots = 10'000'000;
    sim.seed = 5;
    const auto t0 = Clock::now();
    const auto m = run(sim);
    const double secs = seconds_since(t0);
    const auto exact = onoff_distribution(sim.graph, sim.params, sim.r);
    const auto s = service_rates(sim.graph, sim.params, sim.r);
    double worst = 0.0, tv = 0.0;
    for (int j = 0; j < k; ++j) worst = std::max(worst, std::abs(m.service_rate[j] - s[j]));
    for (std::size_t x = 0; x < exact.prob.size(); ++x)
      tv += std::abs(static_cast<double>(m.occupancy[x]) / m.n_slots - exact.prob[x]);
    tv /= 2;
    if (!(worst <= 0.005)) v.fail("rate error on K=" + std::to_string(k));
    if (!(tv < 0.01)) v.fail("TV on K=" + std::to_string(k));
    if (secs >= 60.0) v.fail("slow on K=" + std::to_string(k));
    out += fmt("K=%g: rate error %.4f, TV %.4f", k, worst, tv) + fmt(", %.1f s  ", secs);
  }
  v.detail = out + (v.detail.empty() ? "" : "[" + v.detail + "]");
  return v;
}

Verdict reproduce(const std::string& target) {
  Verdict v;
  const auto out = experiments::reproduce(target, {});
  int ok = 0;
  for (const auto& c : out.checks) {
    if (c.pass) {
      ++ok;
    } else {
      v.fail(c.name + fmt(" = %.5g outside [%.5g, %.5g]", c.value, c.lo, c.hi));
    }
  }
  v.detail = std::to_string(ok) + "/" + std::to_string(out.checks.size()) + " checks" +
             fmt(", %.1f s", out.seconds) + (v.detail.empty() ? "" : " [" + v.detail + "]");
  return v;
}

Verdict boundary_bound() {
  Verdict v;
  struct Case {
    ConflictGraph g;
    std::vector<double> bar;
  };
  const Case cases[] = {{topology::complete(1), {1.0}}, {topology::complete(2), {0.5, 0.5}}};
  std::string out;
  for (const auto& c : cases) {
    const int k = c.g.num_links();
    const auto params = ProtocolParams::uniform(k, 1.0 / 16, 5, 10, 15.0);
    double max_ratio = 0.0, first_ratio = 0.0;
    for (double eps : {0.5, 0.1, 0.01, 0.001}) {
      std::vector<double> lam(c.bar);
      for (auto& x : lam) x *= 1 - eps;
      const auto rs = solve_rstar(c.g, params, lam).r_star;
      const auto bound = rstar_upper_bound(c.g, params, c.bar, eps);
      const double top = *std::max_element(rs.begin(), rs.end());
      if (!(top <= bound.value)) v.fail(fmt("K=%g eps=%g: r* %.4f above bound", k, eps, top));
      const double ratio = bound.value / std::log(1 / eps);
      if (eps == 0.1) first_ratio = ratio;
      if (eps <= 0.1) max_ratio = std::max(max_ratio, ratio);
    }
    // Bounded: the ratio does not grow once eps is small.
    if (!(std::isfinite(max_ratio) && max_ratio <= first_ratio + 1e-12)) v.fail(fmt("K=%g ratio grows", k));
    out += fmt("K=%g: max bound/log(1/eps) %.3f  ", k, max_ratio);
  }
  v.detail = out + (v.detail.empty() ? "" : "[" + v.detail + "]");
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"exact chain matches product form", oracle_product_form},
      {"detailed balance and involution", oracle_balance},
      {"log-likelihood gradient", gradient_fd},
      {"r* solver", rstar_instances},
      {"simulator vs stationary law", simulator_fidelity},
      {"adaptive trajectories (fig8)", [] { return reproduce("fig8"); }},
      {"access intensities (table_R)", [] { return reproduce("table_R"); }},
      {"access delay (table_st)", [] { return reproduce("table_st"); }},
      {"hidden nodes", [] { return reproduce("hidden_nodes"); }},
      {"boundary bound", boundary_bound},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.fail(std::string("exception: ") + e.what());
    }
    failures += !v.pass;
    std::printf("%s criterion %zu: %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                v.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
