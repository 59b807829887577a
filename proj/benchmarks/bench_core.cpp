#include <cmath>

#include <benchmark/benchmark.h>

#include "csma/optimizer.hpp"
#include "csma/oracle.hpp"
#include "csma/simulator.hpp"
#include "csma/stationary.hpp"

using namespace csma;

namespace {

std::vector<double> seven_link_rates(double rho) {
  std::vector<double> lam;
  for (double v : topology::seven_link_boundary_rates()) lam.push_back(rho * v);
  return lam;
}

void BM_ServiceRates(benchmark::State& state) {
  const int k = static_cast<int>(state.range(0));
  const ProductForm pf(topology::line(k, 2), ProtocolParams::uniform(k, 1.0 / 16, 5, 10, 15.0));
  const std::vector<double> r(k, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(pf.service_rates(r));
}
BENCHMARK(BM_ServiceRates)->Arg(7)->Arg(12)->Arg(16);

void BM_SolveRStar(benchmark::State& state) {
  const auto g = topology::seven_link();
  const auto params = ProtocolParams::uniform(7, 1.0 / 16, 5, 10, 15.0);
  const auto lam = seven_link_rates(state.range(0) / 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(solve_rstar(g, params, lam));
}
BENCHMARK(BM_SolveRStar)->Arg(50)->Arg(80)->Arg(95);

void BM_Feasibility(benchmark::State& state) {
  const auto g = topology::seven_link();
  const auto lam = seven_link_rates(0.8);
  for (auto _ : state) benchmark::DoNotOptimize(feasibility(g, lam));
}
BENCHMARK(BM_Feasibility);

void BM_SimulatorSlots(benchmark::State& state) {
  SimConfig sim;
  sim.graph = topology::seven_link();
  sim.params = ProtocolParams::uniform(7, 1.0 / 16, 5, 10, 15.0);
  sim.r.assign(7, 1.0);
  sim.lambda = seven_link_rates(0.8);
  sim.M = 500;
  sim.n_slots = 1'000'000;
  for (auto _ : state) benchmark::DoNotOptimize(run(sim));
  state.SetItemsProcessed(state.iterations() * sim.n_slots);
}
BENCHMARK(BM_SimulatorSlots)->Unit(benchmark::kMillisecond);

void BM_OracleSuite(benchmark::State& state) {
  const auto suite = oracle::standard_suite();
  for (auto _ : state)
    for (const auto& [name, inst] : suite) benchmark::DoNotOptimize(oracle::verify(inst));
}
BENCHMARK(BM_OracleSuite)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
