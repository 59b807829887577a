#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "csma/adaptive.hpp"
#include "csma/config.hpp"
#include "csma/simulator.hpp"
#include "csma/table.hpp"

namespace csma {

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Calls f(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace sweep {

// One grid dimension, parsed from "key.path=v1,v2,...".
struct Axis {
  std::string key;
  std::vector<std::string> values;
};
Axis parse_axis(const std::string& spec);

enum class Mode { kSimulate, kAdapt };
Mode parse_mode(const std::string& name);

struct Cell {
  std::size_t index = 0;
  std::vector<std::string> overrides;  // one "key=value" per axis
  std::uint64_t seed = 0;              // derive_seed(master, index) unless an axis sets sim.seed
};

// Cartesian product, last axis fastest. Throws ConfigError on an empty grid.
std::vector<Cell> expand(std::span<const Axis> axes, std::uint64_t master_seed);

struct CellResult {
  Cell cell;
  config::Experiment experiment;
  Metrics metrics;
  std::optional<Trajectory> trajectory;
};

struct Options {
  Mode mode = Mode::kSimulate;
  std::uint64_t master_seed = 1;
  unsigned jobs = default_jobs();
  std::string base_dir = ".";
};

// Runs every cell of the grid on top of base_json. Results are in cell order
// and independent of `jobs`.
std::vector<CellResult> run(const std::string& base_json, std::span<const Axis> axes,
                            const Options& opt);

// One row per (cell, link).
Table summarize(std::span<const CellResult> results, std::span<const Axis> axes);

}  // namespace sweep
}  // namespace csma
