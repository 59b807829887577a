#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csma/sweep.hpp"
#include "csma/table.hpp"

namespace csma::experiments {

// A scalar compared against a closed band [lo, hi].
struct Check {
  std::string name;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
  std::string detail;
};

Check within(std::string name, double value, double lo, double hi, std::string detail = "");
Check relative(std::string name, double value, double reference, double rel_tol, std::string detail = "");

struct Output {
  std::string target;
  std::string config;  // JSON: model parameters, run lengths, seeds, expectations used
  std::vector<Table> tables;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool passed() const;
};

struct Options {
  std::uint64_t seed = 1;
  // Multiplies run lengths (periods, slots, seed counts are kept). Values below 1
  // give quick smoke runs whose checks are not expected to pass.
  double scale = 1.0;
  unsigned jobs = default_jobs();
  std::string expectations_path;  // empty: default_expectations_path()
};

// Checked-in tolerance file next to the sources, or its installed copy.
std::string default_expectations_path();

// fig8, table_st, table_R, hidden_nodes, lattice_1d, lattice_2d
const std::vector<std::string>& targets();

// Throws ConfigError for an unknown target or a malformed expectations file.
Output reproduce(const std::string& target, const Options& opt);

}  // namespace csma::experiments
