#pragma once

#include <span>
#include <string>
#include <vector>

#include "csma/adaptive.hpp"
#include "csma/conflict_graph.hpp"
#include "csma/simulator.hpp"

namespace csma::config {

// Named graphs: "seven_link", "path:K", "complete:K", "edgeless:K",
// "line:K:HOPS", "lattice:ROWS:COLS". Throws ConfigError for unknown names.
ConflictGraph builtin_graph(const std::string& name);

// "builtin:<name>", an inline JSON object, or a path to a graph JSON file
// (relative paths resolve against base_dir).
ConflictGraph resolve_graph(const std::string& spec, const std::string& base_dir = ".");

// Applies "a.b.c=value" assignments to a JSON document. Values are parsed as
// JSON when possible and kept as strings otherwise. Numeric segments index arrays.
std::string apply_overrides(const std::string& json_text, std::span<const std::string> overrides);

// A fully resolved run description.
//
//   {
//     "graph": "builtin:seven_link" | {"num_links": K, "edges": [[i, j], ...]} | "file.json",
//     "sensing_graph": (same forms, optional),
//     "params": {"p": 0.0625 | [...], "gamma": 5, "tau_prime": 10, "T0": 15},
//     "r": [...] | x,  or  "payload": [...] | x   (mean payload in slots),
//     "lambda": [...] | x,  or  "rho": x with "lambda_bar": [...],
//     "sim": {"M", "seed", "n_slots", "dummy_bits", "slot_us", "initial_queue",
//             "hidden_policy", "window_ms", "window_links" (1-based),
//             "record_periods", "delay_warmup", "check_invariants"},
//     "controller": {"r_min", "r_max", "delta", "M", "lambda_bar_cap", "periods",
//                    "tail_periods", "record_every", "r0",
//                    "step": {"kind": "harmonic", "c", "a", "d"} | {"kind": "reciprocal"}
//                          | {"kind": "constant", "alpha"}}
//   }
struct Experiment {
  SimConfig sim;
  ControllerConfig controller;
  std::vector<double> lambda_bar;  // set when lambda came from rho * lambda_bar
  std::string resolved;            // canonical JSON of everything above
};

Experiment parse_experiment(const std::string& json_text, const std::string& base_dir = ".");

std::string read_file(const std::string& path);

}  // namespace csma::config
