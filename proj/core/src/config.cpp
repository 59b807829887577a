#include "csma/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csma/errors.hpp"

namespace csma::config {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

int to_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected an integer for " + what + ", got '" + s + "'");
  }
}

// Scalar or per-link array.
std::vector<double> vector_of(const json& j, int k, const std::string& what) {
  if (j.is_number()) return std::vector<double>(static_cast<std::size_t>(k), j.get<double>());
  if (!j.is_array()) throw ConfigError(what + " must be a number or an array");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw ConfigError(what + " entries must be numbers");
    out.push_back(v.get<double>());
  }
  if (out.size() != static_cast<std::size_t>(k)) {
    throw DimensionError(what + " has " + std::to_string(out.size()) + " entries for " +
                         std::to_string(k) + " links");
  }
  return out;
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

ConflictGraph graph_from(const json& j, const std::string& base_dir) {
  if (j.is_string()) return resolve_graph(j.get<std::string>(), base_dir);
  if (j.is_object()) return parse_graph_json(j.dump());
  throw ConfigError("graph must be a string or an object");
}

json graph_json(const ConflictGraph& g) { return json::parse(graph_to_json(g)); }

json step_json(const StepSchedule& s, const json& original) {
  if (!original.is_null()) return original;
  (void)s;
  return json{{"kind", "harmonic"}, {"c", 0.23}, {"a", 2.0}, {"d", 100.0}};
}

}  // namespace

ConflictGraph builtin_graph(const std::string& name) {
  const auto parts = split(name, ':');
  if (parts.empty()) throw ConfigError("empty builtin graph name");
  const std::string& kind = parts[0];
  auto arg = [&](std::size_t i) {
    if (parts.size() <= i) throw ConfigError("builtin graph '" + name + "' is missing arguments");
    return to_int(parts[i], "graph '" + name + "'");
  };
  if (kind == "seven_link" && parts.size() == 1) return topology::seven_link();
  if (kind == "path" && parts.size() == 2) return topology::path(arg(1));
  if (kind == "complete" && parts.size() == 2) return topology::complete(arg(1));
  if (kind == "edgeless" && parts.size() == 2) return topology::edgeless(arg(1));
  if (kind == "line" && parts.size() == 3) return topology::line(arg(1), arg(2));
  if (kind == "lattice" && parts.size() == 3) return topology::lattice(arg(1), arg(2));
  throw ConfigError("unknown builtin graph '" + name +
                    "' (seven_link, path:K, complete:K, edgeless:K, line:K:H, lattice:R:C)");
}

ConflictGraph resolve_graph(const std::string& spec, const std::string& base_dir) {
  if (spec.rfind("builtin:", 0) == 0) return builtin_graph(spec.substr(8));
  const auto first = spec.find_first_not_of(" \t\n");
  if (first != std::string::npos && spec[first] == '{') return parse_graph_json(spec);
  std::filesystem::path p(spec);
  if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
  return load_graph(p.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string apply_overrides(const std::string& json_text, std::span<const std::string> overrides) {
  json doc;
  try {
    doc = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + ov + "' must look like key.path=value");
    }
    const std::string path = ov.substr(0, eq);
    const std::string raw = ov.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    json* node = &doc;
    const auto segments = split(path, '.');
    for (std::size_t i = 0; i < segments.size(); ++i) {
      const std::string& seg = segments[i];
      if (seg.empty()) throw ConfigError("override '" + ov + "' has an empty path segment");
      if (node->is_array()) {
        const int idx = to_int(seg, "array index in '" + ov + "'");
        if (idx < 0 || static_cast<std::size_t>(idx) >= node->size()) {
          throw ConfigError("override '" + ov + "' indexes past the end of an array");
        }
        node = &(*node)[static_cast<std::size_t>(idx)];
      } else {
        if (node->is_null()) *node = json::object();
        if (!node->is_object()) throw ConfigError("override '" + ov + "' descends into a scalar");
        node = &(*node)[seg];
      }
    }
    *node = value;
  }
  return doc.dump();
}

Experiment parse_experiment(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (!doc.contains("graph")) throw ConfigError("config needs a 'graph'");

  Experiment ex;
  SimConfig& sim = ex.sim;
  sim.graph = graph_from(doc["graph"], base_dir);
  const int k = sim.graph.num_links();
  if (doc.contains("sensing_graph") && !doc["sensing_graph"].is_null()) {
    sim.sensing_graph = graph_from(doc["sensing_graph"], base_dir);
  }

  const json params = doc.value("params", json::object());
  sim.params.p = vector_of(params.value("p", json(1.0 / 16)), k, "params.p");
  sim.params.gamma = get_or<int>(params, "gamma", 5);
  sim.params.tau_prime = get_or<int>(params, "tau_prime", 10);
  sim.params.T0 = get_or<double>(params, "T0", 15.0);
  sim.params.validate(k);

  if (doc.contains("r") && doc.contains("payload")) {
    throw ConfigError("give either 'r' or 'payload', not both");
  }
  if (doc.contains("r")) {
    sim.r = vector_of(doc["r"], k, "r");
  } else if (doc.contains("payload")) {
    const auto payload = vector_of(doc["payload"], k, "payload");
    for (double t : payload) {
      if (!(t > 0.0)) throw DomainError("payload means must be positive");
      sim.r.push_back(std::log(t / sim.params.T0));
    }
  }

  // rho * lambda_bar wins over an explicit lambda, so resolved configs re-parse to themselves.
  if (doc.contains("rho")) {
    if (!doc.contains("lambda_bar")) throw ConfigError("'rho' needs 'lambda_bar'");
    ex.lambda_bar = vector_of(doc["lambda_bar"], k, "lambda_bar");
    const double rho = get_or<double>(doc, "rho", 0.0);
    for (double v : ex.lambda_bar) sim.lambda.push_back(rho * v);
  } else if (doc.contains("lambda")) {
    sim.lambda = vector_of(doc["lambda"], k, "lambda");
  }

  const json s = doc.value("sim", json::object());
  sim.M = get_or<int>(s, "M", 500);
  sim.seed = get_or<std::uint64_t>(s, "seed", 1);
  sim.n_slots = get_or<std::int64_t>(s, "n_slots", 1'000'000);
  sim.dummy_bits = get_or<bool>(s, "dummy_bits", true);
  sim.slot_us = get_or<double>(s, "slot_us", 9.0);
  sim.initial_queue = get_or<std::int64_t>(s, "initial_queue", 0);
  sim.hidden_policy = parse_hidden_policy(get_or<std::string>(s, "hidden_policy", "probe_truncation"));
  sim.window_ms = get_or<double>(s, "window_ms", 50.0);
  for (int w : get_or<std::vector<int>>(s, "window_links", {})) sim.window_links.push_back(w - 1);
  sim.record_periods = get_or<bool>(s, "record_periods", false);
  sim.delay_warmup = get_or<std::int64_t>(s, "delay_warmup", 0);
  sim.check_invariants = get_or<bool>(s, "check_invariants", false);
  sim.validate();

  const json c = doc.value("controller", json::object());
  ControllerConfig& ctl = ex.controller;
  ctl.r_min = get_or<double>(c, "r_min", 0.0);
  ctl.r_max = get_or<double>(c, "r_max", 3.5);
  ctl.delta = get_or<double>(c, "delta", 0.0);
  ctl.M = get_or<int>(c, "M", sim.M);
  ctl.lambda_bar = get_or<double>(c, "lambda_bar_cap", 1.0);
  ctl.periods = get_or<std::int64_t>(c, "periods", 0);
  ctl.tail_periods = get_or<std::int64_t>(c, "tail_periods", 0);
  ctl.record_every = get_or<std::int64_t>(c, "record_every", 1);
  if (c.contains("r0")) ctl.r0 = vector_of(c["r0"], k, "controller.r0");
  json step = c.value("step", json());
  if (!step.is_null()) {
    const std::string kind = get_or<std::string>(step, "kind", "harmonic");
    if (kind == "harmonic") {
      ctl.schedule = StepSchedule::harmonic(get_or<double>(step, "c", 0.23), get_or<double>(step, "a", 2.0),
                                            get_or<double>(step, "d", 100.0));
    } else if (kind == "reciprocal") {
      ctl.schedule = StepSchedule::reciprocal();
    } else if (kind == "constant") {
      ctl.schedule = StepSchedule::constant(get_or<double>(step, "alpha", 0.01));
    } else {
      throw ConfigError("unknown step schedule '" + kind + "'");
    }
  }
  ctl.validate(k);

  json out;
  out["graph"] = graph_json(sim.graph);
  if (sim.sensing_graph) out["sensing_graph"] = graph_json(*sim.sensing_graph);
  out["params"] = {{"p", sim.params.p},
                   {"gamma", sim.params.gamma},
                   {"tau_prime", sim.params.tau_prime},
                   {"T0", sim.params.T0}};
  if (!sim.r.empty()) out["r"] = sim.r;
  if (!sim.lambda.empty()) out["lambda"] = sim.lambda;
  if (!ex.lambda_bar.empty()) {
    out["lambda_bar"] = ex.lambda_bar;
    out["rho"] = doc["rho"];
  }
  std::vector<int> windows;
  for (int w : sim.window_links) windows.push_back(w + 1);
  out["sim"] = {{"M", sim.M},
                {"seed", sim.seed},
                {"n_slots", sim.n_slots},
                {"dummy_bits", sim.dummy_bits},
                {"slot_us", sim.slot_us},
                {"initial_queue", sim.initial_queue},
                {"hidden_policy", to_string(sim.hidden_policy)},
                {"window_ms", sim.window_ms},
                {"window_links", windows},
                {"record_periods", sim.record_periods},
                {"delay_warmup", sim.delay_warmup},
                {"check_invariants", sim.check_invariants}};
  out["controller"] = {{"r_min", ctl.r_min},
                       {"r_max", ctl.r_max},
                       {"delta", ctl.delta},
                       {"M", ctl.M},
                       {"lambda_bar_cap", ctl.lambda_bar},
                       {"periods", ctl.periods},
                       {"tail_periods", ctl.tail_periods},
                       {"record_every", ctl.record_every},
                       {"step", step_json(ctl.schedule, step)}};
  if (ctl.r0) out["controller"]["r0"] = *ctl.r0;
  ex.resolved = out.dump(2);
  return ex;
}

}  // namespace csma::config
