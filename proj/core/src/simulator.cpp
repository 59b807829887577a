#include "csma/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "csma/errors.hpp"

namespace csma {

namespace {

constexpr int kOccupancyCap = 20;

}  // namespace

LinkMask ChainState::x() const {
  LinkMask m = 0;
  for (int k = 0; k < num_links(); ++k) {
    if (links[k].active) m |= link_bit(k);
  }
  return m;
}

bool ChainState::in_payload(int k) const {
  const auto& l = links[k];
  return l.active && !l.collision && l.a <= l.sent;
}

std::string to_string(HiddenPolicy p) {
  return p == HiddenPolicy::kProbeTruncation ? "probe_truncation" : "run_to_end";
}

HiddenPolicy parse_hidden_policy(const std::string& name) {
  if (name == "probe_truncation") return HiddenPolicy::kProbeTruncation;
  if (name == "run_to_end") return HiddenPolicy::kRunToEnd;
  throw ConfigError("unknown hidden-node policy '" + name +
                    "' (expected probe_truncation or run_to_end)");
}

StepEvents step(ChainState& st, const StepInputs& in, RandomStreams& rng) {
  const int k_links = st.num_links();
  const ConflictGraph& g = *in.graph;
  const ConflictGraph& sense = *in.sensing;
  StepEvents ev;

  LinkMask continuing = 0;
  for (int k = 0; k < k_links; ++k) {
    auto& l = st.links[k];
    if (!l.active) continue;
    if (l.a > 1) {
      --l.a;
      continuing |= link_bit(k);
    } else {
      l = LinkState{};
    }
  }

  LinkMask blocked = continuing;
  for (LinkMask m = continuing; m != 0; m &= m - 1) blocked |= sense.neighbors(std::countr_zero(m));

  LinkMask attempters = 0;
  for (int k = 0; k < k_links; ++k) {
    if (has_link(blocked, k) || !has_link(in.eligible, k)) continue;
    if (uniform01(rng.link(k)) < in.p[k]) attempters |= link_bit(k);
  }
  if (attempters == 0) return ev;

  LinkMask victims = 0;
  for (LinkMask comp : classify(g, attempters).components) {
    if (std::popcount(comp) > 1) {
      ++ev.collision_components;
      ev.started_collision |= comp;
      for (LinkMask m = comp; m != 0; m &= m - 1) {
        const int k = std::countr_zero(m);
        auto& l = st.links[k];
        l = LinkState{};
        l.active = true;
        l.collision = true;
        l.b = l.a = in.gamma;
        l.start = in.slot;
        victims |= g.neighbors(k) & continuing;
      }
      continue;
    }
    const int k = std::countr_zero(comp);
    auto& l = st.links[k];
    l = LinkState{};
    l.active = true;
    l.start = in.slot;
    // Drawn for every lone start so the stream position does not depend on
    // what other links are doing.
    l.payload = sample_payload(in.payload_means[k], rng.link(k));
    l.sent = l.payload;
    if (!in.queue.empty()) {
      l.sent = static_cast<int>(std::min<std::int64_t>(l.payload, in.queue[k]));
    }
    const LinkMask overlap = g.neighbors(k) & continuing;
    victims |= overlap;
    if (overlap != 0 && in.policy == HiddenPolicy::kProbeTruncation) {
      l.collision = true;
      l.corrupted = true;
      l.b = l.a = in.gamma;
      ev.started_collision |= comp;
    } else {
      l.b = l.a = in.tau_prime + l.sent;
      l.corrupted = overlap != 0;
      if (overlap == 0) ev.started_success |= comp;
    }
  }
  for (LinkMask m = victims; m != 0; m &= m - 1) st.links[std::countr_zero(m)].corrupted = true;
  return ev;
}

void check_chain_invariants(const ChainState& st, const ConflictGraph& g, int gamma) {
  const int k_links = st.num_links();
  for (int k = 0; k < k_links; ++k) {
    const auto& l = st.links[k];
    if (!l.active) continue;
    if (l.a < 1 || l.a > l.b) {
      throw InvariantViolation("link " + std::to_string(k + 1) + " has a = " + std::to_string(l.a) +
                               " outside [1, b = " + std::to_string(l.b) + "]");
    }
    if (l.collision && l.b != gamma) {
      throw InvariantViolation("collision on link " + std::to_string(k + 1) +
                               " does not last gamma slots");
    }
  }
  for (LinkMask comp : classify(g, st.x()).components) {
    const int first = std::countr_zero(comp);
    const auto& ref = st.links[first];
    if (std::popcount(comp) == 1) {
      if (ref.collision) {
        throw InvariantViolation("isolated link " + std::to_string(first + 1) +
                                 " is marked as colliding");
      }
      continue;
    }
    for (LinkMask m = comp; m != 0; m &= m - 1) {
      const auto& l = st.links[std::countr_zero(m)];
      if (!l.collision || l.a != ref.a || l.b != gamma) {
        throw InvariantViolation("collision component starting at link " +
                                 std::to_string(first + 1) + " is not synchronised");
      }
    }
  }
}

void RunningStats::add(double v) {
  ++count;
  const double d = v - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (v - mean);
}

double RunningStats::variance() const {
  return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
}

double RunningStats::stddev() const { return std::sqrt(variance()); }

std::int64_t SimConfig::window_slots() const {
  return std::max<std::int64_t>(1, std::llround(window_ms * 1000.0 / slot_us));
}

std::vector<double> SimConfig::payload_means() const {
  const int k = graph.num_links();
  std::vector<double> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    const double ri = r.empty() ? 0.0 : r[i];
    out[i] = std::max(1.0, params.payload_mean(ri));
  }
  return out;
}

void SimConfig::validate() const {
  const int k = graph.num_links();
  if (k < 1) throw ConfigError("the graph needs at least one link");
  params.validate(k);
  if (sensing_graph) {
    if (sensing_graph->num_links() != k) {
      throw DimensionError("sensing graph has a different number of links");
    }
    if (!sensing_graph->is_subgraph_of(graph)) {
      throw ConfigError("sensing edges must be a subset of the interference edges");
    }
  }
  if (!r.empty()) {
    if (r.size() != static_cast<std::size_t>(k)) throw DimensionError("r has the wrong length");
    for (double v : r) {
      if (!std::isfinite(v)) throw DomainError("r must be finite");
    }
  }
  if (!lambda.empty()) {
    if (lambda.size() != static_cast<std::size_t>(k)) {
      throw DimensionError("lambda has the wrong length");
    }
    for (double v : lambda) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("arrival rates must lie in [0,1]");
    }
  }
  if (M < 1) throw ConfigError("M must be at least 1");
  if (n_slots < 0) throw ConfigError("n_slots must be non-negative");
  if (!(slot_us > 0.0)) throw ConfigError("slot_us must be positive");
  if (!(window_ms > 0.0)) throw ConfigError("window_ms must be positive");
  if (initial_queue < 0) throw ConfigError("initial_queue must be non-negative");
  if (delay_warmup < 0) throw ConfigError("delay_warmup must be non-negative");
  for (int w : window_links) {
    if (w < 0 || w >= k) throw ConfigError("tracked window link out of range");
  }
}

Simulator::Simulator(SimConfig cfg)
    : cfg_(std::move(cfg)),
      k_(cfg_.graph.num_links()),
      hidden_(cfg_.hidden()),
      state_(k_),
      rng_(cfg_.seed, k_) {
  cfg_.validate();
  means_ = cfg_.payload_means();
  queue_.assign(k_, cfg_.initial_queue);
  period_credit_.assign(k_, 0);
  period_arrival_.assign(k_, 0);
  last_success_start_.assign(k_, -1);
  window_credit_.assign(cfg_.window_links.size(), 0);

  m_.payload_slots.assign(k_, 0);
  m_.successes.assign(k_, 0);
  m_.failed.assign(k_, 0);
  m_.delay.assign(k_, {});
  if (cfg_.keep_delay_samples) m_.delay_samples.assign(k_, {});
  if (k_ <= kOccupancyCap) m_.occupancy.assign(std::size_t{1} << k_, 0);
  m_.window_links = cfg_.window_links;
  m_.window_throughput.assign(cfg_.window_links.size(), {});
  m_.real_service_rate.assign(k_, 0.0);
}

void Simulator::set_payload_means(std::span<const double> means) {
  if (means.size() != static_cast<std::size_t>(k_)) {
    throw DimensionError("payload mean vector has the wrong length");
  }
  for (int k = 0; k < k_; ++k) {
    if (!std::isfinite(means[k])) throw DomainError("payload means must be finite");
    means_[k] = std::max(1.0, means[k]);
  }
}

void Simulator::advance() {
  period_closed_ = false;
  const std::int64_t t = slot_;
  if (t % cfg_.M == 0 && !cfg_.lambda.empty()) {
    for (int k = 0; k < k_; ++k) {
      if (uniform01(rng_.arrivals(k)) < cfg_.lambda[k]) {
        queue_[k] += cfg_.M;
        period_arrival_[k] += cfg_.M;
      }
    }
  }

  StepInputs in;
  in.graph = &cfg_.graph;
  in.sensing = &cfg_.sensing();
  in.p = cfg_.params.p;
  in.gamma = cfg_.params.gamma;
  in.tau_prime = cfg_.params.tau_prime;
  in.payload_means = means_;
  in.policy = cfg_.hidden_policy;
  in.slot = t;
  if (!cfg_.dummy_bits) {
    LinkMask eligible = 0;
    for (int k = 0; k < k_; ++k) {
      if (queue_[k] > 0) eligible |= link_bit(k);
    }
    in.eligible = eligible;
    in.queue = queue_;
  }
  const StepEvents ev = step(state_, in, rng_);
  if (cfg_.check_invariants && !hidden_) check_chain_invariants(state_, cfg_.graph, cfg_.params.gamma);
  account_slot(ev);

  ++slot_;
  if (slot_ % cfg_.M == 0) {
    ++period_index_;
    last_period_.period = period_index_;
    last_period_.service.resize(k_);
    last_period_.arrival.resize(k_);
    for (int k = 0; k < k_; ++k) {
      last_period_.service[k] = static_cast<double>(period_credit_[k]) / cfg_.M;
      last_period_.arrival[k] = static_cast<double>(period_arrival_[k]) / cfg_.M;
    }
    last_period_.queue = queue_;
    last_period_.payload_mean = means_;
    if (cfg_.record_periods) m_.periods.push_back(last_period_);
    std::fill(period_credit_.begin(), period_credit_.end(), 0);
    std::fill(period_arrival_.begin(), period_arrival_.end(), 0);
    period_closed_ = true;
  }
  if (!window_credit_.empty() && slot_ % cfg_.window_slots() == 0) {
    const double w = static_cast<double>(cfg_.window_slots());
    for (std::size_t i = 0; i < window_credit_.size(); ++i) {
      m_.window_throughput[i].push_back(static_cast<double>(window_credit_[i]) / w);
      window_credit_[i] = 0;
    }
    ++window_;
  }
}

void Simulator::run(std::int64_t slots) {
  for (std::int64_t i = 0; i < slots; ++i) advance();
}

void Simulator::credit(int k, std::int64_t slots, std::int64_t real) {
  m_.payload_slots[k] += slots;
  m_.real_service_rate[k] += static_cast<double>(real);
  for (std::size_t i = 0; i < cfg_.window_links.size(); ++i) {
    if (cfg_.window_links[i] == k) window_credit_[i] += slots;
  }
}

void Simulator::complete(int k) {
  // Hidden-node mode: a transmission is judged when its last slot is reached.
  const auto& l = state_.links[k];
  if (l.collision || l.corrupted) {
    if (!l.collision || l.corrupted) ++m_.failed[k];
    return;
  }
  ++m_.successes[k];
  const std::int64_t prev = last_success_start_[k];
  if (prev >= cfg_.delay_warmup && prev >= 0) {
    m_.delay[k].add(static_cast<double>(l.start - prev));
    if (cfg_.keep_delay_samples) m_.delay_samples[k].push_back(l.start - prev);
  }
  last_success_start_[k] = l.start;
  const std::int64_t real = cfg_.dummy_bits ? std::min<std::int64_t>(queue_[k], l.sent) : l.sent;
  queue_[k] -= real;
  period_credit_[k] += l.payload;
  credit(k, l.sent, real);
}

void Simulator::account_slot(const StepEvents& ev) {
  const LinkMask x = state_.x();
  if (!m_.occupancy.empty()) ++m_.occupancy[x];
  m_.collisions += ev.collision_components;

  if (hidden_) {
    for (LinkMask m = x; m != 0; m &= m - 1) {
      const int k = std::countr_zero(m);
      if (state_.links[k].a == 1) complete(k);
    }
    return;
  }

  for (LinkMask m = ev.started_success; m != 0; m &= m - 1) {
    const int k = std::countr_zero(m);
    ++m_.successes[k];
    const std::int64_t prev = last_success_start_[k];
    if (prev >= 0 && prev >= cfg_.delay_warmup) {
      m_.delay[k].add(static_cast<double>(slot_ - prev));
      if (cfg_.keep_delay_samples) m_.delay_samples[k].push_back(slot_ - prev);
    }
    last_success_start_[k] = slot_;
  }
  for (LinkMask m = x; m != 0; m &= m - 1) {
    const int k = std::countr_zero(m);
    const auto& l = state_.links[k];
    if (l.collision || l.a > l.sent) continue;
    std::int64_t real = 1;
    if (cfg_.dummy_bits && queue_[k] == 0) real = 0;
    queue_[k] -= real;
    ++period_credit_[k];
    credit(k, 1, real);
    // Without dummy bits the controller is still credited the scheduled payload.
    if (l.a == 1 && l.payload > l.sent) period_credit_[k] += l.payload - l.sent;
  }
}

Metrics Simulator::finish() {
  Metrics out = m_;
  out.n_slots = slot_;
  const double n = slot_ > 0 ? static_cast<double>(slot_) : 1.0;
  out.service_rate.resize(k_);
  for (int k = 0; k < k_; ++k) {
    out.service_rate[k] = static_cast<double>(m_.payload_slots[k]) / n;
    out.real_service_rate[k] = m_.real_service_rate[k] / n;
  }
  out.access_intensity.resize(k_);
  for (int k = 0; k < k_; ++k) {
    out.access_intensity[k] = means_[k] / (1.0 / cfg_.params.p[k] - 1.0);
  }
  out.final_queue = queue_;
  return out;
}

Metrics run(const SimConfig& cfg) {
  Simulator sim(cfg);
  sim.run(cfg.n_slots);
  return sim.finish();
}

Metrics run_hidden_node(const SimConfig& cfg) {
  Simulator sim(cfg);
  sim.run(cfg.n_slots);
  Metrics m = sim.finish();
  if (!cfg.hidden()) {
    m.warnings.push_back(
        "sensing graph equals the interference graph; hidden-node run degenerates to a plain run");
  }
  return m;
}

}  // namespace csma
