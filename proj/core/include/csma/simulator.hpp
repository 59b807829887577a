#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csma/conflict_graph.hpp"
#include "csma/random.hpp"
#include "csma/stationary.hpp"

namespace csma {

// Per-link part of the chain state w = {x, (b_k, a_k)}.
struct LinkState {
  bool active = false;
  bool collision = false;  // current transmission is a probe collision of length gamma
  bool corrupted = false;  // overlapped by a hidden interferer; earns no credit
  int b = 0;               // total length of the current transmission
  int a = 0;               // remaining slots including the current one
  int payload = 0;         // scheduled payload slots of a success
  int sent = 0;            // payload slots actually carried (may be < payload without dummy bits)
  std::int64_t start = 0;  // slot in which the transmission began
};

struct ChainState {
  std::vector<LinkState> links;

  explicit ChainState(int num_links = 0) : links(static_cast<std::size_t>(num_links)) {}
  int num_links() const { return static_cast<int>(links.size()); }
  LinkMask x() const;
  // Slot is a payload slot of link k (overhead comes first).
  bool in_payload(int k) const;
};

// What a late starter does when it overlaps a transmission it could not sense.
enum class HiddenPolicy {
  kProbeTruncation,  // its probe fails after gamma slots; the earlier transmission runs on, uncredited
  kRunToEnd,         // both run their full length, neither is credited
};

std::string to_string(HiddenPolicy p);
HiddenPolicy parse_hidden_policy(const std::string& name);

struct StepInputs {
  const ConflictGraph* graph = nullptr;    // interference
  const ConflictGraph* sensing = nullptr;  // carrier sense; equal to graph without hidden nodes
  std::span<const double> p;
  int gamma = 1;
  int tau_prime = 1;
  std::span<const double> payload_means;  // T^p_k, each >= 1
  LinkMask eligible = ~LinkMask{0};       // links allowed to attempt (non-empty queues)
  std::span<const std::int64_t> queue;    // when non-empty, caps the carried payload
  HiddenPolicy policy = HiddenPolicy::kProbeTruncation;
  std::int64_t slot = 0;
};

struct StepEvents {
  LinkMask started_success = 0;
  LinkMask started_collision = 0;
  int collision_components = 0;
};

// Advance the chain by one slot. Transmissions with a = 1 end, the remaining
// active links count down, and every link that is idle with no sensed active
// neighbour attempts with probability p_k. Simultaneous conflicting attempts
// form collision components of length gamma; a lone attempt starts a success
// of tau' + tau^p slots.
StepEvents step(ChainState& state, const StepInputs& in, RandomStreams& rng);

// Throws InvariantViolation if conditions (I)-(III) fail. Only meaningful when
// sensing and interference graphs coincide.
void check_chain_invariants(const ChainState& state, const ConflictGraph& g, int gamma);

struct RunningStats {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double v);
  double variance() const;  // sample variance
  double stddev() const;
};

struct PeriodRecord {
  std::int64_t period = 0;          // 1-based
  std::vector<double> service;      // s'_k: credited payload slots / M
  std::vector<double> arrival;      // lambda'_k: arrived slots / M
  std::vector<std::int64_t> queue;  // queue (slots of data) at the end of the period
  std::vector<double> payload_mean; // T^p_k in force during the period
};

struct Metrics {
  std::int64_t n_slots = 0;
  std::vector<double> service_rate;       // credited payload slots / n_slots (dummy included)
  std::vector<double> real_service_rate;  // real data slots / n_slots
  std::vector<std::int64_t> payload_slots;
  std::vector<std::int64_t> successes;
  std::vector<std::int64_t> failed;  // transmissions lost to hidden interferers
  std::int64_t collisions = 0;       // collision components formed
  std::vector<std::int64_t> occupancy;  // slots per on-off state; empty when K > 20
  std::vector<RunningStats> delay;      // access delay D_k in slots
  std::vector<std::vector<std::int64_t>> delay_samples;  // filled when requested
  std::vector<double> access_intensity;  // T^p_k / (1/p_k - 1) with the final T^p
  std::vector<std::int64_t> final_queue;
  std::vector<PeriodRecord> periods;
  std::vector<int> window_links;
  std::vector<std::vector<double>> window_throughput;  // per tracked link, one entry per window
  std::vector<std::string> warnings;
};

struct SimConfig {
  ConflictGraph graph;
  std::optional<ConflictGraph> sensing_graph;  // defaults to graph
  ProtocolParams params;
  std::vector<double> r;  // mean payload T0*exp(r_k); empty means r = 0
  std::vector<double> lambda;  // empty means no arrivals
  int M = 1;
  std::uint64_t seed = 1;
  std::int64_t n_slots = 1'000'000;
  bool dummy_bits = true;
  double slot_us = 9.0;
  std::int64_t initial_queue = 0;  // slots of data in every queue at time 0
  HiddenPolicy hidden_policy = HiddenPolicy::kProbeTruncation;
  double window_ms = 50.0;
  std::vector<int> window_links;  // 0-based links whose windowed throughput is tracked
  bool record_periods = false;
  bool keep_delay_samples = false;
  std::int64_t delay_warmup = 0;  // delay samples starting before this slot are dropped
  bool check_invariants = false;

  const ConflictGraph& sensing() const { return sensing_graph ? *sensing_graph : graph; }
  bool hidden() const { return sensing_graph && !(*sensing_graph == graph); }
  std::int64_t window_slots() const;
  // Mean payloads implied by r, clamped below at one slot.
  std::vector<double> payload_means() const;
  void validate() const;  // throws ConfigError / DomainError / DimensionError
};

// Slot-level engine. Periods of M slots start at slot 0; arrivals land at the
// first slot of each period, and a period closes after its last slot.
class Simulator {
 public:
  explicit Simulator(SimConfig cfg);

  void advance();  // simulate one slot
  void run(std::int64_t slots);

  std::int64_t slot() const { return slot_; }
  const ChainState& state() const { return state_; }
  const SimConfig& config() const { return cfg_; }
  const std::vector<std::int64_t>& queue() const { return queue_; }
  const std::vector<double>& payload_means() const { return means_; }

  // Takes effect for transmissions that start after the call. Means are clamped to >= 1.
  void set_payload_means(std::span<const double> means);

  // True right after advance() completed the last slot of a period.
  bool period_closed() const { return period_closed_; }
  const PeriodRecord& last_period() const { return last_period_; }

  Metrics finish();

 private:
  void account_slot(const StepEvents& ev);
  void complete(int k);
  void credit(int k, std::int64_t slots, std::int64_t real);

  SimConfig cfg_;
  int k_ = 0;
  bool hidden_ = false;
  ChainState state_;
  RandomStreams rng_;
  std::vector<double> means_;
  std::vector<std::int64_t> queue_;
  std::int64_t slot_ = 0;
  std::int64_t window_ = 0;

  // current period
  std::vector<std::int64_t> period_credit_, period_arrival_;
  bool period_closed_ = false;
  PeriodRecord last_period_;
  std::int64_t period_index_ = 0;

  std::vector<std::int64_t> last_success_start_;
  std::vector<std::int64_t> window_credit_;
  Metrics m_;
};

// Fixed-length run without hidden nodes (sensing graph ignored if equal).
Metrics run(const SimConfig& cfg);

// Run with a sensing graph strictly inside the interference graph. A config
// without hidden pairs still runs, with a warning in the metrics.
Metrics run_hidden_node(const SimConfig& cfg);

}  // namespace csma
