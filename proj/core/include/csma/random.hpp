#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace csma {

using Rng = std::mt19937_64;

// Uniform double in [0,1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Deterministic stream for (seed, stream id); distinct ids give unrelated sequences.
Rng make_stream(std::uint64_t seed, std::uint64_t stream_id);

// Seed for the i-th cell of a sweep, derived from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// One stream per link for attempts and payload draws, and one per link for
// arrivals, so the draws of a link do not depend on how many links exist.
class RandomStreams {
 public:
  RandomStreams(std::uint64_t seed, int num_links);

  Rng& link(int k) { return link_[k]; }
  Rng& arrivals(int k) { return arrivals_[k]; }

 private:
  std::vector<Rng> link_;
  std::vector<Rng> arrivals_;
};

// Integer payload with the given mean: ceil(T) w.p. T - floor(T), else floor(T).
// Throws DomainError for means below one slot or non-finite means.
int sample_payload(double mean, Rng& rng);

}  // namespace csma
