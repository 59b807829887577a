#include "csma/random.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "csma/errors.hpp"

namespace csma {

Rng make_stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32), 0x9e3779b9U};
  return Rng(seq);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finaliser over the pair
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RandomStreams::RandomStreams(std::uint64_t seed, int num_links) {
  link_.reserve(num_links);
  arrivals_.reserve(num_links);
  for (int k = 0; k < num_links; ++k) {
    link_.push_back(make_stream(seed, 2 * static_cast<std::uint64_t>(k)));
    arrivals_.push_back(make_stream(seed, 2 * static_cast<std::uint64_t>(k) + 1));
  }
}

int sample_payload(double mean, Rng& rng) {
  if (!std::isfinite(mean) || mean < 1.0) {
    throw DomainError("mean payload must be at least one slot, got " + std::to_string(mean));
  }
  if (mean > static_cast<double>(std::numeric_limits<int>::max() / 2)) {
    throw DomainError("mean payload " + std::to_string(mean) + " slots is too large");
  }
  const double lo = std::floor(mean);
  const double frac = mean - lo;
  int out = static_cast<int>(lo);
  if (frac > 0.0 && uniform01(rng) < frac) ++out;
  return out;
}

}  // namespace csma
