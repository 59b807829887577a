#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace csma {

using LinkMask = std::uint64_t;

// Largest graph the bitmask representation can hold.
inline constexpr int kMaxLinks = 64;

// Default cap on K for operations that walk all 2^K on-off states.
inline constexpr int kDefaultEnumerationCap = 20;

inline constexpr bool has_link(LinkMask m, int k) { return (m >> k) & 1U; }
inline constexpr LinkMask link_bit(int k) { return LinkMask{1} << k; }
int popcount(LinkMask m);

// Symmetric, irreflexive conflict relation over K links. Links are 0-based
// internally; file formats and the CLI use 1-based ids.
class ConflictGraph {
 public:
  ConflictGraph() = default;
  explicit ConflictGraph(int num_links);

  // `edges` holds 0-based link pairs. Throws ConfigError on self-loops or
  // out-of-range ids. Duplicate edges are accepted.
  ConflictGraph(int num_links, std::span<const std::pair<int, int>> edges);

  static ConflictGraph from_one_based(int num_links, std::span<const std::pair<int, int>> edges);

  int num_links() const noexcept { return num_links_; }
  bool conflicts(int j, int k) const { return has_link(neighbors_[j], k); }
  LinkMask neighbors(int k) const { return neighbors_[k]; }
  LinkMask all_links() const noexcept;

  // 0-based (j < k) edge list in lexicographic order.
  std::vector<std::pair<int, int>> edges() const;
  std::size_t num_edges() const;

  // True when every edge of *this is also an edge of `other` (same K).
  bool is_subgraph_of(const ConflictGraph& other) const;

  bool operator==(const ConflictGraph&) const = default;

 private:
  int num_links_ = 0;
  std::vector<LinkMask> neighbors_;
};

// Activity vector x in {0,1}^K.
class OnOffState {
 public:
  OnOffState() = default;
  OnOffState(LinkMask bits, int size);
  static OnOffState from_vector(std::span<const int> bits);

  LinkMask bits() const noexcept { return bits_; }
  int size() const noexcept { return size_; }
  bool active(int k) const { return has_link(bits_, k); }
  int num_active() const { return popcount(bits_); }

  bool operator==(const OnOffState&) const = default;

 private:
  LinkMask bits_ = 0;
  int size_ = 0;
};

// Components of G(x) and the derived success/collision sets.
struct Classification {
  std::vector<LinkMask> components;  // ordered by lowest link index
  LinkMask successful = 0;           // S(x): singleton components
  LinkMask colliding = 0;            // Z(x): components of size > 1
  int collision_number = 0;          // h(x)
};

// Component decomposition over the active links only. Deterministic.
Classification classify(const ConflictGraph& g, const OnOffState& x);
Classification classify(const ConflictGraph& g, LinkMask active);

// Cheaper variant used on hot paths: S(x) and h(x) without the component list.
struct SuccessCollision {
  LinkMask successful = 0;
  int collision_number = 0;
};
SuccessCollision success_and_collisions(const ConflictGraph& g, LinkMask active);

bool is_independent(const ConflictGraph& g, LinkMask set);

// Every independent set (empty and non-maximal ones included), ascending by
// bitmask. Throws CapacityError when K exceeds `cap`.
std::vector<OnOffState> independent_sets(const ConflictGraph& g, int cap = kDefaultEnumerationCap);

// Reference topologies.
namespace topology {

ConflictGraph edgeless(int k);
ConflictGraph complete(int k);
ConflictGraph path(int k);
// Line of k links where each link conflicts with the `hops` nearest links on each side.
ConflictGraph line(int k, int hops);
// rows x cols grid, 4-neighbour conflicts, links numbered row-major.
ConflictGraph lattice(int rows, int cols);
// Seven-link evaluation graph whose maximal independent sets include
// {1,3,5}, {2,5,7}, {4,6}, {2,6} and {1,3,6}.
ConflictGraph seven_link();
// Arrival-rate direction on the boundary of seven_link()'s capacity region.
std::vector<double> seven_link_boundary_rates();

}  // namespace topology

// JSON graph file: {"num_links": K, "edges": [[i, j], ...]} with 1-based ids.
ConflictGraph parse_graph_json(const std::string& text);
ConflictGraph load_graph(const std::string& path);
std::string graph_to_json(const ConflictGraph& g);

}  // namespace csma
