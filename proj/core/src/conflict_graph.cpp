#include "csma/conflict_graph.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csma/errors.hpp"

namespace csma {

int popcount(LinkMask m) { return std::popcount(m); }

ConflictGraph::ConflictGraph(int num_links) : num_links_(num_links) {
  if (num_links < 1 || num_links > kMaxLinks) {
    throw ConfigError("num_links must be in [1, " + std::to_string(kMaxLinks) + "], got " +
                      std::to_string(num_links));
  }
  neighbors_.assign(static_cast<std::size_t>(num_links), 0);
}

ConflictGraph::ConflictGraph(int num_links, std::span<const std::pair<int, int>> edges)
    : ConflictGraph(num_links) {
  for (auto [j, k] : edges) {
    if (j < 0 || k < 0 || j >= num_links || k >= num_links) {
      throw ConfigError("edge (" + std::to_string(j + 1) + "," + std::to_string(k + 1) +
                        ") references a link outside 1.." + std::to_string(num_links));
    }
    if (j == k) {
      throw ConfigError("self-loop on link " + std::to_string(j + 1) +
                        ": the conflict relation must be irreflexive");
    }
    neighbors_[j] |= link_bit(k);
    neighbors_[k] |= link_bit(j);
  }
}

ConflictGraph ConflictGraph::from_one_based(int num_links,
                                            std::span<const std::pair<int, int>> edges) {
  std::vector<std::pair<int, int>> zero;
  zero.reserve(edges.size());
  for (auto [j, k] : edges) zero.emplace_back(j - 1, k - 1);
  return ConflictGraph(num_links, zero);
}

LinkMask ConflictGraph::all_links() const noexcept {
  return num_links_ == 64 ? ~LinkMask{0} : (link_bit(num_links_) - 1);
}

std::vector<std::pair<int, int>> ConflictGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < num_links_; ++j) {
    for (int k = j + 1; k < num_links_; ++k) {
      if (conflicts(j, k)) out.emplace_back(j, k);
    }
  }
  return out;
}

std::size_t ConflictGraph::num_edges() const {
  std::size_t degree_sum = 0;
  for (auto m : neighbors_) degree_sum += static_cast<std::size_t>(std::popcount(m));
  return degree_sum / 2;
}

bool ConflictGraph::is_subgraph_of(const ConflictGraph& other) const {
  if (other.num_links_ != num_links_) return false;
  for (int k = 0; k < num_links_; ++k) {
    if ((neighbors_[k] & ~other.neighbors_[k]) != 0) return false;
  }
  return true;
}

OnOffState::OnOffState(LinkMask bits, int size) : bits_(bits), size_(size) {
  if (size < 0 || size > kMaxLinks) throw DimensionError("on-off state size out of range");
  if (size < 64 && (bits >> size) != 0) {
    throw DimensionError("on-off state has bits set beyond its length " + std::to_string(size));
  }
}

OnOffState OnOffState::from_vector(std::span<const int> bits) {
  if (bits.size() > static_cast<std::size_t>(kMaxLinks)) {
    throw DimensionError("on-off state longer than " + std::to_string(kMaxLinks));
  }
  LinkMask m = 0;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k] != 0 && bits[k] != 1) throw DomainError("on-off entries must be 0 or 1");
    if (bits[k]) m |= link_bit(static_cast<int>(k));
  }
  return OnOffState(m, static_cast<int>(bits.size()));
}

namespace {

void check_size(const ConflictGraph& g, const OnOffState& x) {
  if (x.size() != g.num_links()) {
    throw DimensionError("on-off state has length " + std::to_string(x.size()) +
                         " but the graph has " + std::to_string(g.num_links()) + " links");
  }
}

// Grows the component of `seed` inside `active` by repeated neighbourhood expansion.
LinkMask component_of(const ConflictGraph& g, LinkMask active, int seed) {
  LinkMask comp = link_bit(seed);
  LinkMask frontier = comp;
  while (frontier != 0) {
    LinkMask next = 0;
    for (LinkMask f = frontier; f != 0; f &= f - 1) {
      next |= g.neighbors(std::countr_zero(f));
    }
    next &= active & ~comp;
    comp |= next;
    frontier = next;
  }
  return comp;
}

}  // namespace

Classification classify(const ConflictGraph& g, LinkMask active) {
  Classification c;
  LinkMask remaining = active;
  while (remaining != 0) {
    const int seed = std::countr_zero(remaining);
    const LinkMask comp = component_of(g, active, seed);
    c.components.push_back(comp);
    remaining &= ~comp;
    if (std::popcount(comp) == 1) {
      c.successful |= comp;
    } else {
      c.colliding |= comp;
      ++c.collision_number;
    }
  }
  return c;
}

Classification classify(const ConflictGraph& g, const OnOffState& x) {
  check_size(g, x);
  return classify(g, x.bits());
}

SuccessCollision success_and_collisions(const ConflictGraph& g, LinkMask active) {
  SuccessCollision out;
  LinkMask remaining = active;
  while (remaining != 0) {
    const int seed = std::countr_zero(remaining);
    if ((g.neighbors(seed) & active) == 0) {
      out.successful |= link_bit(seed);
      remaining &= remaining - 1;
      continue;
    }
    remaining &= ~component_of(g, active, seed);
    ++out.collision_number;
  }
  return out;
}

bool is_independent(const ConflictGraph& g, LinkMask set) {
  for (LinkMask s = set; s != 0; s &= s - 1) {
    if (g.neighbors(std::countr_zero(s)) & set) return false;
  }
  return true;
}

std::vector<OnOffState> independent_sets(const ConflictGraph& g, int cap) {
  const int k = g.num_links();
  if (k > cap) {
    throw CapacityError("independent-set enumeration needs K <= " + std::to_string(cap) +
                            ", graph has " + std::to_string(k) + " links",
                        static_cast<std::size_t>(cap));
  }
  std::vector<OnOffState> out;
  const LinkMask end = link_bit(k);
  for (LinkMask m = 0; m < end; ++m) {
    if (is_independent(g, m)) out.emplace_back(m, k);
  }
  return out;
}

namespace topology {

ConflictGraph edgeless(int k) { return ConflictGraph(k); }

ConflictGraph complete(int k) { return line(k, k); }

ConflictGraph path(int k) { return line(k, 1); }

ConflictGraph line(int k, int hops) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k && j - i <= hops; ++j) e.emplace_back(i, j);
  }
  return ConflictGraph(k, e);
}

ConflictGraph lattice(int rows, int cols) {
  std::vector<std::pair<int, int>> e;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int id = r * cols + c;
      if (c + 1 < cols) e.emplace_back(id, id + 1);
      if (r + 1 < rows) e.emplace_back(id, id + cols);
    }
  }
  return ConflictGraph(rows * cols, e);
}

ConflictGraph seven_link() {
  static constexpr std::pair<int, int> kEdges[] = {{1, 2}, {1, 4}, {2, 3}, {2, 4}, {3, 4},
                                                   {3, 7}, {4, 5}, {5, 6}, {6, 7}};
  return ConflictGraph::from_one_based(7, kEdges);
}

std::vector<double> seven_link_boundary_rates() { return {0.4, 0.4, 0.4, 0.2, 0.4, 0.6, 0.2}; }

}  // namespace topology

ConflictGraph parse_graph_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("graph JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("num_links")) {
    throw ConfigError("graph JSON must be an object with 'num_links' and 'edges'");
  }
  if (!j["num_links"].is_number_integer()) throw ConfigError("'num_links' must be an integer");
  const int k = j["num_links"].get<int>();
  std::vector<std::pair<int, int>> edges;
  if (j.contains("edges")) {
    if (!j["edges"].is_array()) throw ConfigError("'edges' must be an array of [i, j] pairs");
    for (const auto& e : j["edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
          !e[1].is_number_integer()) {
        throw ConfigError("each edge must be a pair of integer link ids");
      }
      edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  }
  // Explicit adjacency matrices are accepted too; they must be symmetric and irreflexive.
  if (j.contains("adjacency")) {
    const auto& a = j["adjacency"];
    if (!a.is_array() || a.size() != static_cast<std::size_t>(k)) {
      throw ConfigError("'adjacency' must be a K x K matrix");
    }
    for (int r = 0; r < k; ++r) {
      if (!a[r].is_array() || a[r].size() != static_cast<std::size_t>(k)) {
        throw ConfigError("'adjacency' must be a K x K matrix");
      }
      for (int c = 0; c < k; ++c) {
        const bool rc = a[r][c].get<int>() != 0;
        const bool cr = a[c][r].get<int>() != 0;
        if (rc != cr) {
          throw ConfigError("adjacency is not symmetric at (" + std::to_string(r + 1) + "," +
                            std::to_string(c + 1) + ")");
        }
        if (r == c && rc) {
          throw ConfigError("adjacency is not irreflexive at link " + std::to_string(r + 1));
        }
        if (rc && r < c) edges.emplace_back(r + 1, c + 1);
      }
    }
  }
  return ConflictGraph::from_one_based(k, edges);
}

ConflictGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open graph file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph_json(ss.str());
}

std::string graph_to_json(const ConflictGraph& g) {
  nlohmann::json j;
  j["num_links"] = g.num_links();
  j["edges"] = nlohmann::json::array();
  for (auto [a, b] : g.edges()) j["edges"].push_back({a + 1, b + 1});
  return j.dump();
}

}  // namespace csma
