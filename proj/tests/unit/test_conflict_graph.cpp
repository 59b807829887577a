#include <gtest/gtest.h>

#include "csma/conflict_graph.hpp"
#include "csma/errors.hpp"

using namespace csma;

namespace {

LinkMask mask(std::initializer_list<int> one_based) {
  LinkMask m = 0;
  for (int k : one_based) m |= link_bit(k - 1);
  return m;
}

}  // namespace

TEST(ConflictGraph, RejectsSelfLoopAndBadIds) {
  const std::pair<int, int> loop[] = {{0, 0}};
  EXPECT_THROW(ConflictGraph(2, loop), ConfigError);
  const std::pair<int, int> out_of_range[] = {{0, 2}};
  EXPECT_THROW(ConflictGraph(2, out_of_range), ConfigError);
  EXPECT_THROW(ConflictGraph(0), ConfigError);
  EXPECT_THROW(ConflictGraph(65), ConfigError);
}

TEST(ConflictGraph, AdjacencyIsSymmetric) {
  const std::pair<int, int> e[] = {{1, 2}, {2, 3}};
  const auto g = ConflictGraph::from_one_based(3, e);
  for (int j = 0; j < 3; ++j) {
    EXPECT_FALSE(g.conflicts(j, j));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(g.conflicts(j, k), g.conflicts(k, j));
  }
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g, topology::path(3));
}

TEST(ConflictGraph, PathClassification) {
  // Two links colliding next to an idle gap and a lone success.
  const auto g = topology::path(5);
  const auto c = classify(g, mask({1, 2, 4}));
  EXPECT_EQ(c.successful, mask({4}));
  EXPECT_EQ(c.colliding, mask({1, 2}));
  EXPECT_EQ(c.collision_number, 1);
  ASSERT_EQ(c.components.size(), 2u);
  EXPECT_EQ(c.components[0], mask({1, 2}));
}

TEST(ConflictGraph, CompleteGraphAllActiveIsOneCollision) {
  const auto c = classify(topology::complete(3), mask({1, 2, 3}));
  EXPECT_EQ(c.successful, 0u);
  EXPECT_EQ(c.colliding, mask({1, 2, 3}));
  EXPECT_EQ(c.collision_number, 1);
}

TEST(ConflictGraph, EmptyStateHasNothing) {
  const auto c = classify(topology::seven_link(), LinkMask{0});
  EXPECT_EQ(c.successful, 0u);
  EXPECT_EQ(c.colliding, 0u);
  EXPECT_EQ(c.collision_number, 0);
  EXPECT_TRUE(c.components.empty());
}

TEST(ConflictGraph, PartitionHoldsOnEveryState) {
  const auto g = topology::seven_link();
  for (LinkMask x = 0; x < (LinkMask{1} << 7); ++x) {
    const auto c = classify(g, x);
    EXPECT_EQ(c.successful | c.colliding, x);
    EXPECT_EQ(c.successful & c.colliding, 0u);
    int big = 0;
    for (LinkMask comp : c.components) big += popcount(comp) > 1;
    EXPECT_EQ(big, c.collision_number);
    const auto fast = success_and_collisions(g, x);
    EXPECT_EQ(fast.successful, c.successful);
    EXPECT_EQ(fast.collision_number, c.collision_number);
  }
}

TEST(ConflictGraph, IndependentSetCounts) {
  EXPECT_EQ(independent_sets(topology::edgeless(3)).size(), 8u);
  EXPECT_EQ(independent_sets(topology::complete(4)).size(), 5u);
  // Path on 3: {}, {1}, {2}, {3}, {1,3}.
  EXPECT_EQ(independent_sets(topology::path(3)).size(), 5u);
  for (const auto& s : independent_sets(topology::seven_link())) {
    EXPECT_TRUE(is_independent(topology::seven_link(), s.bits()));
  }
}

TEST(ConflictGraph, EnumerationCap) {
  EXPECT_THROW(independent_sets(topology::edgeless(21)), CapacityError);
  EXPECT_NO_THROW(independent_sets(topology::edgeless(4), 4));
}

TEST(ConflictGraph, SevenLinkMaximalSets) {
  const auto g = topology::seven_link();
  for (LinkMask m : {mask({1, 3, 5}), mask({2, 5, 7}), mask({4, 6}), mask({2, 6}), mask({1, 3, 6})}) {
    EXPECT_TRUE(is_independent(g, m));
    for (int k = 0; k < 7; ++k) {
      if (!has_link(m, k)) EXPECT_FALSE(is_independent(g, m | link_bit(k))) << "set " << m << " + " << k + 1;
    }
  }
}

TEST(ConflictGraph, LineAndLattice) {
  const auto line = topology::line(16, 2);
  EXPECT_EQ(popcount(line.neighbors(7)), 4);
  EXPECT_EQ(popcount(line.neighbors(0)), 2);
  const auto grid = topology::lattice(5, 5);
  EXPECT_EQ(popcount(grid.neighbors(12)), 4);
  EXPECT_EQ(popcount(grid.neighbors(0)), 2);
  EXPECT_FALSE(grid.conflicts(4, 5));  // row wrap is not an edge
}

TEST(ConflictGraph, JsonRoundTrip) {
  const auto g = topology::seven_link();
  EXPECT_EQ(parse_graph_json(graph_to_json(g)), g);
  EXPECT_EQ(parse_graph_json(R"({"num_links": 2, "adjacency": [[0, 1], [1, 0]]})"), topology::complete(2));
  EXPECT_THROW(parse_graph_json(R"({"num_links": 2, "adjacency": [[0, 1], [0, 0]]})"), ConfigError);
  EXPECT_THROW(parse_graph_json("not json"), ConfigError);
}

TEST(ConflictGraph, OnOffStateValidation) {
  const int bits[] = {1, 0, 1};
  EXPECT_EQ(OnOffState::from_vector(bits).bits(), mask({1, 3}));
  const int bad[] = {1, 2};
  EXPECT_THROW(OnOffState::from_vector(bad), DomainError);
  EXPECT_THROW(OnOffState(LinkMask{8}, 3), DimensionError);
  EXPECT_THROW(classify(topology::path(2), OnOffState(LinkMask{1}, 3)), DimensionError);
}
