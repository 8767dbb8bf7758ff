#include <gtest/gtest.h>

#include <set>

#include "sscl/augment.hpp"
#include "sscl/error.hpp"
#include "sscl/synth.hpp"

using namespace sscl;

namespace {

StGraph sample_graph(std::uint64_t seed = 1) {
  ScenarioSpec spec;
  spec.seed = seed;
  spec.background_actors = 4;
  spec.dropout = 0.0;
  return build_graph(generate(spec));
}

// Lone instance over 20 frames: 20 nodes, 19 temporal edges.
StGraph chain_graph() {
  TrackedClip c;
  c.width = 640;
  c.height = 480;
  c.num_frames = 20;
  c.lanes.resize(20);
  for (int t = 0; t < 20; ++t) c.objects.push_back({t, 1, 0, {10.0 * t, 10, 20, 20}, 1.0});
  return build_graph(c);
}

std::set<std::pair<int, int>> edge_set(const StGraph& g) {
  std::set<std::pair<int, int>> s;
  for (const auto& e : g.spatial_edges) s.insert({e.i, e.j});
  for (const auto& e : g.temporal_edges) s.insert({e.i, e.j});
  return s;
}

}  // namespace

TEST(NodeDrop, ZeroRatioIsIdentity) {
  Rng rng(1);
  const auto g = sample_graph();
  EXPECT_EQ(node_drop(g, 0.0, rng), g);
}

TEST(NodeDrop, TenPercentOfTwenty) {
  Rng rng(2);
  const auto g = node_drop(chain_graph(), 0.1, rng);
  EXPECT_EQ(g.nodes.size(), 18u);
  EXPECT_FALSE(check_invariants(g).has_value());
}

TEST(NodeDrop, NoDanglingEdgesAndInstancesPruned) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto g = node_drop(sample_graph(s), 0.5, rng);
    EXPECT_FALSE(check_invariants(g).has_value()) << *check_invariants(g);
    for (const auto& [id, nodes] : g.instance_map) EXPECT_FALSE(nodes.empty());
  }
}

TEST(EdgePerturb, ZeroRatioIsIdentity) {
  Rng rng(1);
  const auto g = sample_graph();
  EXPECT_EQ(edge_perturb(g, 0.0, rng), g);
}

TEST(EdgePerturb, KeepsCountWhenPairsAreFree) {
  // Strip half of the spatial edges so unconnected same-frame pairs exist.
  StGraph g = sample_graph(3);
  std::vector<Edge> kept;
  for (std::size_t k = 0; k < g.spatial_edges.size(); ++k)
    if (k % 2 == 0) kept.push_back(g.spatial_edges[k]);
  g.spatial_edges = kept;
  Rng rng(4);
  const auto p = edge_perturb(g, 0.1, rng);
  EXPECT_EQ(p.num_edges(), g.num_edges());
  EXPECT_NE(edge_set(p), edge_set(g));
  EXPECT_FALSE(check_invariants(p).has_value());
}

TEST(EdgePerturb, NeverGrowsAndStaysValid) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto g = sample_graph(s);
    const auto p = edge_perturb(g, 0.3, rng);
    EXPECT_LE(p.num_edges(), g.num_edges());
    EXPECT_GE(p.num_edges() + g.num_edges() * 3 / 10, g.num_edges());
    EXPECT_FALSE(check_invariants(p).has_value()) << *check_invariants(p);
    EXPECT_EQ(p.nodes, g.nodes);
  }
}

TEST(AttrMask, ZeroRatioIsIdentity) {
  Rng rng(1);
  const auto g = sample_graph();
  EXPECT_EQ(attr_mask(g, 0.0, rng), g);
}

TEST(AttrMask, ZeroesExactlyTheCountAndKeepsTopology) {
  Rng rng(9);
  const auto g = chain_graph();
  const auto m = attr_mask(g, 0.25, rng);
  int zeros = 0;
  for (const auto& n : m.nodes) zeros += n.attr.is_zero();
  EXPECT_EQ(zeros, 5);
  EXPECT_EQ(m.spatial_edges, g.spatial_edges);
  EXPECT_EQ(m.temporal_edges, g.temporal_edges);
  EXPECT_EQ(m.instance_map, g.instance_map);
}

TEST(Augment, ReproducibleForFixedSeed) {
  const auto g = sample_graph(7);
  for (auto policy : {AugmentPolicy::kRandomOne, AugmentPolicy::kNodeDrop,
                      AugmentPolicy::kEdgePerturb, AugmentPolicy::kAttrMask, AugmentPolicy::kAll}) {
    AugmentConfig cfg;
    cfg.policy = policy;
    Rng a(11), b(11);
    EXPECT_EQ(augment(g, cfg, a), augment(g, cfg, b));
  }
}

TEST(Augment, ZeroRatiosAreIdentityUnderEveryPolicy) {
  const auto g = sample_graph(8);
  AugmentConfig cfg{0.0, 0.0, 0.0, AugmentPolicy::kAll};
  Rng rng(1);
  EXPECT_EQ(augment(g, cfg, rng), g);
}

TEST(AugmentConfig, ValidatesRatiosAndPolicyNames) {
  AugmentConfig cfg;
  cfg.node_drop_ratio = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_EQ(parse_augment_policy(to_string(AugmentPolicy::kEdgePerturb)), AugmentPolicy::kEdgePerturb);
  EXPECT_THROW(parse_augment_policy("shuffle"), ConfigError);
}

TEST(DeriveSeed, DistinctKeysGiveDistinctSeeds) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
}
