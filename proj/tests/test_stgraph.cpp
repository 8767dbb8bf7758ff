#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sscl/stgraph.hpp"
#include "sscl/synth.hpp"

using namespace sscl;

namespace {

TrackedClip clip_with(std::vector<DetectedObject> objects, int frames = 10) {
  TrackedClip c;
  c.clip_id = "c";
  c.width = 1280;
  c.height = 720;
  c.num_frames = frames;
  c.objects = std::move(objects);
  c.lanes.resize(static_cast<std::size_t>(frames));
  return c;
}

DetectedObject at(int frame, int id, double x, int cls = 2) {
  return {frame, id, cls, {x, 100, 40, 30}, 1.0};
}

}  // namespace

TEST(GeometricFeature, HandValues) {
  const auto g = geometric_feature({40, 40, 20, 20}, 100, 100);
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_DOUBLE_EQ(g[2], 0.2);
  EXPECT_DOUBLE_EQ(g[3], 0.2);
  EXPECT_DOUBLE_EQ(g[4], 4.0);
}

TEST(GeometricFeature, FullFrame) {
  const auto g = geometric_feature({0, 0, 1280, 720}, 1280, 720);
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.5);
  EXPECT_DOUBLE_EQ(g[2], 1.0);
  EXPECT_DOUBLE_EQ(g[3], 1.0);
  EXPECT_DOUBLE_EQ(g[4], std::sqrt(1280.0 * 720.0));
}

TEST(GeometricFeature, DoublingFrameHalvesFirstFour) {
  const BoundingBox b{10, 30, 50, 70};
  const auto g1 = geometric_feature(b, 200, 300);
  const auto g2 = geometric_feature(b, 400, 600);
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(g2[k], g1[k] / 2.0);
}

TEST(LaneFeature, EmptyIsZero) {
  const auto f = lane_feature({0, 0, 10, 10}, {}, 100.0);
  for (double v : f) EXPECT_EQ(v, 0.0);
}

TEST(LaneFeature, SinglePointDueEastOfEveryAnchor) {
  // A zero-size box puts all five anchors on one spot.
  const double d = 30.0, sigma = 50.0;
  const std::vector<Point> pts = {{100.0 + d, 200.0}};
  const auto f = lane_feature({100, 200, 0, 0}, pts, sigma);
  const double w = std::exp(-d * d / (2 * sigma * sigma));
  for (int k = 0; k < 5; ++k) {
    EXPECT_DOUBLE_EQ(f[2 * k], w);
    EXPECT_DOUBLE_EQ(f[2 * k + 1], 0.0);
  }
}

TEST(LaneFeature, SymmetricPointsCancel) {
  const std::vector<Point> pts = {{80, 50}, {120, 50}};
  const auto f = lane_feature({90, 40, 20, 20}, pts, 40.0);
  // Center anchor (100, 50) is last.
  EXPECT_NEAR(f[8], 0.0, 1e-15);
  EXPECT_NEAR(f[9], 0.0, 1e-15);
}

TEST(LaneFeature, CoincidentPointIgnoredAndCornerOrder) {
  const std::vector<Point> pts = {{0, 0}};
  const auto f = lane_feature({0, 0, 10, 10}, pts, 100.0);
  EXPECT_EQ(f[0], 0.0);  // top-left coincides
  EXPECT_EQ(f[1], 0.0);
  EXPECT_LT(f[2], 0.0);  // top-right sees the point to its west
  EXPECT_EQ(f[3], 0.0);
  EXPECT_EQ(f[4], 0.0);  // bottom-left sees it to the north
  EXPECT_LT(f[5], 0.0);
}

TEST(LaneFeature, NormalizeDividesByCount) {
  const std::vector<Point> pts = {{50, 0}, {0, 70}, {33, 44}};
  const auto raw = lane_feature({5, 5, 10, 10}, pts, 60.0);
  const auto norm = lane_feature({5, 5, 10, 10}, pts, 60.0, true);
  for (int k = 0; k < kLaneDim; ++k) EXPECT_DOUBLE_EQ(norm[k], raw[k] / 3.0);
}

TEST(SpatialEdgeWeight, HandValues) {
  EXPECT_DOUBLE_EQ(spatial_edge_weight({0, 0, 10, 10}, {2, 2, 6, 6}, 100, 100), 1.0);
  const double sigma = edge_sigma(300, 400);
  EXPECT_DOUBLE_EQ(sigma, 125.0);
  EXPECT_NEAR(spatial_edge_weight({0, 0, 2, 2}, {125, 0, 2, 2}, 300, 400), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(spatial_edge_weight({0, 0, 0, 0}, {100, 100, 0, 0}, 100, 100), std::exp(-8.0), 1e-15);
}

TEST(BuildGraph, ThreeObjectsOneFrame) {
  const auto g = build_graph(clip_with({at(0, 1, 10), at(0, 2, 200), at(0, 3, 400)}, 1));
  EXPECT_EQ(g.nodes.size(), 3u);
  EXPECT_EQ(g.spatial_edges.size(), 3u);
  EXPECT_EQ(g.temporal_edges.size(), 0u);
  EXPECT_FALSE(check_invariants(g).has_value());
}

TEST(BuildGraph, LoneInstanceOverTenFrames) {
  std::vector<DetectedObject> objs;
  for (int f = 0; f < 10; ++f) objs.push_back(at(f, 5, 10.0 * f));
  const auto g = build_graph(clip_with(objs));
  EXPECT_EQ(g.spatial_edges.size(), 0u);
  ASSERT_EQ(g.temporal_edges.size(), 9u);
  for (const auto& e : g.temporal_edges) EXPECT_EQ(e.weight, 1.0);
  EXPECT_EQ(g.instance_map.at(5).size(), 10u);
}

TEST(BuildGraph, GapBreaksTemporalEdge) {
  const auto g = build_graph(clip_with({at(0, 1, 10), at(2, 1, 20)}));
  EXPECT_TRUE(g.temporal_edges.empty());
}

TEST(BuildGraph, CanonicalOrderIndependentOfInput) {
  ScenarioSpec spec;
  spec.seed = 12;
  spec.background_actors = 4;
  TrackedClip clip = generate(spec);
  const auto g1 = build_graph(clip);
  std::mt19937 rng(3);
  std::shuffle(clip.objects.begin(), clip.objects.end(), rng);
  EXPECT_EQ(build_graph(clip), g1);
  for (std::size_t i = 1; i < g1.nodes.size(); ++i) {
    const auto& a = g1.nodes[i - 1];
    const auto& b = g1.nodes[i];
    EXPECT_TRUE(std::tie(a.frame_index, a.instance_id) < std::tie(b.frame_index, b.instance_id));
  }
}

TEST(BuildGraph, StructuralProperties) {
  for (int seed = 0; seed < 20; ++seed) {
    ScenarioSpec spec;
    spec.kind = static_cast<ScenarioKind>(seed % kNumScenarioKinds);
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.background_actors = 3;
    spec.dropout = 0.2;
    const TrackedClip clip = generate(spec);
    const auto g = build_graph(clip);
    EXPECT_FALSE(check_invariants(g).has_value()) << *check_invariants(g);
    EXPECT_EQ(g.nodes.size(), clip.objects.size());
    std::vector<std::size_t> per_frame(static_cast<std::size_t>(clip.num_frames), 0);
    for (const auto& o : clip.objects) ++per_frame[static_cast<std::size_t>(o.frame_index)];
    std::size_t expected = 0;
    for (auto n : per_frame) expected += n * (n - (n ? 1 : 0)) / 2;
    EXPECT_EQ(g.spatial_edges.size(), expected);
    for (const auto& e : g.spatial_edges) {
      EXPECT_GT(e.weight, 0.0);
      EXPECT_LE(e.weight, 1.0);
      EXPECT_EQ(g.nodes[e.i].frame_index, g.nodes[e.j].frame_index);
    }
    for (const auto& e : g.temporal_edges) {
      EXPECT_EQ(g.nodes[e.i].instance_id, g.nodes[e.j].instance_id);
      EXPECT_EQ(std::abs(g.nodes[e.i].frame_index - g.nodes[e.j].frame_index), 1);
    }
    for (const auto& n : g.nodes) {
      double sum = 0.0;
      for (double v : n.attr.semantic) sum += v;
      EXPECT_EQ(sum, 1.0);
      for (int k = 0; k < 4; ++k) {
        EXPECT_GE(n.attr.geometric[k], 0.0);
        EXPECT_LE(n.attr.geometric[k], 1.0);
      }
      for (double v : n.attr.lane) EXPECT_TRUE(std::isfinite(v));
    }
  }
}

TEST(CheckInvariants, FlagsCrossFrameSpatialEdge) {
  auto g = build_graph(clip_with({at(0, 1, 10), at(1, 1, 20)}));
  g.spatial_edges.push_back({0, 1, 0.5});
  EXPECT_TRUE(check_invariants(g).has_value());
}

TEST(GraphSerialization, RoundTripsBitExactly) {
  std::vector<StGraph> graphs;
  for (int seed = 0; seed < 5; ++seed) {
    ScenarioSpec spec;
    spec.seed = static_cast<std::uint64_t>(seed);
    spec.kind = static_cast<ScenarioKind>(seed);
    graphs.push_back(build_graph(generate(spec)));
  }
  graphs[1].label = 3;
  graphs.push_back(build_graph(clip_with({})));
  std::ostringstream out;
  write_graphs(out, graphs);
  std::istringstream in(out.str());
  EXPECT_EQ(read_graphs(in), graphs);
}

TEST(GraphSerialization, RejectsGarbage) {
  std::istringstream in("not a graph file");
  EXPECT_ANY_THROW(read_graphs(in));
}
