#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscl/types.hpp"

namespace sscl {

inline constexpr int kSemanticDim = 8;
inline constexpr int kGeometricDim = 5;
inline constexpr int kLaneDim = 10;

// Node attributes: one-hot object class, box geometry and lane interaction.
// A node masked by augmentation carries all-zero attributes.
struct NodeAttr {
  std::array<double, kSemanticDim> semantic{};
  std::array<double, kGeometricDim> geometric{};
  std::array<double, kLaneDim> lane{};

  bool is_zero() const;
  friend bool operator==(const NodeAttr&, const NodeAttr&) = default;
};

struct GraphNode {
  int frame_index = 0;
  int instance_id = 0;
  // Kept so augmentations can recompute spatial edge weights.
  BoundingBox bbox;
  NodeAttr attr;

  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

// Undirected edge stored once with i < j.
struct Edge {
  int i = 0;
  int j = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct StGraph {
  std::string clip_id;
  int width = 0;
  int height = 0;
  int num_frames = 0;
  std::vector<GraphNode> nodes;
  std::vector<Edge> spatial_edges;
  std::vector<Edge> temporal_edges;
  // instance id -> node indices, ascending.
  std::map<int, std::vector<int>> instance_map;
  std::optional<int> label;

  std::size_t num_edges() const {
    return spatial_edges.size() + temporal_edges.size();
  }
  friend bool operator==(const StGraph&, const StGraph&) = default;
};

struct GraphOptions {
  // Gaussian scale of the lane-interaction weights; defaults to the edge
  // scale sqrt(W^2 + H^2) / 4 when unset.
  std::optional<double> sigma_lane;
  // Divide each lane-interaction sum by the number of lane points.
  bool normalize_lane = false;
};

// Edge-weight scale sqrt(W^2 + H^2) / 4.
double edge_sigma(int width, int height);

// (a/W, b/H, w/W, h/H, wh/sqrt(WH)) with (a, b) the box centroid.
std::array<double, kGeometricDim> geometric_feature(const BoundingBox& box,
                                                    int width, int height);

// Lane interaction of the box anchors top-left, top-right, bottom-left,
// bottom-right and center, in that order. Each anchor contributes
// sum_p exp(-d^2 / 2 sigma^2) * v / |v| over lane points p, with v = p - anchor.
// Points coinciding with an anchor contribute nothing.
std::array<double, kLaneDim> lane_feature(const BoundingBox& box,
                                          std::span<const Point> lane_points,
                                          double sigma_lane,
                                          bool normalize = false);

double spatial_edge_weight(const BoundingBox& a, const BoundingBox& b,
                           int width, int height);

// Nodes ordered by (frame, instance id); complete spatial graph within each
// frame; temporal edges of weight 1 between consecutive-frame detections of
// the same instance. No self-loops.
StGraph build_graph(const TrackedClip& clip, const GraphOptions& options = {});

// Returns a description of the first violated structural invariant, if any.
std::optional<std::string> check_invariants(const StGraph& graph);

// Versioned binary container for a list of graphs; round-trips bit-exactly.
void write_graphs(std::ostream& out, std::span<const StGraph> graphs);
std::vector<StGraph> read_graphs(std::istream& in);

}  // namespace sscl
