#include "sscl/stgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <set>

#include "sscl/error.hpp"

namespace sscl {

bool NodeAttr::is_zero() const {
  auto zero = [](const auto& a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
  };
  return zero(semantic) && zero(geometric) && zero(lane);
}

double edge_sigma(int width, int height) {
  return std::sqrt(static_cast<double>(width) * width +
                   static_cast<double>(height) * height) /
         4.0;
}

std::array<double, kGeometricDim> geometric_feature(const BoundingBox& box,
                                                    int width, int height) {
  const double w = width;
  const double h = height;
  return {box.center_x() / w, box.center_y() / h, box.width / w,
          box.height / h, box.width * box.height / std::sqrt(w * h)};
}

std::array<double, kLaneDim> lane_feature(const BoundingBox& box,
                                          std::span<const Point> lane_points,
                                          double sigma_lane, bool normalize) {
  const std::array<Point, 5> anchors = {{
      {box.x_min, box.y_min},
      {box.x_max(), box.y_min},
      {box.x_min, box.y_max()},
      {box.x_max(), box.y_max()},
      {box.center_x(), box.center_y()},
  }};
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma_lane * sigma_lane);
  std::array<double, kLaneDim> f{};
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    double fx = 0.0;
    double fy = 0.0;
    for (const Point& p : lane_points) {
      const double vx = p.x - anchors[k].x;
      const double vy = p.y - anchors[k].y;
      const double d_sq = vx * vx + vy * vy;
      if (d_sq == 0.0) continue;
      const double d = std::sqrt(d_sq);
      const double w = std::exp(-d_sq * inv_two_sigma_sq);
      fx += w * vx / d;
      fy += w * vy / d;
    }
    if (normalize && !lane_points.empty()) {
      fx /= static_cast<double>(lane_points.size());
      fy /= static_cast<double>(lane_points.size());
    }
    f[2 * k] = fx;
    f[2 * k + 1] = fy;
  }
  return f;
}

double spatial_edge_weight(const BoundingBox& a, const BoundingBox& b,
                           int width, int height) {
  const double sigma = edge_sigma(width, height);
  const double dx = a.center_x() - b.center_x();
  const double dy = a.center_y() - b.center_y();
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

StGraph build_graph(const TrackedClip& clip, const GraphOptions& options) {
  StGraph g;
  g.clip_id = clip.clip_id;
  g.width = clip.width;
  g.height = clip.height;
  g.num_frames = clip.num_frames;
  g.label = clip.label;

  std::vector<const DetectedObject*> order;
  order.reserve(clip.objects.size());
  for (const auto& o : clip.objects) order.push_back(&o);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    return std::tie(a->frame_index, a->instance_id) <
           std::tie(b->frame_index, b->instance_id);
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (order[k - 1]->frame_index == order[k]->frame_index &&
        order[k - 1]->instance_id == order[k]->instance_id) {
      throw DataError("clip " + clip.clip_id + ": duplicate instance " +
                      std::to_string(order[k]->instance_id) + " in frame " +
                      std::to_string(order[k]->frame_index));
    }
  }

  const double sigma_lane =
      options.sigma_lane.value_or(edge_sigma(clip.width, clip.height));
  static const std::vector<Point> kNoLanes;
  g.nodes.reserve(order.size());
  for (const auto* o : order) {
    GraphNode node;
    node.frame_index = o->frame_index;
    node.instance_id = o->instance_id;
    node.bbox = o->bbox;
    node.attr.semantic[o->class_id] = 1.0;
    node.attr.geometric = geometric_feature(o->bbox, clip.width, clip.height);
    const auto& lanes =
        o->frame_index < static_cast<int>(clip.lanes.size())
            ? clip.lanes[o->frame_index]
            : kNoLanes;
    node.attr.lane =
        lane_feature(o->bbox, lanes, sigma_lane, options.normalize_lane);
    g.nodes.push_back(node);
  }

  const int n = static_cast<int>(g.nodes.size());
  for (int begin = 0; begin < n;) {
    int end = begin;
    while (end < n && g.nodes[end].frame_index == g.nodes[begin].frame_index) ++end;
    for (int i = begin; i < end; ++i) {
      for (int j = i + 1; j < end; ++j) {
        g.spatial_edges.push_back(
            {i, j,
             spatial_edge_weight(g.nodes[i].bbox, g.nodes[j].bbox, clip.width,
                                 clip.height)});
      }
    }
    begin = end;
  }

  for (int i = 0; i < n; ++i) g.instance_map[g.nodes[i].instance_id].push_back(i);
  for (const auto& [id, members] : g.instance_map) {
    for (std::size_t k = 1; k < members.size(); ++k) {
      const int a = members[k - 1];
      const int b = members[k];
      if (g.nodes[b].frame_index - g.nodes[a].frame_index == 1) {
        g.temporal_edges.push_back({std::min(a, b), std::max(a, b), 1.0});
      }
    }
  }
  std::sort(g.temporal_edges.begin(), g.temporal_edges.end(),
            [](const Edge& a, const Edge& b) {
              return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
  return g;
}

std::optional<std::string> check_invariants(const StGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::set<std::pair<int, int>> seen_edges;
  auto check_edge = [&](const Edge& e) -> std::optional<std::string> {
    if (e.i < 0 || e.j < 0 || e.i >= n || e.j >= n) return "edge endpoint out of range";
    if (e.i == e.j) return "self-loop";
    if (!seen_edges.emplace(std::min(e.i, e.j), std::max(e.i, e.j)).second) {
      return "duplicate edge";
    }
    if (!std::isfinite(e.weight)) return "non-finite edge weight";
    return std::nullopt;
  };
  for (const auto& e : g.spatial_edges) {
    if (auto err = check_edge(e)) return err;
    if (g.nodes[e.i].frame_index != g.nodes[e.j].frame_index) {
      return "spatial edge across frames";
    }
    if (!(e.weight > 0.0 && e.weight <= 1.0)) return "spatial weight outside (0,1]";
  }
  for (const auto& e : g.temporal_edges) {
    if (auto err = check_edge(e)) return err;
    if (g.nodes[e.i].instance_id != g.nodes[e.j].instance_id) {
      return "temporal edge between different instances";
    }
    if (std::abs(g.nodes[e.i].frame_index - g.nodes[e.j].frame_index) != 1) {
      return "temporal edge between non-adjacent frames";
    }
    if (e.weight != 1.0) return "temporal weight must be 1";
  }
  std::set<std::pair<int, int>> keys;
  for (const auto& node : g.nodes) {
    if (!keys.emplace(node.frame_index, node.instance_id).second) {
      return "duplicate (frame, instance) node";
    }
    if (node.frame_index < 0 || node.frame_index >= g.num_frames) {
      return "node frame outside clip";
    }
    const auto& a = node.attr;
    if (!a.is_zero()) {
      double sum = 0.0;
      int ones = 0;
      for (double v : a.semantic) {
        sum += v;
        ones += v == 1.0;
      }
      if (ones != 1 || sum != 1.0) return "semantic attribute is not one-hot";
      for (int k = 0; k < 4; ++k) {
        if (a.geometric[k] < 0.0 || a.geometric[k] > 1.0) {
          return "geometric attribute outside [0,1]";
        }
      }
    }
    for (double v : a.geometric) if (!std::isfinite(v)) return "non-finite attribute";
    for (double v : a.lane) if (!std::isfinite(v)) return "non-finite attribute";
  }
  std::size_t covered = 0;
  for (const auto& [id, members] : g.instance_map) {
    if (members.empty()) return "empty instance";
    for (int idx : members) {
      if (idx < 0 || idx >= n || g.nodes[idx].instance_id != id) {
        return "instance map inconsistent with nodes";
      }
    }
    covered += members.size();
  }
  if (covered != g.nodes.size()) return "instance map does not cover all nodes";
  return std::nullopt;
}

namespace {

constexpr char kGraphMagic[8] = {'S', 'T', 'G', 'R', 'A', 'P', 'H', '\0'};
constexpr std::uint32_t kGraphVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw DataError("graph file truncated");
  return value;
}

void put_edges(std::ostream& out, const std::vector<Edge>& edges) {
  put<std::uint64_t>(out, edges.size());
  for (const auto& e : edges) {
    put<std::int32_t>(out, e.i);
    put<std::int32_t>(out, e.j);
    put<double>(out, e.weight);
  }
}

std::vector<Edge> get_edges(std::istream& in) {
  std::vector<Edge> edges(get<std::uint64_t>(in));
  for (auto& e : edges) {
    e.i = get<std::int32_t>(in);
    e.j = get<std::int32_t>(in);
    e.weight = get<double>(in);
  }
  return edges;
}

}  // namespace

void write_graphs(std::ostream& out, std::span<const StGraph> graphs) {
  out.write(kGraphMagic, sizeof(kGraphMagic));
  put<std::uint32_t>(out, kGraphVersion);
  put<std::uint64_t>(out, graphs.size());
  for (const auto& g : graphs) {
    put<std::uint64_t>(out, g.clip_id.size());
    out.write(g.clip_id.data(), static_cast<std::streamsize>(g.clip_id.size()));
    put<std::int32_t>(out, g.width);
    put<std::int32_t>(out, g.height);
    put<std::int32_t>(out, g.num_frames);
    put<std::int32_t>(out, g.label.value_or(-1));
    put<std::uint64_t>(out, g.nodes.size());
    for (const auto& node : g.nodes) {
      put<std::int32_t>(out, node.frame_index);
      put<std::int32_t>(out, node.instance_id);
      put<double>(out, node.bbox.x_min);
      put<double>(out, node.bbox.y_min);
      put<double>(out, node.bbox.width);
      put<double>(out, node.bbox.height);
      for (double v : node.attr.semantic) put<double>(out, v);
      for (double v : node.attr.geometric) put<double>(out, v);
      for (double v : node.attr.lane) put<double>(out, v);
    }
    put_edges(out, g.spatial_edges);
    put_edges(out, g.temporal_edges);
    put<std::uint64_t>(out, g.instance_map.size());
    for (const auto& [id, members] : g.instance_map) {
      put<std::int32_t>(out, id);
      put<std::uint64_t>(out, members.size());
      for (int idx : members) put<std::int32_t>(out, idx);
    }
  }
}

std::vector<StGraph> read_graphs(std::istream& in) {
  char magic[sizeof(kGraphMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kGraphMagic, sizeof(magic)) != 0) {
    throw DataError("not a graph file");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kGraphVersion) {
    throw DataError("unsupported graph file version " + std::to_string(version));
  }
  std::vector<StGraph> graphs(get<std::uint64_t>(in));
  for (auto& g : graphs) {
    g.clip_id.resize(get<std::uint64_t>(in));
    in.read(g.clip_id.data(), static_cast<std::streamsize>(g.clip_id.size()));
    g.width = get<std::int32_t>(in);
    g.height = get<std::int32_t>(in);
    g.num_frames = get<std::int32_t>(in);
    const int label = get<std::int32_t>(in);
    if (label >= 0) g.label = label;
    g.nodes.resize(get<std::uint64_t>(in));
    for (auto& node : g.nodes) {
      node.frame_index = get<std::int32_t>(in);
      node.instance_id = get<std::int32_t>(in);
      node.bbox.x_min = get<double>(in);
      node.bbox.y_min = get<double>(in);
      node.bbox.width = get<double>(in);
      node.bbox.height = get<double>(in);
      for (double& v : node.attr.semantic) v = get<double>(in);
      for (double& v : node.attr.geometric) v = get<double>(in);
      for (double& v : node.attr.lane) v = get<double>(in);
    }
    g.spatial_edges = get_edges(in);
    g.temporal_edges = get_edges(in);
    const auto instances = get<std::uint64_t>(in);
    for (std::uint64_t k = 0; k < instances; ++k) {
      const int id = get<std::int32_t>(in);
      std::vector<int> members(get<std::uint64_t>(in));
      for (int& idx : members) idx = get<std::int32_t>(in);
      g.instance_map.emplace(id, std::move(members));
    }
  }
  return graphs;
}

}  // namespace sscl
