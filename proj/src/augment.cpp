#include "sscl/augment.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "sscl/error.hpp"

namespace sscl {

namespace {

int count_for(double ratio, std::size_t size) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ArgumentError("augmentation ratio must be in [0, 1)");
  }
  return static_cast<int>(std::floor(ratio * static_cast<double>(size) + 1e-9));
}

// k distinct indices in [0, n), uniformly, returned ascending.
std::vector<int> sample_indices(int n, int k, Rng& rng) {
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  // Partial Fisher-Yates with an explicit draw so the result does not depend
  // on std::shuffle's implementation.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void AugmentConfig::validate() const {
  for (double r : {node_drop_ratio, edge_perturb_ratio, attr_mask_ratio}) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw ConfigError("augmentation ratios must be in [0, 1)");
    }
  }
}

AugmentPolicy parse_augment_policy(const std::string& name) {
  if (name == "random_one") return AugmentPolicy::kRandomOne;
  if (name == "node_drop") return AugmentPolicy::kNodeDrop;
  if (name == "edge_perturb") return AugmentPolicy::kEdgePerturb;
  if (name == "attr_mask") return AugmentPolicy::kAttrMask;
  if (name == "all") return AugmentPolicy::kAll;
  throw ConfigError("unknown augmentation policy '" + name + "'");
}

std::string to_string(AugmentPolicy policy) {
  switch (policy) {
    case AugmentPolicy::kRandomOne: return "random_one";
    case AugmentPolicy::kNodeDrop: return "node_drop";
    case AugmentPolicy::kEdgePerturb: return "edge_perturb";
    case AugmentPolicy::kAttrMask: return "attr_mask";
    case AugmentPolicy::kAll: return "all";
  }
  return "random_one";
}

StGraph node_drop(const StGraph& graph, double ratio, Rng& rng) {
  const int n = static_cast<int>(graph.nodes.size());
  const int k = count_for(ratio, graph.nodes.size());
  if (k == 0) return graph;
  const auto dropped = sample_indices(n, k, rng);

  std::vector<int> remap(n, -1);
  StGraph out = graph;
  out.nodes.clear();
  out.spatial_edges.clear();
  out.temporal_edges.clear();
  out.instance_map.clear();
  std::size_t next_drop = 0;
  for (int i = 0; i < n; ++i) {
    if (next_drop < dropped.size() && dropped[next_drop] == i) {
      ++next_drop;
      continue;
    }
    remap[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(graph.nodes[i]);
  }
  auto keep_edges = [&](const std::vector<Edge>& in, std::vector<Edge>& dst) {
    for (const auto& e : in) {
      if (remap[e.i] >= 0 && remap[e.j] >= 0) {
        dst.push_back({remap[e.i], remap[e.j], e.weight});
      }
    }
  };
  keep_edges(graph.spatial_edges, out.spatial_edges);
  keep_edges(graph.temporal_edges, out.temporal_edges);
  for (int i = 0; i < static_cast<int>(out.nodes.size()); ++i) {
    out.instance_map[out.nodes[i].instance_id].push_back(i);
  }
  return out;
}

StGraph edge_perturb(const StGraph& graph, double ratio, Rng& rng) {
  const std::size_t total = graph.num_edges();
  const int k = count_for(ratio, total);
  if (k == 0) return graph;

  const int spatial_count = static_cast<int>(graph.spatial_edges.size());
  const auto deleted = sample_indices(static_cast<int>(total), k, rng);
  std::set<std::pair<int, int>> removed;
  StGraph out = graph;
  out.spatial_edges.clear();
  out.temporal_edges.clear();
  std::size_t next = 0;
  for (int idx = 0; idx < static_cast<int>(total); ++idx) {
    const bool spatial = idx < spatial_count;
    const Edge& e = spatial ? graph.spatial_edges[idx]
                            : graph.temporal_edges[idx - spatial_count];
    if (next < deleted.size() && deleted[next] == idx) {
      ++next;
      removed.emplace(e.i, e.j);
      continue;
    }
    (spatial ? out.spatial_edges : out.temporal_edges).push_back(e);
  }

  std::set<std::pair<int, int>> present;
  for (const auto& e : out.spatial_edges) present.emplace(std::min(e.i, e.j), std::max(e.i, e.j));
  for (const auto& e : out.temporal_edges) present.emplace(std::min(e.i, e.j), std::max(e.i, e.j));
  std::vector<std::pair<int, int>> candidates;
  const int n = static_cast<int>(graph.nodes.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (graph.nodes[i].frame_index != graph.nodes[j].frame_index) continue;
      if (present.count({i, j}) || removed.count({i, j})) continue;
      candidates.emplace_back(i, j);
    }
  }
  const int add = std::min<int>(k, static_cast<int>(candidates.size()));
  for (int idx : sample_indices(static_cast<int>(candidates.size()), add, rng)) {
    const auto [i, j] = candidates[idx];
    out.spatial_edges.push_back(
        {i, j,
         spatial_edge_weight(graph.nodes[i].bbox, graph.nodes[j].bbox,
                             graph.width, graph.height)});
  }
  return out;
}

StGraph attr_mask(const StGraph& graph, double ratio, Rng& rng) {
  const int k = count_for(ratio, graph.nodes.size());
  if (k == 0) return graph;
  StGraph out = graph;
  for (int idx : sample_indices(static_cast<int>(graph.nodes.size()), k, rng)) {
    out.nodes[idx].attr = NodeAttr{};
  }
  return out;
}

StGraph augment(const StGraph& graph, const AugmentConfig& config, Rng& rng) {
  AugmentPolicy policy = config.policy;
  if (policy == AugmentPolicy::kRandomOne) {
    std::uniform_int_distribution<int> pick(0, 2);
    policy = std::array{AugmentPolicy::kNodeDrop, AugmentPolicy::kEdgePerturb,
                        AugmentPolicy::kAttrMask}[pick(rng)];
  }
  switch (policy) {
    case AugmentPolicy::kNodeDrop:
      return node_drop(graph, config.node_drop_ratio, rng);
    case AugmentPolicy::kEdgePerturb:
      return edge_perturb(graph, config.edge_perturb_ratio, rng);
    case AugmentPolicy::kAttrMask:
      return attr_mask(graph, config.attr_mask_ratio, rng);
    case AugmentPolicy::kAll: {
      StGraph g = node_drop(graph, config.node_drop_ratio, rng);
      g = edge_perturb(g, config.edge_perturb_ratio, rng);
      return attr_mask(g, config.attr_mask_ratio, rng);
    }
    case AugmentPolicy::kRandomOne:
      break;
  }
  return graph;
}

std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
  return h;
}

}  // namespace sscl
