#pragma once

#include <cstdint>
#include <random>

#include "sscl/stgraph.hpp"

namespace sscl {

using Rng = std::mt19937_64;

enum class AugmentPolicy {
  kRandomOne,  // one of the three, chosen uniformly per call
  kNodeDrop,
  kEdgePerturb,
  kAttrMask,
  kAll,  // node drop, then edge perturbation, then attribute masking
};

struct AugmentConfig {
  double node_drop_ratio = 0.1;
  double edge_perturb_ratio = 0.1;
  double attr_mask_ratio = 0.1;
  AugmentPolicy policy = AugmentPolicy::kRandomOne;

  void validate() const;
};

AugmentPolicy parse_augment_policy(const std::string& name);
std::string to_string(AugmentPolicy policy);

// Removes floor(ratio * |V|) nodes chosen uniformly, their incident edges,
// and instances left without nodes.
StGraph node_drop(const StGraph& graph, double ratio, Rng& rng);

// Deletes floor(ratio * |E|) edges chosen uniformly (either kind) and adds as
// many spatial edges between same-frame node pairs that are not connected
// after the deletion and were not just deleted. Weights of added edges follow
// the spatial weight formula. Since build_graph connects every same-frame
// pair, |E'| = |E| only holds when enough unconnected pairs exist.
StGraph edge_perturb(const StGraph& graph, double ratio, Rng& rng);

// Zeroes the full attribute vector of floor(ratio * |V|) nodes.
StGraph attr_mask(const StGraph& graph, double ratio, Rng& rng);

// Applies the configured policy.
StGraph augment(const StGraph& graph, const AugmentConfig& config, Rng& rng);

// Seed derived from a base seed and a stream of integers (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys);

}  // namespace sscl
