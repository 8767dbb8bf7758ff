#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sscl/types.hpp"

namespace sscl {

// Intersection over union; 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Per-instance box sequences of a clip: boxes[k][t] is instance ids[k] at
// frame t, if detected.
struct InstanceTracks {
  int num_frames = 0;
  std::vector<int> ids;  // ascending
  std::vector<std::vector<std::optional<BoundingBox>>> boxes;

  static InstanceTracks from_clip(const TrackedClip& clip);
  int index_of(int instance_id) const;  // -1 when absent
  std::size_t size() const { return ids.size(); }
};

// Mean IoU over all frames; frames where either instance is undetected count
// as 0. Throws ArgumentError when the clips differ in length or an instance
// id is unknown.
double instance_similarity(const TrackedClip& clip_n, const TrackedClip& clip_m,
                           int u, int v);
double instance_similarity(const InstanceTracks& n, const InstanceTracks& m,
                           std::size_t u_index, std::size_t v_index);

// |I_n| x |I_m| mIoU matrix, rows/cols in ascending instance id order.
Eigen::MatrixXd similarity_matrix(const InstanceTracks& n, const InstanceTracks& m);

// Instance association between two clips.
struct Assignment {
  std::vector<std::pair<int, int>> matches;  // (id in n, id in m)
  std::vector<int> unmatched_n;
  std::vector<int> unmatched_m;
};

// Maximum-similarity association; matched pairs with zero similarity are
// demoted to unmatched on both sides.
Assignment associate(const InstanceTracks& n, const InstanceTracks& m);

// Video-to-video distance in squared pixels: area-weighted (1 - IoU) over
// matched instances plus mean box area of every unmatched instance of either
// clip. Throws ArgumentError when the clips differ in length.
double soia_distance(const TrackedClip& clip_n, const TrackedClip& clip_m);
double soia_distance(const InstanceTracks& n, const InstanceTracks& m);

// Symmetric |B| x |B| matrix of soia_distance with a zero diagonal. Entries
// are computed independently (optionally on `threads` workers) and each
// equals soia_distance(clips[i], clips[j]) with i < j.
Eigen::MatrixXd distance_matrix(std::span<const TrackedClip> clips, int threads = 1);
Eigen::MatrixXd distance_matrix(std::span<const InstanceTracks> tracks, int threads = 1);

struct PosNegSelection {
  int positive = -1;
  std::vector<int> margin;     // skipped between positive and negatives
  std::vector<int> negatives;  // ascending distance order
};

// Positive = nearest non-anchor sample; the next floor(margin_fraction * B)
// nearest are skipped and the remaining B - 2 - floor(margin_fraction * B)
// are negatives. Ties go to the lower index. Throws ConfigError when
// 1 + floor(margin_fraction * B) > B - 1, and ArgumentError for B < 2 or a
// negative fraction.
PosNegSelection select_pos_neg(int anchor, std::span<const double> distances,
                               double margin_fraction);

// floor(margin_fraction * batch_size), robust to representation error.
int margin_count(double margin_fraction, int batch_size);

}  // namespace sscl
