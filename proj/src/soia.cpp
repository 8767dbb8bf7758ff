#include "sscl/soia.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "sscl/error.hpp"
#include "sscl/hungarian.hpp"
#include "sscl/parallel.hpp"

namespace sscl {

double iou(const BoundingBox& a, const BoundingBox& b) {
  // Rebuilding the overlap from corner differences loses the last bits, so
  // identical boxes are answered directly.
  if (a.x_min == b.x_min && a.y_min == b.y_min && a.width == b.width && a.height == b.height &&
      a.area() > 0.0) {
    return 1.0;
  }
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

InstanceTracks InstanceTracks::from_clip(const TrackedClip& clip) {
  InstanceTracks tracks;
  tracks.num_frames = clip.num_frames;
  std::map<int, std::vector<std::optional<BoundingBox>>> by_id;
  for (const auto& o : clip.objects) {
    if (o.frame_index < 0 || o.frame_index >= clip.num_frames) {
      throw DataError("clip " + clip.clip_id + ": object outside clip frames");
    }
    auto& seq = by_id[o.instance_id];
    seq.resize(clip.num_frames);
    if (seq[o.frame_index]) {
      throw DataError("clip " + clip.clip_id + ": duplicate instance " +
                      std::to_string(o.instance_id));
    }
    seq[o.frame_index] = o.bbox;
  }
  for (auto& [id, seq] : by_id) {
    tracks.ids.push_back(id);
    tracks.boxes.push_back(std::move(seq));
  }
  return tracks;
}

int InstanceTracks::index_of(int instance_id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), instance_id);
  if (it == ids.end() || *it != instance_id) return -1;
  return static_cast<int>(it - ids.begin());
}

namespace {

void require_same_length(const InstanceTracks& n, const InstanceTracks& m) {
  if (n.num_frames != m.num_frames) {
    throw ArgumentError("clips differ in frame count (" +
                        std::to_string(n.num_frames) + " vs " +
                        std::to_string(m.num_frames) + ")");
  }
}

// Total order on track sets, used to evaluate pairwise quantities in one
// fixed orientation so that f(n, m) and f(m, n) agree bit for bit.
bool canonical_less(const InstanceTracks& a, const InstanceTracks& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& sa = a.boxes[k];
    const auto& sb = b.boxes[k];
    for (std::size_t t = 0; t < sa.size() && t < sb.size(); ++t) {
      if (sa[t].has_value() != sb[t].has_value()) return !sa[t].has_value();
      if (!sa[t]) continue;
      const auto ka = std::tie(sa[t]->x_min, sa[t]->y_min, sa[t]->width, sa[t]->height);
      const auto kb = std::tie(sb[t]->x_min, sb[t]->y_min, sb[t]->width, sb[t]->height);
      if (ka != kb) return ka < kb;
    }
  }
  return false;
}

Assignment associate_oriented(const InstanceTracks& n, const InstanceTracks& m) {
  const Eigen::MatrixXd s = similarity_matrix(n, m);
  const MatrixAssignment raw = hungarian_max(s);
  Assignment out;
  std::vector<char> used_n(n.size(), 0), used_m(m.size(), 0);
  for (const auto& [r, c] : raw.pairs) {
    if (s(r, c) > 0.0) {
      out.matches.emplace_back(n.ids[r], m.ids[c]);
      used_n[r] = used_m[c] = 1;
    }
  }
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (!used_n[k]) out.unmatched_n.push_back(n.ids[k]);
  }
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!used_m[k]) out.unmatched_m.push_back(m.ids[k]);
  }
  return out;
}

}  // namespace

double instance_similarity(const InstanceTracks& n, const InstanceTracks& m,
                           std::size_t u_index, std::size_t v_index) {
  require_same_length(n, m);
  const auto& u = n.boxes.at(u_index);
  const auto& v = m.boxes.at(v_index);
  double sum = 0.0;
  for (int t = 0; t < n.num_frames; ++t) {
    if (u[t] && v[t]) sum += iou(*u[t], *v[t]);
  }
  return sum / n.num_frames;
}

double instance_similarity(const TrackedClip& clip_n, const TrackedClip& clip_m,
                           int u, int v) {
  const auto n = InstanceTracks::from_clip(clip_n);
  const auto m = InstanceTracks::from_clip(clip_m);
  require_same_length(n, m);
  const int ui = n.index_of(u);
  const int vi = m.index_of(v);
  if (ui < 0 || vi < 0) throw ArgumentError("unknown instance id");
  return instance_similarity(n, m, ui, vi);
}

Eigen::MatrixXd similarity_matrix(const InstanceTracks& n, const InstanceTracks& m) {
  require_same_length(n, m);
  Eigen::MatrixXd s(n.size(), m.size());
  for (std::size_t u = 0; u < n.size(); ++u) {
    for (std::size_t v = 0; v < m.size(); ++v) s(u, v) = instance_similarity(n, m, u, v);
  }
  return s;
}

Assignment associate(const InstanceTracks& n, const InstanceTracks& m) {
  require_same_length(n, m);
  if (!canonical_less(m, n)) return associate_oriented(n, m);
  Assignment flipped = associate_oriented(m, n);
  Assignment out;
  for (const auto& [a, b] : flipped.matches) out.matches.emplace_back(b, a);
  std::sort(out.matches.begin(), out.matches.end());
  out.unmatched_n = std::move(flipped.unmatched_m);
  out.unmatched_m = std::move(flipped.unmatched_n);
  return out;
}

double soia_distance(const InstanceTracks& n, const InstanceTracks& m) {
  require_same_length(n, m);
  const int frames = n.num_frames;
  if (frames == 0) return 0.0;
  const Assignment a = associate(n, m);

  // Per-instance terms are summed in sorted order, which makes the result
  // independent of argument order.
  std::vector<double> terms;
  terms.reserve(a.matches.size() + a.unmatched_n.size() + a.unmatched_m.size());
  for (const auto& [uid, vid] : a.matches) {
    const auto& u = n.boxes[n.index_of(uid)];
    const auto& v = m.boxes[m.index_of(vid)];
    double sum = 0.0;
    for (int t = 0; t < frames; ++t) {
      if (u[t] && v[t]) {
        sum += (1.0 - iou(*u[t], *v[t])) * std::max(u[t]->area(), v[t]->area());
      } else if (u[t]) {
        sum += u[t]->area();
      } else if (v[t]) {
        sum += v[t]->area();
      }
    }
    terms.push_back(sum / frames);
  }
  auto unmatched_term = [frames](const std::vector<std::optional<BoundingBox>>& seq) {
    double sum = 0.0;
    for (int t = 0; t < frames; ++t) {
      if (seq[t]) sum += seq[t]->area();
    }
    return sum / frames;
  };
  for (int id : a.unmatched_n) terms.push_back(unmatched_term(n.boxes[n.index_of(id)]));
  for (int id : a.unmatched_m) terms.push_back(unmatched_term(m.boxes[m.index_of(id)]));
  std::sort(terms.begin(), terms.end());
  double d = 0.0;
  for (double t : terms) d += t;
  return d;
}

double soia_distance(const TrackedClip& clip_n, const TrackedClip& clip_m) {
  return soia_distance(InstanceTracks::from_clip(clip_n),
                       InstanceTracks::from_clip(clip_m));
}

Eigen::MatrixXd distance_matrix(std::span<const InstanceTracks> tracks, int threads) {
  const std::size_t b = tracks.size();
  for (const auto& t : tracks) require_same_length(tracks.front(), t);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(b * (b - (b ? 1 : 0)) / 2);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t k) {
    values[k] = soia_distance(tracks[pairs[k].first], tracks[pairs[k].second]);
  });
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(b, b);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    d(pairs[k].first, pairs[k].second) = values[k];
    d(pairs[k].second, pairs[k].first) = values[k];
  }
  return d;
}

Eigen::MatrixXd distance_matrix(std::span<const TrackedClip> clips, int threads) {
  std::vector<InstanceTracks> tracks;
  tracks.reserve(clips.size());
  for (const auto& c : clips) tracks.push_back(InstanceTracks::from_clip(c));
  return distance_matrix(std::span<const InstanceTracks>(tracks), threads);
}

int margin_count(double margin_fraction, int batch_size) {
  return static_cast<int>(std::floor(margin_fraction * batch_size + 1e-9));
}

PosNegSelection select_pos_neg(int anchor, std::span<const double> distances,
                               double margin_fraction) {
  const int b = static_cast<int>(distances.size());
  if (b < 2) throw ArgumentError("batch needs at least 2 samples");
  if (anchor < 0 || anchor >= b) throw ArgumentError("anchor index out of range");
  if (!(margin_fraction >= 0.0)) throw ArgumentError("margin fraction must be >= 0");
  const int margin = margin_count(margin_fraction, b);
  if (1 + margin > b - 1) {
    throw ConfigError("margin of " + std::to_string(margin) +
                      " leaves no room for a positive in a batch of " +
                      std::to_string(b));
  }
  std::vector<int> order;
  order.reserve(b - 1);
  for (int k = 0; k < b; ++k) {
    if (k != anchor) order.push_back(k);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int x, int y) { return distances[x] < distances[y]; });
  PosNegSelection sel;
  sel.positive = order[0];
  sel.margin.assign(order.begin() + 1, order.begin() + 1 + margin);
  sel.negatives.assign(order.begin() + 1 + margin, order.end());
  return sel;
}

}  // namespace sscl
