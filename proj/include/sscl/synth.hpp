#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sscl/augment.hpp"
#include "sscl/types.hpp"

namespace sscl {

enum class ScenarioKind {
  kCrossLeftToRight,
  kCrossRightToLeft,
  kLeadVehicleStop,
  kOncomingPass,
  kEmptyRoad,
  kEgoTurnLeftProxy,
  kEgoTurnRightProxy,
};

inline constexpr int kNumScenarioKinds = 7;

std::string to_string(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kCrossLeftToRight;
  int background_actors = 2;  // upper bound, actual count drawn in [0, n]
  double noise = 2.0;         // box jitter standard deviation, pixels
  double dropout = 0.05;      // per-detection miss probability
  std::uint64_t seed = 0;
  int width = 1280;
  int height = 720;
  int num_frames = 10;

  void validate() const;
};

// A scenario on the working frame grid: detections sorted by (frame, id) and
// lane polylines with inclusive frame ranges.
struct Scenario {
  std::vector<DetectedObject> objects;
  std::vector<LanePolyline> lanes;
};

Scenario simulate(const ScenarioSpec& spec, Rng& rng);

// Clip of a simulated scenario; the label is the kind index.
TrackedClip generate(const ScenarioSpec& spec, Rng& rng, double lane_step = 20.0);
// Same, with the generator seeded from spec.seed.
TrackedClip generate(const ScenarioSpec& spec, double lane_step = 20.0);

std::vector<ScenarioKind> benchmark_classes();
std::vector<ScenarioKind> benchmark_extra_kinds();

struct DatasetSpec {
  std::vector<ScenarioKind> classes = benchmark_classes();
  int clips_per_class = 50;
  std::vector<ScenarioKind> extra_kinds = benchmark_extra_kinds();
  int extra_clips = 150;  // out-of-class, unlabeled, spread over extra_kinds
  int val_per_class = 20;
  int val_extra = 0;
  double labeled_fraction = 1.0;
  std::uint64_t seed = 0;
  ScenarioSpec base;  // noise, dropout, actors and frame geometry
  double lane_step = 20.0;

  void validate() const;
};

struct SyntheticClip {
  std::string clip_id;
  ScenarioSpec spec;
  std::string split;  // "train" or "val"
  std::optional<int> label;  // class index when the clip is labeled
};

struct SyntheticDataset {
  std::vector<std::string> class_names;  // sorted; label k names class_names[k]
  std::vector<SyntheticClip> entries;
  std::vector<TrackedClip> labeled;
  std::vector<TrackedClip> unlabeled;
  std::vector<TrackedClip> validation;
};

// Stratified split. Each clip's content depends only on the seed, its split,
// kind and ordinal, and the labeled subset of a class at a smaller fraction
// is contained in the subset at a larger one.
SyntheticDataset generate_dataset(const DatasetSpec& spec);

struct WriteOptions {
  double fps_in = 30.0;
  double fps_out = 2.5;
};

// Writes tracks/<id>.csv, lanes/<id>.json and manifest.csv under `dir`.
// Track files are at fps_in with interpolated frames between working frames,
// so loading the manifest reproduces the in-memory clips exactly.
void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& dataset,
                   const WriteOptions& options = {});

}  // namespace sscl
