#include "sscl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "sscl/error.hpp"
#include "sscl/ingest.hpp"

namespace sscl {

namespace {

constexpr std::array<const char*, kNumScenarioKinds> kKindNames = {
    "cross_left_to_right", "cross_right_to_left", "lead_vehicle_stop", "oncoming_pass",
    "empty_road",          "ego_turn_left_proxy", "ego_turn_right_proxy",
};

struct Shape {
  double cx, cy, w, h;
};

// Ideal (noise-free) box of one actor at every working frame.
struct ActorPath {
  int instance_id;
  int class_id;
  std::vector<Shape> frames;
};

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int vehicle_class(Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  if (u < 0.7) return static_cast<int>(ObjectClass::kCar);
  if (u < 0.9) return static_cast<int>(ObjectClass::kTruck);
  return static_cast<int>(ObjectClass::kBus);
}

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Horizontal image shift caused by ego rotation at normalized time t.
double ego_shift(ScenarioKind kind, double sweep, double t) {
  if (kind == ScenarioKind::kEgoTurnLeftProxy) return sweep * t;
  if (kind == ScenarioKind::kEgoTurnRightProxy) return -sweep * t;
  return 0.0;
}

// The ego keeps driving forward, so anything fixed in the world grows and
// drifts away from the vanishing point. Depth shrinks linearly over the clip
// by the fraction `approach`.
void apply_approach(const ScenarioSpec& spec, double sweep, double approach, ActorPath& a) {
  const double horizon = spec.height * 0.45;
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    const double t = static_cast<double>(f) / (spec.num_frames - 1);
    const double scale = 1.0 / (1.0 - approach * t);
    const double vx = spec.width / 2.0 + ego_shift(spec.kind, sweep, t);
    Shape& s = a.frames[f];
    s.cx = vx + (s.cx - vx) * scale;
    s.cy = horizon + (s.cy - horizon) * scale;
    s.w *= scale;
    s.h *= scale;
  }
}

bool world_fixed(ScenarioKind kind) {
  return kind != ScenarioKind::kLeadVehicleStop && kind != ScenarioKind::kOncomingPass;
}

ActorPath main_actor(const ScenarioSpec& spec, double sweep, Rng& rng) {
  const double W = spec.width;
  const double H = spec.height;
  const int T = spec.num_frames;
  ActorPath a{1, vehicle_class(rng), {}};
  a.frames.reserve(static_cast<std::size_t>(T));

  switch (spec.kind) {
    case ScenarioKind::kCrossLeftToRight:
    case ScenarioKind::kCrossRightToLeft: {
      const double y = H * uniform(rng, 0.52, 0.62);
      const double w = W * uniform(rng, 0.11, 0.15);
      const double h = w * uniform(rng, 0.55, 0.7);
      double x0 = W * uniform(rng, 0.02, 0.15);
      double x1 = W * uniform(rng, 0.85, 0.98);
      if (spec.kind == ScenarioKind::kCrossRightToLeft) {
        x0 = W - x0;
        x1 = W - x1;
      }
      for (int f = 0; f < T; ++f) {
        const double t = static_cast<double>(f) / (T - 1);
        a.frames.push_back({lerp(x0, x1, t), y, w, h});
      }
      break;
    }
    case ScenarioKind::kLeadVehicleStop: {
      const double x = W * uniform(rng, 0.47, 0.53);
      const double y0 = H * uniform(rng, 0.50, 0.54);
      const double y1 = H * uniform(rng, 0.60, 0.66);
      const double w0 = W * uniform(rng, 0.07, 0.10);
      const double w1 = W * uniform(rng, 0.20, 0.26);
      const double stop_at = uniform(rng, 0.5, 0.8);
      for (int f = 0; f < T; ++f) {
        const double t = std::min(1.0, static_cast<double>(f) / (T - 1) / stop_at);
        const double w = lerp(w0, w1, t);
        a.frames.push_back({x, lerp(y0, y1, t), w, 0.75 * w});
      }
      break;
    }
    case ScenarioKind::kOncomingPass: {
      const double x0 = W * uniform(rng, 0.40, 0.46);
      const double x1 = W * uniform(rng, 0.05, 0.20);
      const double w0 = W * uniform(rng, 0.03, 0.05);
      const double w1 = W * uniform(rng, 0.18, 0.25);
      for (int f = 0; f < T; ++f) {
        const double t = std::pow(static_cast<double>(f) / (T - 1), 1.5);
        const double w = lerp(w0, w1, t);
        a.frames.push_back({lerp(x0, x1, t), lerp(H * 0.48, H * 0.70, t), w, 0.7 * w});
      }
      break;
    }
    case ScenarioKind::kEgoTurnLeftProxy:
    case ScenarioKind::kEgoTurnRightProxy: {
      const double x = W * uniform(rng, 0.35, 0.65);
      const double y = H * uniform(rng, 0.52, 0.60);
      const double w = W * uniform(rng, 0.08, 0.12);
      for (int f = 0; f < T; ++f) {
        const double t = static_cast<double>(f) / (T - 1);
        a.frames.push_back({x + ego_shift(spec.kind, sweep, t), y, w, 0.75 * w});
      }
      break;
    }
    case ScenarioKind::kEmptyRoad:
      break;
  }
  return a;
}

// A parked vehicle at the roadside; it only moves with the ego.
ActorPath background_actor(const ScenarioSpec& spec, int instance_id, double sweep, Rng& rng) {
  const double W = spec.width;
  const double H = spec.height;
  const bool left = uniform(rng, 0.0, 1.0) < 0.5;
  const double x = W * (left ? uniform(rng, 0.03, 0.22) : uniform(rng, 0.78, 0.97));
  const double y = H * uniform(rng, 0.55, 0.75);
  const double w = W * uniform(rng, 0.06, 0.11);
  ActorPath a{instance_id, vehicle_class(rng), {}};
  for (int f = 0; f < spec.num_frames; ++f) {
    const double t = static_cast<double>(f) / (spec.num_frames - 1);
    a.frames.push_back({x + ego_shift(spec.kind, sweep, t), y, w, 0.7 * w});
  }
  return a;
}

std::vector<LanePolyline> lane_lines(const ScenarioSpec& spec, double sweep, Rng& rng) {
  const double W = spec.width;
  const double H = spec.height;
  const double horizon = H * 0.45;
  const double left_base = W * uniform(rng, 0.12, 0.18);
  const double right_base = W * uniform(rng, 0.82, 0.88);
  auto line = [&](double base, double top, double dx) {
    std::vector<Point> v;
    v.push_back({base + dx, H});
    v.push_back({(base + top) / 2.0 + dx, (H + horizon) / 2.0});
    v.push_back({top + dx, horizon});
    return v;
  };
  const bool turning = spec.kind == ScenarioKind::kEgoTurnLeftProxy ||
                       spec.kind == ScenarioKind::kEgoTurnRightProxy;
  std::vector<LanePolyline> lanes;
  if (!turning) {
    lanes.push_back({line(left_base, W * 0.47, 0.0), 0, spec.num_frames - 1});
    lanes.push_back({line(right_base, W * 0.53, 0.0), 0, spec.num_frames - 1});
    return lanes;
  }
  for (int f = 0; f < spec.num_frames; ++f) {
    const double dx = ego_shift(spec.kind, sweep, static_cast<double>(f) / (spec.num_frames - 1));
    lanes.push_back({line(left_base, W * 0.47, dx), f, f});
    lanes.push_back({line(right_base, W * 0.53, dx), f, f});
  }
  return lanes;
}

Session scenario_session(const ScenarioSpec& spec, Scenario scenario) {
  Session s;
  s.width = spec.width;
  s.height = spec.height;
  s.num_frames = spec.num_frames;
  s.objects = std::move(scenario.objects);
  s.lanes = std::move(scenario.lanes);
  return s;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  return kKindNames.at(static_cast<std::size_t>(kind));
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  for (std::size_t k = 0; k < kKindNames.size(); ++k) {
    if (name == kKindNames[k]) return static_cast<ScenarioKind>(k);
  }
  throw ArgumentError("unknown scenario kind '" + name + "'");
}

void ScenarioSpec::validate() const {
  if (!(noise >= 0.0)) throw ArgumentError("noise must be non-negative");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ArgumentError("dropout must be in [0, 1)");
  if (num_frames < 2) throw ArgumentError("scenarios need at least two frames");
  if (width < 1 || height < 1) throw ArgumentError("frame size must be positive");
  if (background_actors < 0) throw ArgumentError("background actor count must be non-negative");
}

Scenario simulate(const ScenarioSpec& spec, Rng& rng) {
  spec.validate();
  const double sweep = spec.width * uniform(rng, 0.35, 0.5);
  const double approach = uniform(rng, 0.25, 0.4);

  std::vector<ActorPath> actors;
  if (spec.kind != ScenarioKind::kEmptyRoad) {
    actors.push_back(main_actor(spec, sweep, rng));
    if (world_fixed(spec.kind)) apply_approach(spec, sweep, approach, actors.back());
    const int extra = std::uniform_int_distribution<int>(0, spec.background_actors)(rng);
    for (int k = 0; k < extra; ++k) {
      actors.push_back(background_actor(spec, k + 2, sweep, rng));
      apply_approach(spec, sweep, approach, actors.back());
    }
  }

  Scenario out;
  out.lanes = lane_lines(spec, sweep, rng);
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (int f = 0; f < spec.num_frames; ++f) {
    for (const auto& actor : actors) {
      const Shape& s = actor.frames[static_cast<std::size_t>(f)];
      // Draw every random number even for dropped detections so one actor's
      // misses do not shift the others' noise.
      const double n[4] = {jitter(rng), jitter(rng), jitter(rng), jitter(rng)};
      const bool missed = uniform(rng, 0.0, 1.0) < spec.dropout;
      if (missed) continue;
      const double w = std::max(4.0, s.w + spec.noise * n[2]);
      const double h = std::max(4.0, s.h + spec.noise * n[3]);
      BoundingBox box{s.cx + spec.noise * n[0] - w / 2.0, s.cy + spec.noise * n[1] - h / 2.0, w, h};
      if (!clamp_box(box, spec.width, spec.height)) continue;
      out.objects.push_back({f, actor.instance_id, actor.class_id, box, 1.0});
    }
  }
  return out;
}

TrackedClip generate(const ScenarioSpec& spec, Rng& rng, double lane_step) {
  TrackedClip clip =
      extract_clip(scenario_session(spec, simulate(spec, rng)), 0, spec.num_frames, lane_step,
                   to_string(spec.kind));
  clip.label = static_cast<int>(spec.kind);
  return clip;
}

TrackedClip generate(const ScenarioSpec& spec, double lane_step) {
  Rng rng(spec.seed);
  return generate(spec, rng, lane_step);
}

std::vector<ScenarioKind> benchmark_classes() {
  return {ScenarioKind::kCrossLeftToRight, ScenarioKind::kCrossRightToLeft,
          ScenarioKind::kLeadVehicleStop, ScenarioKind::kEgoTurnLeftProxy,
          ScenarioKind::kEgoTurnRightProxy};
}

std::vector<ScenarioKind> benchmark_extra_kinds() {
  return {ScenarioKind::kOncomingPass, ScenarioKind::kEmptyRoad};
}

void DatasetSpec::validate() const {
  if (classes.empty()) throw ArgumentError("dataset needs at least one class");
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = i + 1; j < classes.size(); ++j) {
      if (classes[i] == classes[j]) throw ArgumentError("duplicate class kind");
    }
    if (std::find(extra_kinds.begin(), extra_kinds.end(), classes[i]) != extra_kinds.end()) {
      throw ArgumentError("a kind cannot be both a class and out-of-class");
    }
  }
  if (clips_per_class < 0 || extra_clips < 0 || val_per_class < 0 || val_extra < 0) {
    throw ArgumentError("clip counts must be non-negative");
  }
  if ((extra_clips > 0 || val_extra > 0) && extra_kinds.empty()) {
    throw ArgumentError("out-of-class clips requested without out-of-class kinds");
  }
  if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) {
    throw ArgumentError("labeled fraction must be in [0, 1]");
  }
  base.validate();
}

SyntheticDataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  std::vector<ScenarioKind> classes = spec.classes;
  std::sort(classes.begin(), classes.end(),
            [](ScenarioKind a, ScenarioKind b) { return to_string(a) < to_string(b); });

  SyntheticDataset out;
  for (auto kind : classes) out.class_names.push_back(to_string(kind));

  auto make = [&](ScenarioKind kind, std::uint64_t split_key, int ordinal,
                  const std::string& split) {
    SyntheticClip entry;
    entry.spec = spec.base;
    entry.spec.kind = kind;
    entry.spec.seed = derive_seed(spec.seed, {split_key, static_cast<std::uint64_t>(kind),
                                              static_cast<std::uint64_t>(ordinal)});
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%04d", ordinal);
    entry.clip_id = split + "_" + to_string(kind) + suffix;
    entry.split = split;
    return entry;
  };
  auto clip_of = [&](const SyntheticClip& entry) {
    TrackedClip clip = generate(entry.spec, spec.lane_step);
    clip.clip_id = entry.clip_id;
    clip.label = entry.label;
    return clip;
  };

  const auto labeled_per_class = static_cast<std::size_t>(
      std::floor(spec.labeled_fraction * spec.clips_per_class + 1e-9));
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<int> order(static_cast<std::size_t>(spec.clips_per_class));
    for (int k = 0; k < spec.clips_per_class; ++k) order[static_cast<std::size_t>(k)] = k;
    Rng pick(derive_seed(spec.seed, {7, static_cast<std::uint64_t>(classes[c])}));
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      std::uniform_int_distribution<std::size_t> d(i, order.size() - 1);
      std::swap(order[i], order[d(pick)]);
    }
    std::vector<char> labeled(order.size(), 0);
    for (std::size_t i = 0; i < labeled_per_class; ++i) {
      labeled[static_cast<std::size_t>(order[i])] = 1;
    }
    for (int k = 0; k < spec.clips_per_class; ++k) {
      SyntheticClip entry = make(classes[c], 1, k, "train");
      if (labeled[static_cast<std::size_t>(k)]) entry.label = static_cast<int>(c);
      (entry.label ? out.labeled : out.unlabeled).push_back(clip_of(entry));
      out.entries.push_back(std::move(entry));
    }
  }
  for (int k = 0; k < spec.extra_clips; ++k) {
    const auto kind = spec.extra_kinds[static_cast<std::size_t>(k) % spec.extra_kinds.size()];
    SyntheticClip entry = make(kind, 1, k, "train");
    out.unlabeled.push_back(clip_of(entry));
    out.entries.push_back(std::move(entry));
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (int k = 0; k < spec.val_per_class; ++k) {
      SyntheticClip entry = make(classes[c], 2, k, "val");
      entry.label = static_cast<int>(c);
      out.validation.push_back(clip_of(entry));
      out.entries.push_back(std::move(entry));
    }
  }
  for (int k = 0; k < spec.val_extra; ++k) {
    const auto kind = spec.extra_kinds[static_cast<std::size_t>(k) % spec.extra_kinds.size()];
    SyntheticClip entry = make(kind, 2, k, "val");
    out.validation.push_back(clip_of(entry));
    out.entries.push_back(std::move(entry));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SyntheticDataset& dataset,
                   const WriteOptions& options) {
  namespace fs = std::filesystem;
  const int stride = downsample_stride(options.fps_in, options.fps_out);
  fs::create_directories(dir / "tracks");
  fs::create_directories(dir / "lanes");

  std::vector<ClipRecord> records;
  for (const auto& entry : dataset.entries) {
    Rng rng(entry.spec.seed);
    const Scenario scenario = simulate(entry.spec, rng);

    // Working frame f sits at source frame f * stride; frames in between
    // interpolate instances detected at both ends and vanish on downsampling.
    std::vector<DetectedObject> source;
    for (const auto& o : scenario.objects) {
      DetectedObject s = o;
      s.frame_index = o.frame_index * stride;
      source.push_back(s);
      for (const auto& next : scenario.objects) {
        if (next.frame_index != o.frame_index + 1 || next.instance_id != o.instance_id) continue;
        for (int j = 1; j < stride; ++j) {
          const double t = static_cast<double>(j) / stride;
          DetectedObject mid = o;
          mid.frame_index = o.frame_index * stride + j;
          mid.bbox = {lerp(o.bbox.x_min, next.bbox.x_min, t), lerp(o.bbox.y_min, next.bbox.y_min, t),
                      lerp(o.bbox.width, next.bbox.width, t),
                      lerp(o.bbox.height, next.bbox.height, t)};
          source.push_back(mid);
        }
      }
    }
    std::stable_sort(source.begin(), source.end(),
                     [](const DetectedObject& a, const DetectedObject& b) {
                       if (a.frame_index != b.frame_index) return a.frame_index < b.frame_index;
                       return a.instance_id < b.instance_id;
                     });
    std::vector<LanePolyline> lanes = scenario.lanes;
    for (auto& l : lanes) {
      l.first_frame *= stride;
      l.last_frame = l.last_frame * stride + stride - 1;
    }

    const std::string track_rel = "tracks/" + entry.clip_id + ".csv";
    const std::string lane_rel = "lanes/" + entry.clip_id + ".json";
    {
      std::ofstream out(dir / track_rel);
      if (!out) throw DataError("cannot write " + (dir / track_rel).string());
      write_track_file(out, source);
    }
    {
      std::ofstream out(dir / lane_rel);
      if (!out) throw DataError("cannot write " + (dir / lane_rel).string());
      write_lane_file(out, lanes);
    }

    ClipRecord r;
    r.clip_id = entry.clip_id;
    r.track_file = track_rel;
    r.lane_file = lane_rel;
    r.width = entry.spec.width;
    r.height = entry.spec.height;
    r.fps_in = options.fps_in;
    r.fps_out = options.fps_out;
    r.frame_begin = 0;
    r.frame_end = entry.spec.num_frames;
    if (entry.label) r.label = dataset.class_names.at(static_cast<std::size_t>(*entry.label));
    r.split = entry.split;
    records.push_back(std::move(r));
  }
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw DataError("cannot write " + (dir / "manifest.csv").string());
  write_manifest(manifest, records);
}

}  // namespace sscl
