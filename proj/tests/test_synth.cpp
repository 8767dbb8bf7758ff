#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sscl/error.hpp"
#include "sscl/ingest.hpp"
#include "sscl/synth.hpp"

using namespace sscl;
namespace fs = std::filesystem;

namespace {

DatasetSpec tiny_spec(double fraction) {
  DatasetSpec s;
  s.clips_per_class = 4;
  s.extra_clips = 3;
  s.val_per_class = 2;
  s.labeled_fraction = fraction;
  s.seed = 21;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(ScenarioKind, NamesRoundTrip) {
  for (int k = 0; k < kNumScenarioKinds; ++k) {
    const auto kind = static_cast<ScenarioKind>(k);
    EXPECT_EQ(parse_scenario_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_scenario_kind("flying"), ArgumentError);
}

TEST(Generate, DeterministicAndInFrame) {
  for (int k = 0; k < kNumScenarioKinds; ++k) {
    ScenarioSpec spec;
    spec.kind = static_cast<ScenarioKind>(k);
    spec.seed = 40 + static_cast<std::uint64_t>(k);
    spec.background_actors = 3;
    const TrackedClip a = generate(spec), b = generate(spec);
    EXPECT_EQ(a.objects, b.objects);
    EXPECT_EQ(a.lanes, b.lanes);
    EXPECT_EQ(a.num_frames, 10);
    EXPECT_EQ(a.lanes.size(), 10u);
    std::set<std::pair<int, int>> keys;
    for (const auto& o : a.objects) {
      EXPECT_GE(o.frame_index, 0);
      EXPECT_LT(o.frame_index, 10);
      EXPECT_GE(o.bbox.x_min, 0.0);
      EXPECT_LE(o.bbox.x_min + o.bbox.width, spec.width + 1e-9);
      EXPECT_GT(o.bbox.width, 0.0);
      EXPECT_TRUE(keys.insert({o.frame_index, o.instance_id}).second);
    }
  }
}

TEST(Generate, DifferentSeedsDiffer) {
  ScenarioSpec a, b;
  a.seed = 1;
  b.seed = 2;
  EXPECT_NE(generate(a).objects, generate(b).objects);
}

TEST(ScenarioSpec, Validates) {
  ScenarioSpec s;
  s.dropout = 1.0;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = ScenarioSpec{};
  s.num_frames = 0;
  EXPECT_THROW(s.validate(), ArgumentError);
}

TEST(GenerateDataset, SplitsAndCounts) {
  const SyntheticDataset d = generate_dataset(tiny_spec(0.5));
  const std::size_t classes = benchmark_classes().size();
  EXPECT_EQ(d.class_names.size(), classes);
  EXPECT_TRUE(std::is_sorted(d.class_names.begin(), d.class_names.end()));
  EXPECT_EQ(d.labeled.size(), classes * 2);
  EXPECT_EQ(d.unlabeled.size(), classes * 2 + 3);
  EXPECT_EQ(d.validation.size(), classes * 2);
  std::set<std::string> ids;
  for (const auto& e : d.entries) EXPECT_TRUE(ids.insert(e.clip_id).second);
}

TEST(GenerateDataset, LabeledSubsetsAreNested) {
  auto labeled_ids = [](double fraction) {
    std::set<std::string> out;
    for (const auto& e : generate_dataset(tiny_spec(fraction)).entries)
      if (e.split == "train" && e.label) out.insert(e.clip_id);
    return out;
  };
  const auto quarter = labeled_ids(0.25), half = labeled_ids(0.5), all = labeled_ids(1.0);
  EXPECT_TRUE(std::includes(half.begin(), half.end(), quarter.begin(), quarter.end()));
  EXPECT_TRUE(std::includes(all.begin(), all.end(), half.begin(), half.end()));
  EXPECT_LT(quarter.size(), half.size());
}

TEST(WriteDataset, LoadsBackThroughTheManifest) {
  const fs::path dir = fs::temp_directory_path() / "sscl_test_synth_write";
  fs::remove_all(dir);
  const SyntheticDataset d = generate_dataset(tiny_spec(0.5));
  write_dataset(dir, d);
  const auto records = read_manifest_file(dir / "manifest.csv");
  ASSERT_EQ(records.size(), d.entries.size());
  EXPECT_EQ(manifest_classes(records), d.class_names);

  ClipLoader loader(d.class_names, ClipLoadOptions{0.0, 20.0});
  const auto clips = loader.load_all(records);
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    EXPECT_EQ(clips[i].clip_id, records[i].clip_id);
    EXPECT_EQ(clips[i].num_frames, 10);
    labeled += clips[i].label.has_value() && records[i].split == "train";
  }
  EXPECT_EQ(labeled, d.labeled.size());

  const std::string first = slurp(dir / "manifest.csv");
  write_dataset(dir, d);
  EXPECT_EQ(slurp(dir / "manifest.csv"), first);
  fs::remove_all(dir);
}
