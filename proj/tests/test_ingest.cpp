#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "sscl/error.hpp"
#include "sscl/ingest.hpp"

using namespace sscl;

namespace {

std::vector<DetectedObject> parse(const std::string& text, TrackParseOptions opts = {}) {
  std::istringstream in(text);
  return parse_track_file(in, opts);
}

DetectedObject obj(int frame, int id, double x = 10, double y = 10) {
  return {frame, id, 2, {x, y, 20, 20}, 0.9};
}

}  // namespace

TEST(ParseTrackFile, MapsFieldsDirectly) {
  const auto objs = parse("3,7,10,20,30,40,2,0.9\n");
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(objs[0].frame_index, 3);
  EXPECT_EQ(objs[0].instance_id, 7);
  EXPECT_EQ(objs[0].class_id, 2);
  EXPECT_EQ(objs[0].bbox, (BoundingBox{10, 20, 30, 40}));
  EXPECT_DOUBLE_EQ(objs[0].score, 0.9);
}

TEST(ParseTrackFile, EmptyStreamGivesNothing) {
  EXPECT_TRUE(parse("").empty());
  EXPECT_TRUE(parse("frame,id,x,y,w,h,class,score\n").empty());
}

TEST(ParseTrackFile, NegativeWidthIsRecordError) {
  EXPECT_THROW(parse("3,7,10,20,-5,40,2,0.9\n"), RecordError);
}

TEST(ParseTrackFile, ClassOutOfRangeIsRecordError) {
  EXPECT_THROW(parse("3,7,10,20,5,40,8,0.9\n"), RecordError);
  EXPECT_THROW(parse("3,7,10,20,5,40,-1,0.9\n"), RecordError);
}

TEST(ParseTrackFile, MalformedLineReportsLineNumber) {
  try {
    parse("0,1,1,1,1,1,0,1\n0,2,1,1,oops,1,0,1\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("0,1,1,1\n"), ParseError);
}

TEST(ParseTrackFile, LowScoresDropped) {
  const auto objs = parse("0,1,1,1,5,5,0,0.49\n0,2,1,1,5,5,0,0.5\n");
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(objs[0].instance_id, 2);
}

TEST(ParseTrackFile, ClampsAndDropsOutside) {
  TrackParseOptions opts;
  opts.width = 100;
  opts.height = 50;
  const auto objs = parse("0,1,-10,40,30,20,0,1\n0,2,200,10,5,5,0,1\n", opts);
  ASSERT_EQ(objs.size(), 1u);
  EXPECT_EQ(objs[0].bbox, (BoundingBox{0, 40, 20, 10}));
}

TEST(ParseTrackFile, RoundTripsExactly) {
  std::vector<DetectedObject> objs = {{0, 1, 2, {0.1, 1.0 / 3.0, 12.5, 7.25}, 0.75},
                                      {4, 9, 7, {100, 200, 33.3, 1e-3}, 1.0}};
  std::ostringstream out;
  write_track_file(out, objs);
  const auto back = parse(out.str());
  EXPECT_EQ(back, objs);
  std::ostringstream again;
  write_track_file(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Downsample, ThirtyToTwoPointFiveKeepsEveryTwelfth) {
  EXPECT_EQ(downsample_stride(30, 2.5), 12);
  std::vector<DetectedObject> objs;
  for (int f = 0; f < 24; ++f) objs.push_back(obj(f, 1));
  const auto kept = downsample_tracks(objs, 30, 2.5);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].frame_index, 0);
  EXPECT_EQ(kept[1].frame_index, 1);
}

TEST(Downsample, EqualRatesIsIdentity) {
  std::vector<DetectedObject> objs = {obj(0, 1), obj(3, 2), obj(5, 1)};
  EXPECT_EQ(downsample_tracks(objs, 10, 10), objs);
  const auto once = downsample_tracks(objs, 30, 10);
  EXPECT_EQ(downsample_tracks(once, 10, 10), once);
}

TEST(Downsample, RejectsUpsampling) {
  EXPECT_THROW(downsample_stride(2.5, 30), ArgumentError);
  EXPECT_THROW(downsample_stride(0, 0), ArgumentError);
}

TEST(Downsample, LaneRangesMapToSurvivingFrames) {
  std::vector<LanePolyline> lanes = {{{{0, 0}, {1, 1}}, 0, 23}, {{{0, 0}, {1, 1}}, 13, 23}};
  const auto out = downsample_lanes(lanes, 30, 2.5);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].first_frame, 0);
  EXPECT_EQ(out[0].last_frame, 1);
}

TEST(RasterizeLanes, SegmentAtUnitStep) {
  std::vector<LanePolyline> lanes = {{{{0, 0}, {10, 0}}, 0, 0}};
  const auto pts = rasterize_lanes(lanes, 1, 1.0);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0].size(), 11u);
}

TEST(RasterizeLanes, LargeStepKeepsEndpoints) {
  std::vector<LanePolyline> lanes = {{{{0, 0}, {10, 0}}, 0, 0}};
  const auto pts = rasterize_lanes(lanes, 1, 50.0);
  ASSERT_EQ(pts[0].size(), 2u);
  EXPECT_EQ(pts[0][0], (Point{0, 0}));
  EXPECT_EQ(pts[0][1], (Point{10, 0}));
}

TEST(RasterizeLanes, NoPolylinesGivesEmptyFrames) {
  const auto pts = rasterize_lanes({}, 3, 5.0);
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& f : pts) EXPECT_TRUE(f.empty());
}

TEST(RasterizeLanes, DeduplicatesSharedVertices) {
  std::vector<LanePolyline> lanes = {{{{0, 0}, {10, 0}}, 0, 1}, {{{10, 0}, {20, 0}}, 1, 1}};
  const auto pts = rasterize_lanes(lanes, 2, 10.0);
  EXPECT_EQ(pts[0].size(), 2u);
  EXPECT_EQ(pts[1].size(), 3u);
}

TEST(RasterizeLanes, RejectsNonPositiveStep) {
  EXPECT_THROW(rasterize_lanes({}, 1, 0.0), ArgumentError);
}

TEST(LaneFile, RoundTrips) {
  std::vector<LanePolyline> lanes = {{{{0.5, 1}, {10, 20.25}}, 0, 4}, {{{3, 3}, {4, 4}, {5, 6}}, 2, 2}};
  std::ostringstream out;
  write_lane_file(out, lanes);
  std::istringstream in(out.str());
  EXPECT_EQ(parse_lane_file(in), lanes);
}

TEST(LaneFile, RejectsShortPolyline) {
  std::istringstream in(R"([{"frames": [0, 1], "points": [[1, 2]]}])");
  EXPECT_THROW(parse_lane_file(in), DataError);
}

namespace {

Session session_of(int frames) {
  Session s;
  s.session_id = "s";
  s.width = 1280;
  s.height = 720;
  s.num_frames = frames;
  for (int f = 0; f < frames; ++f) s.objects.push_back(obj(f, 1, 10.0 + f));
  return s;
}

}  // namespace

TEST(SliceClips, ThirtyFramesMakeThree) {
  const auto clips = slice_clips(session_of(30), 10, 10, 20.0);
  ASSERT_EQ(clips.size(), 3u);
  for (std::size_t k = 0; k < clips.size(); ++k) {
    EXPECT_EQ(clips[k].num_frames, 10);
    ASSERT_EQ(clips[k].objects.size(), 10u);
    // Local frames, with the original position preserved in the box.
    EXPECT_EQ(clips[k].objects[0].frame_index, 0);
    EXPECT_DOUBLE_EQ(clips[k].objects[0].bbox.x_min, 10.0 + 10.0 * k);
  }
}

TEST(SliceClips, PartialTailDropped) {
  EXPECT_EQ(slice_clips(session_of(29), 10, 10, 20.0).size(), 2u);
}

TEST(SliceClips, EmptySession) {
  EXPECT_TRUE(slice_clips(session_of(0), 10, 10, 20.0).empty());
}

TEST(SliceClips, OverlappingStride) {
  EXPECT_EQ(slice_clips(session_of(30), 10, 5, 20.0).size(), 5u);
}

TEST(ExtractClip, DuplicateInstanceIsDataError) {
  Session s = session_of(3);
  s.objects.push_back(obj(1, 1));
  EXPECT_THROW(extract_clip(s, 0, 3, 20.0, "c"), DataError);
}

TEST(ExtractClip, EmptyWindowIsKept) {
  Session s = session_of(0);
  s.num_frames = 10;
  const auto clip = extract_clip(s, 0, 10, 20.0, "c");
  EXPECT_EQ(clip.num_frames, 10);
  EXPECT_TRUE(clip.objects.empty());
  EXPECT_EQ(clip.lanes.size(), 10u);
}

TEST(Manifest, RoundTrips) {
  std::vector<ClipRecord> records(2);
  records[0] = {"a", "t/a.csv", "l/a.json", 1280, 720, 30, 2.5, 0, 10, "turn", "train"};
  records[1] = {"b", "t/b.csv", "", 640, 480, 10, 2.5, 10, 20, "", "val"};
  std::ostringstream out;
  write_manifest(out, records);
  std::istringstream in(out.str());
  EXPECT_EQ(read_manifest(in), records);
  EXPECT_EQ(manifest_classes(records), std::vector<std::string>{"turn"});
}

TEST(ClipLoader, LoadsFromFilesAndRejectsUnknownLabel) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "sscl_test_ingest_loader";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<DetectedObject> raw;
  for (int f = 0; f < 48; ++f) raw.push_back({f, 4, 0, {100.0 + f, 50, 30, 60}, 0.8});
  {
    std::ofstream t(dir / "s.csv");
    write_track_file(t, raw);
    std::ofstream l(dir / "s.json");
    std::vector<LanePolyline> lanes = {{{{0, 700}, {600, 300}}, 0, 47}};
    write_lane_file(l, lanes);
  }
  std::vector<ClipRecord> recs(2);
  recs[0] = {"c0", "s.csv", "s.json", 1280, 720, 30, 2.5, 0, 2, "left", "train"};
  recs[1] = {"c1", "s.csv", "s.json", 1280, 720, 30, 2.5, 2, 4, "", "train"};
  {
    std::ofstream m(dir / "manifest.csv");
    write_manifest(m, recs);
  }
  const auto loaded = read_manifest_file(dir / "manifest.csv");
  ClipLoader loader({"left"}, {});
  const auto clips = loader.load_all(loaded);
  ASSERT_EQ(clips.size(), 2u);
  EXPECT_EQ(clips[0].label, 0);
  EXPECT_FALSE(clips[1].label.has_value());
  ASSERT_EQ(clips[1].objects.size(), 2u);
  // Working frame 2 is source frame 24.
  EXPECT_DOUBLE_EQ(clips[1].objects[0].bbox.x_min, 124.0);
  EXPECT_FALSE(clips[0].lanes[0].empty());

  ClipLoader strict({"right"}, {});
  EXPECT_THROW(strict.load(loaded[0]), DataError);
  fs::remove_all(dir);
}
