#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sscl/types.hpp"

namespace sscl {

struct TrackParseOptions {
  int width = 1280;
  int height = 720;
  // Detections scoring below this are dropped.
  double min_score = 0.5;
};

// Clamps a box into [0, width] x [0, height]. In-bounds boxes are left
// untouched. Returns false when nothing of the box remains.
bool clamp_box(BoundingBox& box, int width, int height);

// Parses MOT-style CSV lines `frame,id,x,y,w,h,class,score`. A header line is
// optional. Boxes are clamped to the frame; boxes entirely outside the frame
// are dropped. Throws ParseError on malformed lines and RecordError on
// non-positive extents or class ids outside [0, 8).
std::vector<DetectedObject> parse_track_file(std::istream& in,
                                             const TrackParseOptions& options);

// Writes objects in the format read by parse_track_file. Numbers are written
// in shortest round-trip form so parsing the output reproduces the input.
void write_track_file(std::ostream& out, std::span<const DetectedObject> objects,
                      bool header = true);

// Integer frame stride between the two rates. Throws ArgumentError when
// fps_out > fps_in or either rate is not positive.
int downsample_stride(double fps_in, double fps_out);

// Keeps frames whose index is a multiple of the stride and renumbers them
// consecutively.
std::vector<DetectedObject> downsample_tracks(
    std::span<const DetectedObject> objects, double fps_in, double fps_out);

// Maps lane frame ranges onto the downsampled frame grid. Polylines covering
// no surviving frame are dropped.
std::vector<LanePolyline> downsample_lanes(std::span<const LanePolyline> lanes,
                                           double fps_in, double fps_out);

// Lane file: JSON array of {"frames": [first, last], "points": [[x, y], ...]}.
// Frame ranges are inclusive.
std::vector<LanePolyline> parse_lane_file(std::istream& in);
void write_lane_file(std::ostream& out, std::span<const LanePolyline> lanes);

// Samples every polyline segment at arc-length spacing no larger than `step`
// and collects the points active on each of the frames [0, num_frames).
// Points are deduplicated and sorted within a frame.
std::vector<std::vector<Point>> rasterize_lanes(
    std::span<const LanePolyline> lanes, int num_frames, double step);

// A tracking session on the working frame grid.
struct Session {
  std::string session_id;
  int width = 0;
  int height = 0;
  int num_frames = 0;
  std::vector<DetectedObject> objects;
  std::vector<LanePolyline> lanes;
};

// Frame count implied by the objects and lanes (max frame index + 1).
int session_length(std::span<const DetectedObject> objects,
                   std::span<const LanePolyline> lanes);

// Cuts frames [begin, begin + length) out of a session as a clip with local
// frame numbering. Throws DataError on duplicate (frame, instance) pairs.
TrackedClip extract_clip(const Session& session, int begin, int length,
                         double lane_step, std::string clip_id);

// Clip k covers frames [k * stride, k * stride + clip_length); a trailing
// partial window is discarded.
std::vector<TrackedClip> slice_clips(const Session& session, int clip_length,
                                     int stride, double lane_step);

// One line of a clip manifest.
struct ClipRecord {
  std::string clip_id;
  std::string track_file;
  std::string lane_file;  // may be empty
  int width = 0;
  int height = 0;
  double fps_in = 30.0;
  double fps_out = 2.5;
  // Working-frame range [frame_begin, frame_end).
  int frame_begin = 0;
  int frame_end = 0;
  std::string label;  // empty for unlabeled clips
  std::string split = "train";

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

std::vector<ClipRecord> read_manifest(std::istream& in);
void write_manifest(std::ostream& out, std::span<const ClipRecord> records);

// Reads a manifest file and resolves relative track/lane paths against the
// manifest's directory.
std::vector<ClipRecord> read_manifest_file(const std::filesystem::path& path);

// Sorted unique non-empty labels of a manifest.
std::vector<std::string> manifest_classes(std::span<const ClipRecord> records);

struct ClipLoadOptions {
  double min_score = 0.5;
  double lane_step = 20.0;
};

// Loads clips from manifest records, parsing each session file once.
class ClipLoader {
 public:
  ClipLoader(std::vector<std::string> class_names, ClipLoadOptions options);

  // Label strings not in the class list throw DataError.
  TrackedClip load(const ClipRecord& record);
  std::vector<TrackedClip> load_all(std::span<const ClipRecord> records);

 private:
  const Session& session_for(const ClipRecord& record);

  std::vector<std::string> class_names_;
  ClipLoadOptions options_;
  std::map<std::string, Session> sessions_;
};

}  // namespace sscl
