#include "sscl/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sscl/error.hpp"
#include "sscl/text.hpp"

namespace sscl {

namespace {

// Clamps [lo, lo + extent) into [0, limit]. Leaves in-bounds boxes untouched
// so that written coordinates round-trip exactly.
bool clamp_extent(double& lo, double& extent, double limit) {
  double hi = lo + extent;
  if (lo >= 0.0 && hi <= limit) return extent > 0.0;
  double new_lo = std::clamp(lo, 0.0, limit);
  double new_hi = std::clamp(hi, 0.0, limit);
  lo = new_lo;
  extent = new_hi - new_lo;
  return extent > 0.0;
}

bool is_header(std::string_view line) {
  auto fields = text::split(line, ',');
  return !fields.empty() && !text::parse_number<double>(fields[0]);
}

}  // namespace

bool clamp_box(BoundingBox& box, int width, int height) {
  return clamp_extent(box.x_min, box.width, width) &&
         clamp_extent(box.y_min, box.height, height);
}

std::vector<DetectedObject> parse_track_file(std::istream& in,
                                             const TrackParseOptions& options) {
  std::vector<DetectedObject> objects;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::trim(line);
    if (view.empty()) continue;
    if (line_no == 1 && is_header(view)) continue;

    auto fields = text::split(view, ',');
    if (fields.size() != 8) {
      throw ParseError(line_no, "expected 8 fields, got " +
                                    std::to_string(fields.size()));
    }
    auto frame = text::parse_number<int>(fields[0]);
    auto id = text::parse_number<int>(fields[1]);
    auto x = text::parse_number<double>(fields[2]);
    auto y = text::parse_number<double>(fields[3]);
    auto w = text::parse_number<double>(fields[4]);
    auto h = text::parse_number<double>(fields[5]);
    auto cls = text::parse_number<int>(fields[6]);
    auto score = text::parse_number<double>(fields[7]);
    if (!frame || !id || !x || !y || !w || !h || !cls || !score) {
      throw ParseError(line_no, "malformed field");
    }
    if (*frame < 0) throw RecordError(line_no, "negative frame index");
    if (!(*w > 0.0) || !(*h > 0.0)) {
      throw RecordError(line_no, "box width and height must be positive");
    }
    if (*cls < 0 || *cls >= kNumObjectClasses) {
      throw RecordError(line_no, "class id out of range: " + std::to_string(*cls));
    }
    if (*score < options.min_score) continue;

    DetectedObject obj;
    obj.frame_index = *frame;
    obj.instance_id = *id;
    obj.class_id = *cls;
    obj.bbox = {*x, *y, *w, *h};
    obj.score = *score;
    if (!clamp_box(obj.bbox, options.width, options.height)) continue;
    objects.push_back(obj);
  }
  return objects;
}

void write_track_file(std::ostream& out, std::span<const DetectedObject> objects,
                      bool header) {
  if (header) out << "frame,id,x,y,w,h,class,score\n";
  for (const auto& o : objects) {
    out << o.frame_index << ',' << o.instance_id << ','
        << text::format_double(o.bbox.x_min) << ','
        << text::format_double(o.bbox.y_min) << ','
        << text::format_double(o.bbox.width) << ','
        << text::format_double(o.bbox.height) << ',' << o.class_id << ','
        << text::format_double(o.score) << '\n';
  }
}

int downsample_stride(double fps_in, double fps_out) {
  if (!(fps_in > 0.0) || !(fps_out > 0.0)) {
    throw ArgumentError("frame rates must be positive");
  }
  if (fps_out > fps_in) {
    throw ArgumentError("fps_out must not exceed fps_in");
  }
  int stride = static_cast<int>(std::lround(fps_in / fps_out));
  return std::max(stride, 1);
}

std::vector<DetectedObject> downsample_tracks(
    std::span<const DetectedObject> objects, double fps_in, double fps_out) {
  const int stride = downsample_stride(fps_in, fps_out);
  std::vector<DetectedObject> kept;
  for (const auto& o : objects) {
    if (o.frame_index % stride != 0) continue;
    DetectedObject copy = o;
    copy.frame_index = o.frame_index / stride;
    kept.push_back(copy);
  }
  return kept;
}

std::vector<LanePolyline> downsample_lanes(std::span<const LanePolyline> lanes,
                                           double fps_in, double fps_out) {
  const int stride = downsample_stride(fps_in, fps_out);
  std::vector<LanePolyline> kept;
  for (const auto& lane : lanes) {
    int first = (lane.first_frame + stride - 1) / stride;
    int last = lane.last_frame / stride;
    if (first > last) continue;
    LanePolyline copy = lane;
    copy.first_frame = first;
    copy.last_frame = last;
    kept.push_back(std::move(copy));
  }
  return kept;
}

std::vector<LanePolyline> parse_lane_file(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("lane file: ") + e.what());
  }
  if (!doc.is_array()) throw DataError("lane file: expected a JSON array");

  std::vector<LanePolyline> lanes;
  for (std::size_t k = 0; k < doc.size(); ++k) {
    const auto& entry = doc[k];
    const std::string where = "lane file entry " + std::to_string(k);
    try {
      LanePolyline lane;
      const auto& frames = entry.at("frames");
      if (!frames.is_array() || frames.size() != 2) {
        throw DataError(where + ": frames must be [first, last]");
      }
      lane.first_frame = frames[0].get<int>();
      lane.last_frame = frames[1].get<int>();
      if (lane.first_frame < 0 || lane.last_frame < lane.first_frame) {
        throw DataError(where + ": invalid frame range");
      }
      for (const auto& p : entry.at("points")) {
        if (!p.is_array() || p.size() != 2) {
          throw DataError(where + ": points must be [x, y] pairs");
        }
        lane.vertices.push_back({p[0].get<double>(), p[1].get<double>()});
      }
      if (lane.vertices.size() < 2) {
        throw DataError(where + ": a polyline needs at least 2 vertices");
      }
      lanes.push_back(std::move(lane));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return lanes;
}

void write_lane_file(std::ostream& out, std::span<const LanePolyline> lanes) {
  // Hand-written so coordinates keep their shortest round-trip form.
  out << "[\n";
  for (std::size_t k = 0; k < lanes.size(); ++k) {
    const auto& lane = lanes[k];
    out << "  {\"frames\": [" << lane.first_frame << ", " << lane.last_frame
        << "], \"points\": [";
    for (std::size_t i = 0; i < lane.vertices.size(); ++i) {
      if (i) out << ", ";
      out << '[' << text::format_double(lane.vertices[i].x) << ", "
          << text::format_double(lane.vertices[i].y) << ']';
    }
    out << "]}" << (k + 1 < lanes.size() ? ",\n" : "\n");
  }
  out << "]\n";
}

std::vector<std::vector<Point>> rasterize_lanes(
    std::span<const LanePolyline> lanes, int num_frames, double step) {
  if (!(step > 0.0)) throw ArgumentError("lane raster step must be positive");
  std::vector<std::vector<Point>> frames(std::max(num_frames, 0));
  for (const auto& lane : lanes) {
    int first = std::max(lane.first_frame, 0);
    int last = std::min(lane.last_frame, num_frames - 1);
    if (first > last) continue;

    std::vector<Point> samples;
    for (std::size_t s = 0; s + 1 < lane.vertices.size(); ++s) {
      const Point a = lane.vertices[s];
      const Point b = lane.vertices[s + 1];
      const double length = std::hypot(b.x - a.x, b.y - a.y);
      const int intervals = std::max(1, static_cast<int>(std::ceil(length / step)));
      for (int i = 0; i <= intervals; ++i) {
        const double t = static_cast<double>(i) / intervals;
        samples.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
      }
    }
    for (int f = first; f <= last; ++f) {
      frames[f].insert(frames[f].end(), samples.begin(), samples.end());
    }
  }
  for (auto& points : frames) {
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
  }
  return frames;
}

int session_length(std::span<const DetectedObject> objects,
                   std::span<const LanePolyline> lanes) {
  int length = 0;
  for (const auto& o : objects) length = std::max(length, o.frame_index + 1);
  for (const auto& l : lanes) length = std::max(length, l.last_frame + 1);
  return length;
}

TrackedClip extract_clip(const Session& session, int begin, int length,
                         double lane_step, std::string clip_id) {
  if (length < 1) throw ArgumentError("clip length must be at least 1");
  if (begin < 0) throw ArgumentError("clip start must be non-negative");

  TrackedClip clip;
  clip.clip_id = std::move(clip_id);
  clip.width = session.width;
  clip.height = session.height;
  clip.num_frames = length;

  std::set<std::pair<int, int>> seen;
  for (const auto& o : session.objects) {
    if (o.frame_index < begin || o.frame_index >= begin + length) continue;
    DetectedObject local = o;
    local.frame_index -= begin;
    if (!seen.emplace(local.frame_index, local.instance_id).second) {
      throw DataError("clip " + clip.clip_id + ": instance " +
                      std::to_string(o.instance_id) +
                      " appears twice in frame " +
                      std::to_string(o.frame_index));
    }
    clip.objects.push_back(local);
  }

  std::vector<LanePolyline> local_lanes;
  for (const auto& lane : session.lanes) {
    LanePolyline l = lane;
    l.first_frame -= begin;
    l.last_frame -= begin;
    local_lanes.push_back(std::move(l));
  }
  clip.lanes = rasterize_lanes(local_lanes, length, lane_step);
  return clip;
}

std::vector<TrackedClip> slice_clips(const Session& session, int clip_length,
                                     int stride, double lane_step) {
  if (clip_length < 1) throw ArgumentError("clip length must be at least 1");
  if (stride < 1) throw ArgumentError("clip stride must be at least 1");
  std::vector<TrackedClip> clips;
  for (int k = 0; k * stride + clip_length <= session.num_frames; ++k) {
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "_%04d", k);
    clips.push_back(extract_clip(session, k * stride, clip_length, lane_step,
                                 session.session_id + suffix));
  }
  return clips;
}

namespace {

constexpr const char* kManifestHeader =
    "clip_id,track_file,lane_file,width,height,fps_in,fps_out,frame_begin,"
    "frame_end,label,split";

}  // namespace

std::vector<ClipRecord> read_manifest(std::istream& in) {
  std::vector<ClipRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::trim(line);
    if (view.empty()) continue;
    if (line_no == 1 && view.starts_with("clip_id")) continue;
    auto f = text::split(view, ',');
    if (f.size() != 11) {
      throw ParseError(line_no, "manifest: expected 11 fields, got " +
                                    std::to_string(f.size()));
    }
    ClipRecord r;
    r.clip_id = f[0];
    r.track_file = f[1];
    r.lane_file = f[2];
    auto width = text::parse_number<int>(f[3]);
    auto height = text::parse_number<int>(f[4]);
    auto fps_in = text::parse_number<double>(f[5]);
    auto fps_out = text::parse_number<double>(f[6]);
    auto begin = text::parse_number<int>(f[7]);
    auto end = text::parse_number<int>(f[8]);
    if (!width || !height || !fps_in || !fps_out || !begin || !end) {
      throw ParseError(line_no, "manifest: malformed numeric field");
    }
    if (r.clip_id.empty()) throw RecordError(line_no, "manifest: empty clip_id");
    if (*width <= 0 || *height <= 0) {
      throw RecordError(line_no, "manifest: frame size must be positive");
    }
    if (*begin < 0 || *end <= *begin) {
      throw RecordError(line_no, "manifest: invalid frame range");
    }
    r.width = *width;
    r.height = *height;
    r.fps_in = *fps_in;
    r.fps_out = *fps_out;
    r.frame_begin = *begin;
    r.frame_end = *end;
    r.label = f[9];
    r.split = f[10];
    if (r.split != "train" && r.split != "val") {
      throw RecordError(line_no, "manifest: split must be train or val");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_manifest(std::ostream& out, std::span<const ClipRecord> records) {
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    out << r.clip_id << ',' << r.track_file << ',' << r.lane_file << ','
        << r.width << ',' << r.height << ',' << text::format_double(r.fps_in)
        << ',' << text::format_double(r.fps_out) << ',' << r.frame_begin << ','
        << r.frame_end << ',' << r.label << ',' << r.split << '\n';
  }
}

std::vector<ClipRecord> read_manifest_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  auto records = read_manifest(in);
  const auto base = path.parent_path();
  for (auto& r : records) {
    if (!r.track_file.empty() && std::filesystem::path(r.track_file).is_relative()) {
      r.track_file = (base / r.track_file).string();
    }
    if (!r.lane_file.empty() && std::filesystem::path(r.lane_file).is_relative()) {
      r.lane_file = (base / r.lane_file).string();
    }
  }
  return records;
}

std::vector<std::string> manifest_classes(std::span<const ClipRecord> records) {
  std::set<std::string> labels;
  for (const auto& r : records) {
    if (!r.label.empty()) labels.insert(r.label);
  }
  return {labels.begin(), labels.end()};
}

ClipLoader::ClipLoader(std::vector<std::string> class_names,
                       ClipLoadOptions options)
    : class_names_(std::move(class_names)), options_(options) {}

const Session& ClipLoader::session_for(const ClipRecord& r) {
  std::ostringstream key;
  key << r.track_file << '|' << r.lane_file << '|' << r.width << 'x' << r.height
      << '|' << r.fps_in << '|' << r.fps_out;
  auto it = sessions_.find(key.str());
  if (it != sessions_.end()) return it->second;

  Session s;
  s.session_id = r.track_file;
  s.width = r.width;
  s.height = r.height;
  std::ifstream tracks(r.track_file);
  if (!tracks) throw DataError("cannot open track file " + r.track_file);
  try {
    s.objects = downsample_tracks(
        parse_track_file(tracks, {r.width, r.height, options_.min_score}),
        r.fps_in, r.fps_out);
  } catch (const ParseError& e) {
    throw DataError(r.track_file + ": " + e.what());
  }
  if (!r.lane_file.empty()) {
    std::ifstream lanes(r.lane_file);
    if (!lanes) throw DataError("cannot open lane file " + r.lane_file);
    s.lanes = downsample_lanes(parse_lane_file(lanes), r.fps_in, r.fps_out);
  }
  s.num_frames = session_length(s.objects, s.lanes);
  return sessions_.emplace(key.str(), std::move(s)).first->second;
}

TrackedClip ClipLoader::load(const ClipRecord& record) {
  const Session& session = session_for(record);
  TrackedClip clip =
      extract_clip(session, record.frame_begin,
                   record.frame_end - record.frame_begin, options_.lane_step,
                   record.clip_id);
  if (!record.label.empty()) {
    auto it = std::find(class_names_.begin(), class_names_.end(), record.label);
    if (it == class_names_.end()) {
      throw DataError("clip " + record.clip_id + ": unknown label '" +
                      record.label + "'");
    }
    clip.label = static_cast<int>(it - class_names_.begin());
  }
  return clip;
}

std::vector<TrackedClip> ClipLoader::load_all(std::span<const ClipRecord> records) {
  std::vector<TrackedClip> clips;
  clips.reserve(records.size());
  for (const auto& r : records) clips.push_back(load(r));
  return clips;
}

}  // namespace sscl
