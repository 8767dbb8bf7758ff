#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sscl {

inline constexpr int kNumObjectClasses = 8;

// Object classes in one-hot order.
enum class ObjectClass : int {
  kPedestrian = 0,
  kRider = 1,
  kCar = 2,
  kTruck = 3,
  kBus = 4,
  kTrain = 5,
  kMotorcycle = 6,
  kBicycle = 7,
};

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point&, const Point&) = default;
};

// Axis-aligned box, top-left corner plus extent, in pixels.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double width = 0.0;
  double height = 0.0;

  double x_max() const { return x_min + width; }
  double y_max() const { return y_min + height; }
  double center_x() const { return x_min + width / 2.0; }
  double center_y() const { return y_min + height / 2.0; }
  double area() const { return width * height; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct DetectedObject {
  int frame_index = 0;
  int instance_id = 0;
  int class_id = 0;
  BoundingBox bbox;
  double score = 1.0;

  friend bool operator==(const DetectedObject&, const DetectedObject&) =
      default;
};

// A lane line valid over an inclusive frame range.
struct LanePolyline {
  std::vector<Point> vertices;
  int first_frame = 0;
  int last_frame = 0;

  friend bool operator==(const LanePolyline&, const LanePolyline&) = default;
};

// One fixed-length window of tracked objects. Frame indices are local to the
// clip, in [0, num_frames).
struct TrackedClip {
  std::string clip_id;
  int width = 0;
  int height = 0;
  int num_frames = 0;
  std::vector<DetectedObject> objects;
  // lanes[t] is the rasterized lane point set of frame t.
  std::vector<std::vector<Point>> lanes;
  std::optional<int> label;
};

}  // namespace sscl
