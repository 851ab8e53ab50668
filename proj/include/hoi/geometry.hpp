#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace hoi {

// Axis-aligned box in pixels, top-left corner plus extent. The right edge is
// x + w and the bottom edge is y + h (half-open continuous geometry).
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  double center_x() const { return x + 0.5 * w; }
  double center_y() const { return y + 0.5 * h; }

  // Positive extent and finite coordinates.
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

// Intersection of two boxes; nullopt when they do not overlap with positive area.
std::optional<Box> intersect(const Box& a, const Box& b);

// Smallest box containing both.
Box enclose(const Box& a, const Box& b);

// Inclusive frame interval [begin, end] on the absolute video timeline.
struct Span {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin + 1; }
  bool contains(int frame) const { return frame >= begin && frame <= end; }
  bool contains(const Span& other) const {
    return other.begin >= begin && other.end <= end;
  }

  friend bool operator==(const Span&, const Span&) = default;
};

std::optional<Span> intersect(const Span& a, const Span& b);

enum class FrameSource : std::uint8_t { kDetected = 0, kFilled = 1 };

// Temporally contiguous box sequence: boxes[i] belongs to frame span.begin + i.
struct Trajectory {
  Span span;
  std::vector<Box> boxes;
  std::vector<FrameSource> sources;
  int category = 0;
  double score = 1.0;

  const Box& box_at(int frame) const { return boxes[frame - span.begin]; }
  int length() const { return span.length(); }

  // Sub-trajectory restricted to `window`, which must lie inside `span`.
  Trajectory crop(const Span& window) const;

  // Structural checks: box count equals span length, every box valid.
  bool consistent() const;
};

// Builds a trajectory whose every frame is flagged detected.
Trajectory make_trajectory(Span span, std::vector<Box> boxes, int category,
                           double score = 1.0);

double iou(const Box& a, const Box& b);

// Fraction of co-occurring frames whose box IoU exceeds `beta`. Zero when the
// spans do not intersect.
double trajectory_overlap(const Trajectory& tx, const Trajectory& ty,
                          double beta);

// Volumetric IoU: per-frame IoU summed over the temporal intersection,
// divided by the temporal-union length.
double viou(const Trajectory& tx, const Trajectory& ty);

}  // namespace hoi
