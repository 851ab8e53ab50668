#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi {

// One frame-level detection. `frame` is on the absolute video timeline; the
// segment-local index of the absorption loop is never materialized.
struct Detection {
  int frame = 0;
  Box box;
  int category = 0;
  double score = 0.0;
};

struct SegmentationConfig {
  int segment_len = 10;
  int segment_stride = 5;
  double beta = 0.5;             // per-frame IoU threshold for absorption and overlap
  double merge_threshold = 0.5;  // minimum overlap ratio for cross-segment merging

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// Short-term trajectory inside one segment plus the detections it consumed.
struct Tracklet {
  Trajectory trajectory;
  std::vector<std::size_t> members;  // indices into the input detection list
  double seed_score = 0.0;
};

// Resolves a full-segment box sequence from the per-frame anchor boxes of the
// detections merged so far. `anchors[i]` belongs to frame segment.begin + i.
class BoxPropagator {
 public:
  virtual ~BoxPropagator() = default;
  virtual void propagate(std::span<const std::optional<Box>> anchors,
                         std::vector<Box>& boxes,
                         std::vector<FrameSource>& sources) const = 0;
};

// Frames with an anchor keep it; other frames copy the nearest anchored frame,
// the earlier one on ties (forward fill).
class HoldFillPropagator final : public BoxPropagator {
 public:
  void propagate(std::span<const std::optional<Box>> anchors,
                 std::vector<Box>& boxes,
                 std::vector<FrameSource>& sources) const override;
};

// One iteration of the absorption loop, recorded for inspection.
struct AbsorptionStep {
  double seed_score = 0.0;
  std::size_t remaining_before = 0;
  std::size_t remaining_after = 0;
};

std::vector<Span> split_video_segments(int num_frames,
                                       const SegmentationConfig& cfg);

// Greedy confidence-ordered absorption inside one segment. Every detection
// must have its frame inside `segment`; each one ends up in exactly one
// tracklet. Spans of the returned tracklets equal `segment` (untrimmed).
std::vector<Tracklet> build_segment_tracklets(
    std::span<const Detection> dets, const Span& segment,
    const SegmentationConfig& cfg, const BoxPropagator& propagator,
    std::vector<AbsorptionStep>* trace = nullptr);

std::vector<Tracklet> build_segment_tracklets(
    std::span<const Detection> dets, const Span& segment,
    const SegmentationConfig& cfg);

// Cuts leading and trailing filled frames.
Trajectory trim_filled(const Trajectory& t);

// Repeatedly merges the same-category pair with the highest overlap ratio at or
// above the merge threshold until no pair qualifies. Output is sorted by begin
// frame, then score descending.
std::vector<Trajectory> merge_tracklets(std::vector<Trajectory> tracklets,
                                        const SegmentationConfig& cfg);

// Full trajectory detection for one video: segment, absorb, trim, merge.
// Detections outside [0, num_frames) are ignored.
std::vector<Trajectory> detect_trajectories(std::span<const Detection> dets,
                                            int num_frames,
                                            const SegmentationConfig& cfg);

}  // namespace hoi
