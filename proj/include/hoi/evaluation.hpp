#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoi/labels.hpp"

namespace hoi {

struct MatchConfig {
  double viou_threshold = 0.5;
  std::vector<int> recall_k{50, 100};
  std::vector<int> precision_n{1, 5, 10};

  void validate() const;
};

// Video id -> instances of that video.
using VideoInstances = std::map<std::string, std::vector<HoiInstance>>;

// Greedy one-to-one matching: labels must agree and both the subject and the
// object vIoU must exceed the threshold. Among qualifying unused ground truths
// the one with the largest min(subject vIoU, object vIoU) wins and is marked used.
std::optional<std::size_t> match_instance(const HoiInstance& pred,
                                          std::span<const HoiInstance> gts,
                                          std::vector<bool>& used, const MatchConfig& cfg);

// Sum of precision at each hit rank divided by num_gt. `hits` is ordered by
// descending score. Returns 0 when num_gt is 0.
double average_precision(std::span<const std::uint8_t> hits, std::size_t num_gt);

struct ClassAp {
  double ap = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
};

struct ClassMapResult {
  double mean = 0.0;
  std::map<HoiLabel, ClassAp> per_class;  // only classes with >= 1 ground truth
};

ClassMapResult class_map(const VideoInstances& preds, const VideoInstances& gts,
                         const MatchConfig& cfg);

double video_map(const VideoInstances& preds, const VideoInstances& gts,
                 const MatchConfig& cfg);

// K -> mean per-video recall of the top-K predictions.
std::map<int, double> recall_at_k(const VideoInstances& preds, const VideoInstances& gts,
                                  const MatchConfig& cfg);

struct Tag {
  HoiLabel label;
  double score = 0.0;
};

// Distinct labels of a video's instances scored by their best instance,
// ranked by score descending, ties by (predicate name, object name).
std::vector<Tag> video_tags(std::span<const HoiInstance> instances, const LabelSpace& labels);

// N -> mean per-video |top-N tags ∩ gt labels| / min(N, tags available).
std::map<int, double> tagging_precision(const std::map<std::string, std::vector<Tag>>& tags,
                                        const VideoInstances& gts, const MatchConfig& cfg);

struct Metrics {
  double class_map = 0.0;
  double video_map = 0.0;
  std::map<int, double> recall;
  std::map<int, double> precision;
  std::map<HoiLabel, ClassAp> per_class;
};

Metrics evaluate(const VideoInstances& preds, const VideoInstances& gts,
                 const LabelSpace& labels, const MatchConfig& cfg);

// Frame-level detection mAP of trajectory boxes: every trajectory frame is a
// scored box, matched per frame and category at IoU >= iou_threshold. Mean over
// categories with ground truth.
double frame_detection_map(const std::map<std::string, std::vector<Trajectory>>& predicted,
                           const std::map<std::string, std::vector<Trajectory>>& truth,
                           double iou_threshold = 0.5);

}  // namespace hoi
