#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hoi/geometry.hpp"
#include "hoi/pairing.hpp"

namespace hoi {

// COCO 17-keypoint layout: nose, left/right eye, left/right ear, left/right
// shoulder, left/right elbow, left/right wrist, left/right hip, left/right
// knee, left/right ankle.
inline constexpr int kNumJoints = 17;

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double visibility = 0.0;
};

struct Skeleton {
  std::array<Keypoint, kNumJoints> joints{};

  // Tight box around joints with visibility >= min_visibility (all joints
  // when none qualifies). nullopt when the box has zero area.
  std::optional<Box> bounding_box(double min_visibility) const;
};

// Frame index -> skeletons detected on that frame.
using SkeletonFrames = std::map<int, std::vector<Skeleton>>;

// Skeletons attached to one human trajectory; skeletons[i] is frame span.begin + i.
struct SkeletonTrajectory {
  std::size_t host = 0;
  Span span;
  std::vector<std::optional<Skeleton>> skeletons;

  const std::optional<Skeleton>* at(int frame) const {
    return span.contains(frame) ? &skeletons[frame - span.begin] : nullptr;
  }
};

// Externally supplied CNN activation map for one frame. values is
// channel-major: values[(c * height + y) * width + x].
struct FeatureGrid {
  int frame = 0;
  int channels = 0;
  int height = 0;
  int width = 0;
  Box frame_box;  // full-frame extent in pixels
  std::vector<float> values;

  float at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

struct PooledMap {
  int channels = 0;
  int size = 0;
  std::vector<double> values;  // channel-major, size x size per channel
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  // Throws DataError on a duplicate token or a dimension mismatch.
  void add(const std::string& token, std::vector<double> vec);

  // Throws DataError naming the token when it is absent.
  const std::vector<double>& lookup(const std::string& token) const;

  bool contains(const std::string& token) const { return table_.count(token) > 0; }
  int dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  const std::map<std::string, std::vector<double>>& entries() const { return table_; }

 private:
  std::map<std::string, std::vector<double>> table_;
  int dim_ = 0;
};

struct FeatureBundle {
  std::vector<double> behavior;  // f_A, num_parts * channels
  std::vector<double> motion;    // f_M, 15
  std::vector<double> semantic;  // f_S, 2 * embedding dim
};

struct FeatureConfig {
  double part_ratio = 0.2;       // body-part box side relative to the larger host side
  double min_visibility = 0.3;   // joints below this fall back to the host box
  int roi_size = 7;              // RoI-align output resolution

  void validate() const;
};

// Per frame, each skeleton goes to the human trajectory with the largest
// positive IoU against its bounding box; a trajectory keeps only its best
// skeleton per frame. Returns one entry per human trajectory, in index order.
std::vector<SkeletonTrajectory> assign_skeletons(
    const SkeletonFrames& skeletons, const std::vector<Trajectory>& trajectories,
    int human_category, double min_visibility);

// Square part boxes centred on each joint, clipped to the frame. Invisible
// joints, and joints whose box clips away, use the (clipped) host box.
std::array<Box, kNumJoints> body_part_boxes(const Skeleton& skeleton,
                                            const Box& host, double ratio,
                                            double min_visibility,
                                            const Box& frame_box);

// Bilinear RoI-align with one sample at each output-bin centre.
PooledMap roi_pool_frame(const FeatureGrid& grid, const Box& box, int out_size);

struct ToiPooled {
  PooledMap max_map;               // element-wise max over frames
  std::vector<double> descriptor;  // per-channel spatial mean of max_map
};

ToiPooled toi_pool(std::span<const FeatureGrid> grids, std::span<const Box> boxes,
                   int out_size);

// Concatenated ToI-pooled part descriptors in joint order. `skeletons` may be
// null (no skeleton for the host), in which case every part uses the host box.
// grids[i] must be the grid of frame seg.span.begin + i.
std::vector<double> behavior_descriptor(const CandidateSegment& seg,
                                        const SkeletonTrajectory* skeletons,
                                        std::span<const FeatureGrid> grids,
                                        const FeatureConfig& cfg);

// Relative location (s_x, s_y, s_w, s_h, s_a) of object box `o` against human box `h`.
std::array<double, 5> f_loc(const Box& h, const Box& o);

// First-frame location, last-frame location and their difference.
std::vector<double> motion_feature(const CandidateSegment& seg);

std::vector<double> semantic_feature(const std::string& human_token,
                                     const std::string& object_token,
                                     const EmbeddingTable& table);

}  // namespace hoi
