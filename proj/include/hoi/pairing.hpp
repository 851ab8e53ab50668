#pragma once

#include <cstddef>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi {

// Human/object trajectory pair over their co-occurrent frames. `human` and
// `object` index the trajectory list the pair was built from.
struct CandidatePair {
  std::size_t human = 0;
  std::size_t object = 0;
  Span span;
};

// Fixed-duration aligned window of a candidate pair.
struct CandidateSegment {
  std::size_t pair = 0;  // index into the pair list
  Span span;
  std::vector<Box> human_boxes;
  std::vector<Box> object_boxes;
};

// Every (human, other) combination with a non-empty span intersection, in
// (human index, object index) order. Human-human pairs appear in both
// directions.
std::vector<CandidatePair> co_occurrent_pairs(
    const std::vector<Trajectory>& trajectories, int human_category);

// Consecutive non-overlapping windows of `window_len` frames over the pair
// span. A remainder of >= 2 frames becomes a shorter final window, a
// remainder of 1 frame is dropped.
std::vector<CandidateSegment> split_candidate_segments(
    const CandidatePair& pair, std::size_t pair_index,
    const std::vector<Trajectory>& trajectories, int window_len);

}  // namespace hoi
