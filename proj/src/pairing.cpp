#include "hoi/pairing.hpp"

#include <algorithm>

#include "hoi/errors.hpp"

namespace hoi {

std::vector<CandidatePair> co_occurrent_pairs(
    const std::vector<Trajectory>& trajectories, int human_category) {
  std::vector<CandidatePair> pairs;
  for (std::size_t h = 0; h < trajectories.size(); ++h) {
    if (trajectories[h].category != human_category) continue;
    for (std::size_t o = 0; o < trajectories.size(); ++o) {
      if (o == h) continue;
      if (const auto common = intersect(trajectories[h].span, trajectories[o].span)) {
        pairs.push_back({h, o, *common});
      }
    }
  }
  return pairs;
}

std::vector<CandidateSegment> split_candidate_segments(
    const CandidatePair& pair, std::size_t pair_index,
    const std::vector<Trajectory>& trajectories, int window_len) {
  if (window_len < 2) throw ValidationError("pairing.segment_len must be >= 2");
  std::vector<CandidateSegment> segments;
  const Trajectory& human = trajectories[pair.human];
  const Trajectory& object = trajectories[pair.object];
  for (int begin = pair.span.begin; begin <= pair.span.end; begin += window_len) {
    const int end = std::min(begin + window_len - 1, pair.span.end);
    if (end - begin + 1 < 2) break;
    CandidateSegment seg;
    seg.pair = pair_index;
    seg.span = {begin, end};
    seg.human_boxes.reserve(seg.span.length());
    seg.object_boxes.reserve(seg.span.length());
    for (int f = begin; f <= end; ++f) {
      seg.human_boxes.push_back(human.box_at(f));
      seg.object_boxes.push_back(object.box_at(f));
    }
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace hoi
