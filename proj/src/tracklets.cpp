#include "hoi/tracklets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>

#include "hoi/errors.hpp"

namespace hoi {

void SegmentationConfig::validate() const {
  if (segment_len < 1) throw ValidationError("tracklets.segment_len must be >= 1");
  if (segment_stride < 1 || segment_stride > segment_len) {
    throw ValidationError(
        "tracklets.segment_stride must lie in [1, segment_len]");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw ValidationError("tracklets.beta must lie in (0, 1)");
  }
  if (!(merge_threshold > 0.0 && merge_threshold <= 1.0)) {
    throw ValidationError("tracklets.merge_threshold must lie in (0, 1]");
  }
}

void HoldFillPropagator::propagate(std::span<const std::optional<Box>> anchors,
                                   std::vector<Box>& boxes,
                                   std::vector<FrameSource>& sources) const {
  const int n = static_cast<int>(anchors.size());
  boxes.assign(n, Box{});
  sources.assign(n, FrameSource::kFilled);

  // Distance to the nearest anchor on each side; forward fill wins ties.
  std::vector<int> prev(n, -1), next(n, -1);
  for (int i = 0, last = -1; i < n; ++i) {
    if (anchors[i]) last = i;
    prev[i] = last;
  }
  for (int i = n - 1, last = -1; i >= 0; --i) {
    if (anchors[i]) last = i;
    next[i] = last;
  }
  for (int i = 0; i < n; ++i) {
    if (anchors[i]) {
      boxes[i] = *anchors[i];
      sources[i] = FrameSource::kDetected;
      continue;
    }
    int src = -1;
    if (prev[i] >= 0 && next[i] >= 0) {
      src = (i - prev[i] <= next[i] - i) ? prev[i] : next[i];
    } else {
      src = prev[i] >= 0 ? prev[i] : next[i];
    }
    if (src >= 0) boxes[i] = *anchors[src];
  }
}

std::vector<Span> split_video_segments(int num_frames,
                                       const SegmentationConfig& cfg) {
  cfg.validate();
  std::vector<Span> spans;
  if (num_frames < 1) return spans;
  if (num_frames <= cfg.segment_len) {
    spans.push_back({0, num_frames - 1});
    return spans;
  }
  int start = 0;
  for (; start + cfg.segment_len <= num_frames; start += cfg.segment_stride) {
    spans.push_back({start, start + cfg.segment_len - 1});
  }
  if (spans.back().end < num_frames - 1) {
    spans.push_back({start, num_frames - 1});
  }
  return spans;
}

std::vector<Tracklet> build_segment_tracklets(
    std::span<const Detection> dets, const Span& segment,
    const SegmentationConfig& cfg, const BoxPropagator& propagator,
    std::vector<AbsorptionStep>* trace) {
  std::vector<Tracklet> out;
  if (dets.empty()) return out;
  for (const auto& d : dets) {
    if (!segment.contains(d.frame)) {
      throw std::invalid_argument("detection frame " + std::to_string(d.frame) +
                                  " outside segment");
    }
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (dets[a].score != dets[b].score)
                       return dets[a].score > dets[b].score;
                     return dets[a].frame < dets[b].frame;
                   });

  std::vector<bool> untracked(dets.size(), true);
  std::size_t remaining = dets.size();
  std::size_t cursor = 0;
  const int len = segment.length();

  while (remaining > 0) {
    while (!untracked[order[cursor]]) ++cursor;
    const std::size_t seed = order[cursor];
    const Detection& seed_det = dets[seed];
    const std::size_t before = remaining;

    Tracklet tracklet;
    tracklet.seed_score = seed_det.score;
    tracklet.members.push_back(seed);
    untracked[seed] = false;
    --remaining;

    std::vector<std::optional<Box>> anchors(len);
    std::vector<double> anchor_score(len, -1.0);
    anchors[seed_det.frame - segment.begin] = seed_det.box;
    anchor_score[seed_det.frame - segment.begin] = seed_det.score;

    Trajectory& traj = tracklet.trajectory;
    traj.span = segment;
    traj.category = seed_det.category;
    traj.score = seed_det.score;

    // Absorb until a sweep over the untracked set adds nothing; every new
    // anchor can extend the propagated boxes reachable by the next sweep.
    bool grew = true;
    while (grew) {
      propagator.propagate(anchors, traj.boxes, traj.sources);
      grew = false;
      for (std::size_t k = cursor; k < order.size(); ++k) {
        const std::size_t idx = order[k];
        if (!untracked[idx]) continue;
        const Detection& d = dets[idx];
        if (d.category != seed_det.category) continue;
        const int local = d.frame - segment.begin;
        if (iou(traj.boxes[local], d.box) <= cfg.beta) continue;
        untracked[idx] = false;
        --remaining;
        tracklet.members.push_back(idx);
        traj.score = std::max(traj.score, d.score);
        if (d.score > anchor_score[local]) {
          anchors[local] = d.box;
          anchor_score[local] = d.score;
        }
        grew = true;
      }
    }

    if (trace) trace->push_back({seed_det.score, before, remaining});
    out.push_back(std::move(tracklet));
  }
  return out;
}

std::vector<Tracklet> build_segment_tracklets(std::span<const Detection> dets,
                                              const Span& segment,
                                              const SegmentationConfig& cfg) {
  static const HoldFillPropagator hold_fill;
  return build_segment_tracklets(dets, segment, cfg, hold_fill);
}

Trajectory trim_filled(const Trajectory& t) {
  if (t.sources.empty()) return t;
  const auto detected = [](FrameSource s) { return s == FrameSource::kDetected; };
  const auto first = std::find_if(t.sources.begin(), t.sources.end(), detected);
  if (first == t.sources.end()) return t;
  const auto last = std::find_if(t.sources.rbegin(), t.sources.rend(), detected);
  const int begin = t.span.begin + static_cast<int>(first - t.sources.begin());
  const int end = t.span.end - static_cast<int>(last - t.sources.rbegin());
  return t.crop({begin, end});
}

namespace {

bool box_less(const Box& a, const Box& b) {
  return std::tie(a.x, a.y, a.w, a.h) < std::tie(b.x, b.y, b.w, b.h);
}

// Total order used to make merging independent of input order.
bool canonical_less(const Trajectory& a, const Trajectory& b) {
  if (a.category != b.category) return a.category < b.category;
  if (a.span.begin != b.span.begin) return a.span.begin < b.span.begin;
  if (a.span.end != b.span.end) return a.span.end < b.span.end;
  if (a.score != b.score) return a.score > b.score;
  return std::lexicographical_compare(a.boxes.begin(), a.boxes.end(),
                                      b.boxes.begin(), b.boxes.end(), box_less);
}

Trajectory combine(const Trajectory& a, const Trajectory& b) {
  Trajectory out;
  out.category = a.category;
  out.score = std::max(a.score, b.score);
  out.span = {std::min(a.span.begin, b.span.begin),
              std::max(a.span.end, b.span.end)};
  const Trajectory& preferred = b.score > a.score ? b : a;
  const Trajectory& other = b.score > a.score ? a : b;
  const int n = out.span.length();
  out.boxes.resize(n);
  out.sources.assign(n, FrameSource::kDetected);
  for (int i = 0; i < n; ++i) {
    const int f = out.span.begin + i;
    const Trajectory& src = preferred.span.contains(f) ? preferred : other;
    out.boxes[i] = src.box_at(f);
    if (!src.sources.empty()) out.sources[i] = src.sources[f - src.span.begin];
  }
  return out;
}

struct MergeCandidate {
  double overlap;
  std::size_t a;
  std::size_t b;
};

// Max-heap order: highest overlap first, then lowest ids.
struct CandidateOrder {
  bool operator()(const MergeCandidate& x, const MergeCandidate& y) const {
    if (x.overlap != y.overlap) return x.overlap < y.overlap;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
  }
};

}  // namespace

std::vector<Trajectory> merge_tracklets(std::vector<Trajectory> tracklets,
                                        const SegmentationConfig& cfg) {
  cfg.validate();
  std::sort(tracklets.begin(), tracklets.end(), canonical_less);

  std::vector<Trajectory> nodes = std::move(tracklets);
  std::vector<bool> alive(nodes.size(), true);
  std::priority_queue<MergeCandidate, std::vector<MergeCandidate>,
                      CandidateOrder>
      heap;

  const auto consider = [&](std::size_t i, std::size_t j) {
    const Trajectory& x = nodes[i];
    const Trajectory& y = nodes[j];
    if (x.category != y.category) return;
    if (!intersect(x.span, y.span)) return;
    const double theta = trajectory_overlap(x, y, cfg.beta);
    if (theta >= cfg.merge_threshold) {
      heap.push({theta, std::min(i, j), std::max(i, j)});
    }
  };

  // Nodes are sorted by (category, begin), so the inner scan stops at the
  // first node that starts after node i ends or changes category.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (nodes[j].category != nodes[i].category ||
          nodes[j].span.begin > nodes[i].span.end) {
        break;
      }
      consider(i, j);
    }
  }

  while (!heap.empty()) {
    const MergeCandidate top = heap.top();
    heap.pop();
    if (!alive[top.a] || !alive[top.b]) continue;
    alive[top.a] = false;
    alive[top.b] = false;
    nodes.push_back(combine(nodes[top.a], nodes[top.b]));
    alive.push_back(true);
    const std::size_t merged = nodes.size() - 1;
    for (std::size_t k = 0; k < merged; ++k) {
      if (alive[k]) consider(k, merged);
    }
  }

  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (alive[i]) out.push_back(std::move(nodes[i]));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Trajectory& a, const Trajectory& b) {
                     if (a.span.begin != b.span.begin)
                       return a.span.begin < b.span.begin;
                     if (a.score != b.score) return a.score > b.score;
                     return canonical_less(a, b);
                   });
  return out;
}

std::vector<Trajectory> detect_trajectories(std::span<const Detection> dets,
                                            int num_frames,
                                            const SegmentationConfig& cfg) {
  cfg.validate();
  std::vector<Detection> sorted;
  sorted.reserve(dets.size());
  for (const auto& d : dets) {
    if (d.frame >= 0 && d.frame < num_frames) sorted.push_back(d);
  }
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Detection& a, const Detection& b) {
                     return a.frame < b.frame;
                   });

  std::vector<Trajectory> short_term;
  for (const Span& seg : split_video_segments(num_frames, cfg)) {
    const auto lo = std::lower_bound(
        sorted.begin(), sorted.end(), seg.begin,
        [](const Detection& d, int f) { return d.frame < f; });
    const auto hi = std::upper_bound(
        lo, sorted.end(), seg.end,
        [](int f, const Detection& d) { return f < d.frame; });
    const std::span<const Detection> window(
        sorted.data() + (lo - sorted.begin()), static_cast<std::size_t>(hi - lo));
    for (auto& t : build_segment_tracklets(window, seg, cfg)) {
      short_term.push_back(trim_filled(t.trajectory));
    }
  }
  return merge_tracklets(std::move(short_term), cfg);
}

}  // namespace hoi
