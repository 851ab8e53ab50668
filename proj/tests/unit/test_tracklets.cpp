#include <algorithm>
#include <random>

#include "doctest.h"
#include "hoi/tracklets.hpp"

using namespace hoi;

TEST_CASE("video segments overlap by the stride and cover every frame") {
  SegmentationConfig cfg;  // 10 / 5
  const auto s30 = split_video_segments(30, cfg);
  REQUIRE(s30.size() == 5);
  for (std::size_t i = 0; i < s30.size(); ++i) {
    CHECK(s30[i].begin == 5 * static_cast<int>(i));
    CHECK(s30[i].length() == 10);
  }
  CHECK(split_video_segments(10, cfg) == std::vector<Span>{{0, 9}});
  CHECK(split_video_segments(3, cfg) == std::vector<Span>{{0, 2}});

  for (int n = 1; n < 60; ++n) {
    const auto spans = split_video_segments(n, cfg);
    std::vector<int> cover(n, 0);
    for (const auto& s : spans) {
      CHECK(s.end < n);
      for (int f = s.begin; f <= s.end; ++f) ++cover[f];
    }
    CHECK(std::all_of(cover.begin(), cover.end(), [](int c) { return c >= 1; }));
  }
}

TEST_CASE("segmentation config validation") {
  SegmentationConfig cfg;
  cfg.segment_stride = 11;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.beta = 1.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("single detection is held over the whole segment") {
  const std::vector<Detection> dets{{3, {10, 10, 5, 5}, 2, 0.9}};
  const auto t = build_segment_tracklets(dets, {0, 9}, {});
  REQUIRE(t.size() == 1);
  const auto& traj = t[0].trajectory;
  CHECK(traj.span == Span{0, 9});
  for (int f = 0; f <= 9; ++f) {
    CHECK(traj.box_at(f) == Box{10, 10, 5, 5});
    CHECK(traj.sources[f] == (f == 3 ? FrameSource::kDetected : FrameSource::kFilled));
  }
  CHECK(traj.score == 0.9);
  const auto trimmed = trim_filled(traj);
  CHECK(trimmed.span == Span{3, 3});
}

TEST_CASE("same-frame disjoint detections seed separate tracklets") {
  const std::vector<Detection> dets{{0, {0, 0, 10, 10}, 1, 0.8}, {0, {50, 50, 10, 10}, 1, 0.7}};
  const auto t = build_segment_tracklets(dets, {0, 9}, {});
  CHECK(t.size() == 2);
}

TEST_CASE("a chain of overlapping detections is absorbed by its seed") {
  std::vector<Detection> dets;
  for (int f = 0; f < 10; ++f) dets.push_back({f, {2.0 * f, 0, 10, 10}, 1, 0.5 + 0.01 * f});
  const auto t = build_segment_tracklets(dets, {0, 9}, {});
  REQUIRE(t.size() == 1);
  CHECK(t[0].members.size() == 10);
  for (int f = 0; f < 10; ++f) {
    CHECK(t[0].trajectory.box_at(f) == dets[f].box);
    CHECK(t[0].trajectory.sources[f] == FrameSource::kDetected);
  }
  CHECK(t[0].trajectory.score == doctest::Approx(0.59));
}

TEST_CASE("absorption conserves detections and seeds in confidence order") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> frame(0, 9), cat(0, 2), count(0, 40);
  std::uniform_real_distribution<double> pos(0, 80), size(5, 30), score(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Detection> dets(count(rng));
    for (auto& d : dets) d = {frame(rng), {pos(rng), pos(rng), size(rng), size(rng)}, cat(rng), score(rng)};
    std::vector<AbsorptionStep> trace;
    const auto t = build_segment_tracklets(dets, {0, 9}, {}, HoldFillPropagator{}, &trace);
    std::vector<int> seen(dets.size(), 0);
    for (const auto& tr : t) {
      for (auto m : tr.members) ++seen[m];
      for (auto m : tr.members) CHECK(dets[m].category == tr.trajectory.category);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    REQUIRE(trace.size() == t.size());
    for (std::size_t k = 0; k < trace.size(); ++k) {
      CHECK(trace[k].remaining_after < trace[k].remaining_before);
      if (k + 1 < trace.size()) {
        CHECK(trace[k].seed_score >= trace[k + 1].seed_score);
        CHECK(trace[k].remaining_after == trace[k + 1].remaining_before);
      }
    }
    if (!trace.empty()) CHECK(trace.back().remaining_after == 0);
  }
}

TEST_CASE("merging joins same-category tracklets that agree on their overlap") {
  const Box b{0, 0, 10, 10};
  auto a = make_trajectory({0, 9}, std::vector<Box>(10, b), 1, 0.9);
  auto c = make_trajectory({5, 14}, std::vector<Box>(10, b), 1, 0.8);
  auto merged = merge_tracklets({a, c}, {});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].span == Span{0, 14});
  CHECK(merged[0].score == 0.9);

  c.category = 2;
  CHECK(merge_tracklets({a, c}, {}).size() == 2);

  auto late = make_trajectory({20, 29}, std::vector<Box>(10, b), 1, 0.8);
  CHECK(merge_tracklets({a, late}, {}).size() == 2);
}

TEST_CASE("merged frames take the box of the higher-scored constituent") {
  auto a = make_trajectory({0, 9}, std::vector<Box>(10, {0, 0, 10, 10}), 1, 0.6);
  auto c = make_trajectory({5, 14}, std::vector<Box>(10, {1, 0, 10, 10}), 1, 0.9);
  const auto merged = merge_tracklets({a, c}, {});
  REQUIRE(merged.size() == 1);
  CHECK(merged[0].box_at(2).x == 0.0);
  CHECK(merged[0].box_at(7).x == 1.0);
  CHECK(merged[0].box_at(12).x == 1.0);
}

TEST_CASE("merge output is independent of input order") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> begin(0, 30), cat(0, 1);
  std::uniform_real_distribution<double> pos(0, 4), score(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Trajectory> ts;
    for (int i = 0; i < 6; ++i) {
      const int b0 = begin(rng);
      ts.push_back(make_trajectory({b0, b0 + 9}, std::vector<Box>(10, {pos(rng), 0, 10, 10}), cat(rng),
                                   score(rng)));
    }
    auto shuffled = ts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto m1 = merge_tracklets(ts, {});
    const auto m2 = merge_tracklets(shuffled, {});
    REQUIRE(m1.size() == m2.size());
    for (std::size_t i = 0; i < m1.size(); ++i) {
      CHECK(m1[i].span == m2[i].span);
      CHECK(m1[i].boxes == m2[i].boxes);
      CHECK(m1[i].category == m2[i].category);
    }
  }
}

TEST_CASE("trajectory detection over a whole video") {
  CHECK(detect_trajectories({}, 30, {}).empty());

  std::vector<Detection> dets;
  for (int f = 0; f < 30; ++f) {
    dets.push_back({f, {10.0 + f, 20, 30, 30}, 0, 0.9});
    dets.push_back({f, {200.0, 100.0 + f, 20, 20}, 1, 0.8});
  }
  const auto one = detect_trajectories(std::span(dets).first(0), 30, {});
  CHECK(one.empty());

  std::vector<Detection> single;
  for (const auto& d : dets)
    if (d.category == 0) single.push_back(d);
  const auto t1 = detect_trajectories(single, 30, {});
  REQUIRE(t1.size() == 1);
  CHECK(t1[0].span == Span{0, 29});
  for (int f = 0; f < 30; ++f) CHECK(t1[0].box_at(f) == single[f].box);

  const auto t2 = detect_trajectories(dets, 30, {});
  CHECK(t2.size() == 2);
  const auto again = detect_trajectories(dets, 30, {});
  REQUIRE(again.size() == t2.size());
  for (std::size_t i = 0; i < t2.size(); ++i) CHECK(again[i].boxes == t2[i].boxes);
}
