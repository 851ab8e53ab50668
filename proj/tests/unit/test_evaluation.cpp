#include <random>

#include "doctest.h"
#include "hoi/evaluation.hpp"

using namespace hoi;

namespace {

Trajectory track(Span s, double x) {
  return make_trajectory(s, std::vector<Box>(s.length(), {x, 0, 10, 10}), 0);
}

HoiInstance inst(const std::string& video, int predicate, int object, Span span, double x,
                 double score = 1.0) {
  HoiInstance i;
  i.video = video;
  i.predicate = predicate;
  i.object_category = object;
  i.span = span;
  i.subject = track(span, x);
  i.object = track(span, x + 100);
  i.subject.category = 0;
  i.object.category = object;
  i.score = score;
  return i;
}

// Precision at every prefix ending in a hit, accumulated by explicit counting.
double prefix_oracle(const std::vector<std::uint8_t>& flags, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 1; r <= flags.size(); ++r) {
    if (!flags[r - 1]) continue;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < r; ++i) hits += flags[i];
    total += static_cast<double>(hits) / static_cast<double>(r);
  }
  return total / static_cast<double>(num_gt);
}

LabelSpace labels() {
  LabelSpace l;
  l.objects = {"person", "ball", "cup"};
  l.predicates = {"kick", "hold"};
  return l;
}

}  // namespace

TEST_CASE("average precision by hand") {
  CHECK(average_precision(std::vector<std::uint8_t>{1, 1, 1}, 3) == 1.0);
  CHECK(average_precision(std::vector<std::uint8_t>{0, 1}, 1) == doctest::Approx(0.5));
  CHECK(average_precision(std::vector<std::uint8_t>{1, 0, 1}, 2) == doctest::Approx(5.0 / 6.0));
  CHECK(average_precision(std::vector<std::uint8_t>{}, 0) == 0.0);
}

TEST_CASE("average precision equals the prefix oracle") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> len(0, 30), bit(0, 1), extra(0, 5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint8_t> flags(len(rng));
    std::size_t hits = 0;
    for (auto& f : flags) hits += (f = static_cast<std::uint8_t>(bit(rng)));
    const std::size_t num_gt = hits + extra(rng);
    CHECK(std::abs(average_precision(flags, num_gt) - prefix_oracle(flags, num_gt)) <= 1e-12);
  }
}

TEST_CASE("matching") {
  const std::vector<HoiInstance> gts{inst("v", 0, 1, {0, 9}, 0)};
  std::vector<bool> used(1, false);
  CHECK(match_instance(gts[0], gts, used, {}) == std::optional<std::size_t>(0));
  CHECK(used[0]);
  CHECK_FALSE(match_instance(gts[0], gts, used, {}));

  std::vector<bool> fresh(1, false);
  CHECK_FALSE(match_instance(inst("v", 1, 1, {0, 9}, 0), gts, fresh, {}));
  CHECK_FALSE(match_instance(inst("v", 0, 1, {0, 9}, 50), gts, fresh, {}));
  // Subject vIoU 3/10 with a shifted span does not exceed 0.5.
  CHECK_FALSE(match_instance(inst("v", 0, 1, {7, 9}, 0), gts, fresh, {}));

  const std::vector<HoiInstance> two{inst("v", 0, 1, {0, 9}, 3), inst("v", 0, 1, {0, 9}, 0)};
  std::vector<bool> u2(2, false);
  CHECK(match_instance(gts[0], two, u2, {}) == std::optional<std::size_t>(1));
}

TEST_CASE("greedy one-to-one protocol") {
  VideoInstances gt{{"v", {inst("v", 0, 1, {0, 9}, 0)}}};
  VideoInstances pred{{"v", {inst("v", 0, 1, {0, 9}, 0, 0.9), inst("v", 0, 1, {0, 9}, 1, 0.8)}}};
  const auto r = class_map(pred, gt, {});
  CHECK(r.mean == doctest::Approx(1.0));
  CHECK(r.per_class.at({0, 1}).num_pred == 2);
  CHECK(video_map(pred, gt, {}) == doctest::Approx(1.0));

  VideoInstances swapped{{"v", {inst("v", 0, 1, {0, 9}, 9, 0.9), inst("v", 0, 1, {0, 9}, 0, 0.8)}}};
  CHECK(video_map(swapped, gt, {}) == doctest::Approx(0.5));
}

TEST_CASE("class and video mAP") {
  VideoInstances gt{{"a", {inst("a", 0, 1, {0, 9}, 0)}}, {"b", {inst("b", 1, 2, {0, 9}, 0)}}};
  VideoInstances half{{"a", {inst("a", 0, 1, {0, 9}, 0)}}};
  CHECK(class_map(half, gt, {}).mean == doctest::Approx(0.5));
  CHECK(video_map(half, gt, {}) == doctest::Approx(0.5));
  CHECK(class_map({}, gt, {}).mean == 0.0);
  CHECK(video_map({}, gt, {}) == 0.0);
  CHECK(class_map(gt, gt, {}).mean == 1.0);
}

TEST_CASE("hand-built three-instance case") {
  // One video, two gts of label (kick, ball); predictions ranked hit, miss, hit.
  VideoInstances gt{{"v", {inst("v", 0, 1, {0, 9}, 0), inst("v", 0, 1, {0, 9}, 200)}}};
  VideoInstances pred{{"v", {inst("v", 0, 1, {0, 9}, 0, 0.9), inst("v", 0, 1, {0, 9}, 400, 0.8),
                             inst("v", 0, 1, {0, 9}, 200, 0.7)}}};
  const auto m = evaluate(pred, gt, labels(), {});
  CHECK(m.class_map == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(m.video_map == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(m.recall.at(50) == 1.0);
  CHECK(m.precision.at(1) == 1.0);
}

TEST_CASE("recall at K") {
  VideoInstances gt{{"v", {inst("v", 0, 1, {0, 9}, 0), inst("v", 0, 1, {0, 9}, 200),
                           inst("v", 0, 1, {0, 9}, 400), inst("v", 0, 1, {0, 9}, 600)}}};
  VideoInstances pred{{"v", {inst("v", 0, 1, {0, 9}, 0, 0.9), inst("v", 0, 1, {0, 9}, 200, 0.8)}}};
  MatchConfig cfg;
  cfg.recall_k = {1, 50};
  const auto r = recall_at_k(pred, gt, cfg);
  CHECK(r.at(1) == doctest::Approx(0.25));
  CHECK(r.at(50) == doctest::Approx(0.5));
}

TEST_CASE("video tags and tagging precision") {
  const auto l = labels();
  const std::vector<HoiInstance> three{inst("v", 0, 1, {0, 9}, 0, 0.3), inst("v", 0, 1, {0, 9}, 0, 0.9),
                                       inst("v", 0, 1, {0, 9}, 0, 0.5)};
  auto tags = video_tags(three, l);
  REQUIRE(tags.size() == 1);
  CHECK(tags[0].score == 0.9);

  // Equal scores: "hold" sorts before "kick".
  const std::vector<HoiInstance> tie{inst("v", 0, 1, {0, 9}, 0, 0.5), inst("v", 1, 2, {0, 9}, 0, 0.5),
                                     inst("v", 1, 1, {0, 9}, 0, 0.7)};
  tags = video_tags(tie, l);
  REQUIRE(tags.size() == 3);
  CHECK(tags[0].label == HoiLabel{1, 1});
  CHECK(tags[1].label == HoiLabel{1, 2});
  CHECK(tags[2].label == HoiLabel{0, 1});

  // Five tags, two correct.
  std::vector<Tag> five;
  for (int p = 0; p < 2; ++p)
    for (int o = 0; o < 3; ++o)
      if (five.size() < 5) five.push_back({{p, o}, 1.0 - 0.1 * five.size()});
  VideoInstances gt{{"v", {inst("v", 0, 0, {0, 9}, 0), inst("v", 1, 1, {0, 9}, 0)}},
                    {"w", {inst("w", 0, 1, {0, 9}, 0)}}};
  std::map<std::string, std::vector<Tag>> by_video{{"v", five}};
  MatchConfig cfg;
  cfg.precision_n = {1, 5};
  const auto p = tagging_precision(by_video, gt, cfg);
  CHECK(p.at(5) == doctest::Approx((0.4 + 0.0) / 2.0));
  CHECK(p.at(1) == doctest::Approx((1.0 + 0.0) / 2.0));
}

TEST_CASE("ground truth against itself scores one everywhere") {
  VideoInstances gt{{"a", {inst("a", 0, 1, {0, 9}, 0), inst("a", 1, 2, {5, 20}, 100)}},
                    {"b", {inst("b", 1, 1, {3, 30}, 0)}}};
  const auto m = evaluate(gt, gt, labels(), {});
  CHECK(m.class_map == 1.0);
  CHECK(m.video_map == 1.0);
  for (const auto& [k, v] : m.recall) CHECK(v == 1.0);
  for (const auto& [n, v] : m.precision) CHECK(v == 1.0);

  const auto none = evaluate({}, gt, labels(), {});
  CHECK(none.class_map == 0.0);
  for (const auto& [n, v] : none.precision) CHECK(v == 0.0);
}

TEST_CASE("metrics depend only on the ranking") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> x(0, 3);
  VideoInstances gt, pred;
  for (const char* v : {"a", "b", "c"}) {
    for (int i = 0; i < 4; ++i) gt[v].push_back(inst(v, i % 2, 1 + i % 2, {0, 9}, 30.0 * x(rng)));
    for (int i = 0; i < 6; ++i) pred[v].push_back(inst(v, i % 2, 1 + i % 2, {0, 9}, 30.0 * x(rng), u(rng)));
  }
  auto scaled = pred;
  for (auto& [v, list] : scaled)
    for (auto& p : list) p.score *= 3.7;
  const auto m1 = evaluate(pred, gt, labels(), {});
  const auto m2 = evaluate(scaled, gt, labels(), {});
  CHECK(m1.class_map == m2.class_map);
  CHECK(m1.video_map == m2.video_map);
  CHECK(m1.recall == m2.recall);
  CHECK(m1.precision == m2.precision);
  for (double v : {m1.class_map, m1.video_map}) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("frame detection mAP") {
  std::map<std::string, std::vector<Trajectory>> truth{{"v", {track({0, 9}, 0)}}};
  CHECK(frame_detection_map(truth, truth) == doctest::Approx(1.0));
  std::map<std::string, std::vector<Trajectory>> off{{"v", {track({0, 9}, 50)}}};
  CHECK(frame_detection_map(off, truth) == 0.0);
}

TEST_CASE("match config validation") {
  MatchConfig cfg;
  cfg.viou_threshold = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.recall_k = {0};
  CHECK_THROWS(cfg.validate());
}
