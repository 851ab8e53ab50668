#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "hoi/errors.hpp"
#include "hoi/recognition.hpp"

using namespace hoi;

namespace {

LabelSpace two_predicates() {
  LabelSpace l;
  l.objects = {"person", "ball", "cake"};
  l.predicates = {"kick", "hold"};
  return l;
}

// Class-dependent offsets on behavior and motion; semantic context constant.
std::vector<TrainingSample> separable_samples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<TrainingSample> out;
  for (int i = 0; i < n; ++i) {
    const int cls = i % 2;
    TrainingSample s;
    s.object = 1;
    s.targets = {static_cast<std::uint8_t>(cls == 0), static_cast<std::uint8_t>(cls == 1)};
    for (int k = 0; k < 4; ++k) s.features.behavior.push_back((k == cls ? 1.0 : 0.0) + g(rng));
    for (int k = 0; k < 15; ++k) s.features.motion.push_back((cls ? 0.5 : -0.5) * (k % 3) + g(rng));
    s.features.semantic = {0.3, -0.2, 0.1, 0.7};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> fused(const InteractionModel& m, const TrainingSample& s) {
  const auto b = predict_segment(s.features, s.object, m);
  return fuse_scores(b.per_branch);
}

}  // namespace

TEST_CASE("mask marks exactly the observed co-occurrences") {
  const auto labels = two_predicates();
  const std::vector<HoiLabel> seen{{0, 1}, {0, 1}, {1, 0}};
  const auto m = build_mask(seen, labels);
  CHECK(m.allowed(1, 0));
  CHECK_FALSE(m.allowed(1, 1));
  CHECK(m.allowed(0, 1));
  CHECK_FALSE(m.allowed(2, 0));
  CHECK_FALSE(m.allowed(2, 1));
  const std::vector<HoiLabel> bad{{0, 7}};
  CHECK_THROWS_AS(build_mask(bad, labels), DataError);
}

TEST_CASE("fusion is the element-wise mean") {
  const std::vector<std::vector<double>> same{{0.3, 0.0}, {0.3, 0.0}, {0.3, 0.0}};
  CHECK(fuse_scores(same) == std::vector<double>{0.3, 0.0});
  const std::vector<std::vector<double>> spread{{0.0}, {0.5}, {1.0}};
  CHECK(fuse_scores(spread)[0] == doctest::Approx(0.5));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::vector<double>> v(3, std::vector<double>(4));
    for (auto& row : v)
      for (auto& x : row) x = u(rng);
    const auto f = fuse_scores(v);
    auto p = v;
    std::rotate(p.begin(), p.begin() + 1, p.end());
    std::swap(p[0], p[1]);
    const auto g = fuse_scores(p);
    for (int k = 0; k < 4; ++k) {
      CHECK(f[k] == doctest::Approx(g[k]).epsilon(1e-15));
      CHECK(f[k] >= std::min({v[0][k], v[1][k], v[2][k]}));
      CHECK(f[k] <= std::max({v[0][k], v[1][k], v[2][k]}));
    }
  }
}

TEST_CASE("binary cross entropy by substitution") {
  const std::vector<double> mask{1, 1, 0, 1};
  const std::vector<std::vector<double>> zero(3, std::vector<double>(4, 0.0));
  const std::vector<double> targets{1, 0, 0, 1};
  CHECK(bce_loss(zero, targets, mask) == doctest::Approx(3 * 3 * std::log(2.0)));

  const double z = std::log(0.25 / 0.75);  // sigmoid(z) = 0.25
  const std::vector<std::vector<double>> quarter(3, std::vector<double>{z});
  const std::vector<double> one{1}, on{1};
  CHECK(bce_loss(quarter, one, on) == doctest::Approx(-3 * std::log(0.25)));

  const std::vector<std::vector<double>> perfect(3, std::vector<double>{60.0, -60.0});
  const std::vector<double> t2{1, 0}, m2{1, 1};
  CHECK(bce_loss(perfect, t2, m2) == doctest::Approx(-6 * std::log(1 - kProbabilityEpsilon)));

  const std::vector<double> masked_target{0, 0, 1, 0};
  CHECK_THROWS_AS(bce_loss(zero, masked_target, mask), DataError);
}

TEST_CASE("loss gradient with respect to logits matches finite differences") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> logits(3, std::vector<double>(5));
    for (auto& row : logits)
      for (auto& x : row) x = g(rng);
    const std::vector<double> targets{1, 0, 0, 1, 0}, mask{1, 1, 0, 1, 1};
    std::vector<std::vector<double>> grad;
    const double loss = bce_loss_gradient(logits, targets, mask, grad);
    CHECK(loss == doctest::Approx(bce_loss(logits, targets, mask)));
    for (int b = 0; b < 3; ++b) {
      for (int i = 0; i < 5; ++i) {
        auto up = logits, down = logits;
        up[b][i] += 1e-6;
        down[b][i] -= 1e-6;
        const double fd = (bce_loss(up, targets, mask) - bce_loss(down, targets, mask)) / 2e-6;
        CHECK(grad[b][i] == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}

TEST_CASE("parameter gradient matches central finite differences") {
  const auto labels = two_predicates();
  for (bool late : {true, false}) {
    for (bool factorized : {true, false}) {
      RecognitionConfig cfg;
      cfg.hidden = 6;
      cfg.late_fusion = late;
      cfg.factorized = factorized;
      const auto samples = separable_samples(8, 31);
      auto model = initialize_model(samples, labels, cfg);
      const auto batch = prepare_batch(model, samples);
      std::vector<double> grad;
      batch_loss_gradient(model, batch, grad);
      auto params = model.flat_parameters();
      REQUIRE(grad.size() == params.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + 1e-5;
        model.set_flat_parameters(params);
        const double up = batch_loss(model, batch);
        params[i] = keep - 1e-5;
        model.set_flat_parameters(params);
        const double down = batch_loss(model, batch);
        params[i] = keep;
        const double fd = (up - down) / 2e-5;
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
      }
      model.set_flat_parameters(params);
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("masked entries score zero whatever the features") {
  const auto labels = two_predicates();
  const auto samples = separable_samples(10, 3);  // only (kick|hold, ball) observed
  auto model = initialize_model(samples, labels, {});
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 10);
  for (int trial = 0; trial < 50; ++trial) {
    FeatureBundle b = samples[trial % samples.size()].features;
    for (auto& x : b.motion) x = g(rng);
    for (auto& x : b.behavior) x = g(rng);
    for (int object : {0, 2}) {
      const auto s = predict_segment(b, object, model);
      for (const auto& branch : s.per_branch)
        for (double v : branch) CHECK(v == 0.0);
    }
    const auto ball = predict_segment(b, 1, model);
    for (const auto& branch : ball.per_branch)
      for (double v : branch) CHECK((v >= 0.0 && v <= 1.0));
  }
}

TEST_CASE("zero final layer scores one half") {
  const auto labels = two_predicates();
  const auto samples = separable_samples(6, 4);
  RecognitionConfig cfg;
  cfg.use_mask = false;
  auto model = initialize_model(samples, labels, cfg);
  for (auto& b : model.branches) {
    b.mlp.w2.setZero();
    b.mlp.b2.setZero();
  }
  for (int object = 0; object < 3; ++object)
    for (const auto& branch : predict_segment(samples[0].features, object, model).per_branch)
      for (double v : branch) CHECK(v == 0.5);

  FeatureBundle wrong = samples[0].features;
  wrong.motion.pop_back();
  CHECK_THROWS_AS(predict_segment(wrong, 1, model), DataError);
}

TEST_CASE("training separates separable bundles") {
  const auto labels = two_predicates();
  const auto samples = separable_samples(40, 21);
  RecognitionConfig cfg;
  cfg.batch_size = 40;
  cfg.learning_rate = 0.1;
  cfg.epochs = 300;
  const auto result = train(samples, labels, cfg);
  for (int e = 1; e < 10; ++e) CHECK(result.loss_curve[e] < result.loss_curve[e - 1]);
  int correct = 0;
  for (const auto& s : samples) {
    const auto f = fused(result.model, s);
    if ((f[0] >= 0.5) == (s.targets[0] == 1) && (f[1] >= 0.5) == (s.targets[1] == 1)) ++correct;
  }
  CHECK(correct == static_cast<int>(samples.size()));

  const auto again = train(samples, labels, cfg);
  CHECK(again.model.flat_parameters() == result.model.flat_parameters());
  CHECK(again.loss_curve == result.loss_curve);
}

TEST_CASE("a single sample is fitted") {
  const auto labels = two_predicates();
  const auto one = separable_samples(1, 5);
  RecognitionConfig cfg;
  cfg.epochs = 400;
  const auto result = train(one, labels, cfg);
  CHECK(result.loss_curve.back() < 0.01);
  CHECK_THROWS_AS(train({}, labels, cfg), DataError);
}

TEST_CASE("small learning rate never increases the full-batch loss") {
  const auto labels = two_predicates();
  const auto samples = separable_samples(16, 8);
  RecognitionConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 30;
  const auto r = train(samples, labels, cfg);
  for (std::size_t e = 1; e < r.loss_curve.size(); ++e) CHECK(r.loss_curve[e] <= r.loss_curve[e - 1]);
}

TEST_CASE("ablation layouts") {
  const auto labels = two_predicates();
  const auto samples = separable_samples(6, 4);
  RecognitionConfig cfg;
  CHECK(initialize_model(samples, labels, cfg).branches.size() == 3);
  cfg.use_behavior = false;
  CHECK(initialize_model(samples, labels, cfg).branches.size() == 2);
  cfg.late_fusion = false;
  CHECK(initialize_model(samples, labels, cfg).branches.size() == 1);
  cfg = {};
  cfg.factorized = false;
  const auto joint = initialize_model(samples, labels, cfg);
  CHECK(joint.output_size() == 6);
  const auto om = joint.output_mask(1);
  CHECK(std::count(om.begin(), om.end(), 1.0) == 2);
  CHECK(om[1 * 2 + 0] == 1.0);
  CHECK(om[1 * 2 + 1] == 1.0);
}

TEST_CASE("segments are associated into instances by runs") {
  std::vector<Trajectory> ts{
      make_trajectory({0, 49}, std::vector<Box>(50, {0, 0, 10, 20}), 0, 1.0),
      make_trajectory({0, 49}, std::vector<Box>(50, {20, 0, 10, 10}), 1, 1.0)};
  const std::vector<CandidatePair> pairs{{0, 1, {0, 49}}};
  const std::vector<double> hold{0.9, 0.8, 0.7, 0.2, 0.6};
  std::vector<ScoredSegment> segs;
  for (int i = 0; i < 5; ++i) segs.push_back({0, {10 * i, 10 * i + 9}, 1, {0.1, hold[i]}});
  RecognitionConfig cfg;
  auto inst = associate_instances(segs, pairs, ts, cfg);
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].span == Span{0, 29});
  CHECK(inst[0].score == doctest::Approx(0.8));
  CHECK(inst[0].subject.span == Span{0, 29});
  CHECK(inst[1].span == Span{40, 49});
  CHECK(inst[1].predicate == 1);

  std::vector<ScoredSegment> both{{0, {0, 9}, 1, {0.7, 0.9}}};
  inst = associate_instances(both, pairs, ts, cfg);
  REQUIRE(inst.size() == 2);
  CHECK(inst[0].span == inst[1].span);
  CHECK(inst[0].predicate == 1);

  cfg.top_k = 1;
  CHECK(associate_instances(both, pairs, ts, cfg).size() == 1);

  std::vector<ScoredSegment> low{{0, {0, 9}, 1, {0.2, 0.4}}};
  CHECK(associate_instances(low, pairs, ts, {}).empty());
}

TEST_CASE("associated runs are disjoint and cover exactly the qualifying segments") {
  std::vector<Trajectory> ts{
      make_trajectory({0, 199}, std::vector<Box>(200, {0, 0, 10, 20}), 0, 1.0),
      make_trajectory({0, 199}, std::vector<Box>(200, {20, 0, 10, 10}), 1, 1.0)};
  const std::vector<CandidatePair> pairs{{0, 1, {0, 199}}};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ScoredSegment> segs;
    for (int i = 0; i < 20; ++i) segs.push_back({0, {10 * i, 10 * i + 9}, 1, {u(rng), u(rng)}});
    const auto inst = associate_instances(segs, pairs, ts, {});
    for (int p = 0; p < 2; ++p) {
      std::vector<int> covered(20, 0);
      for (const auto& x : inst) {
        if (x.predicate != p) continue;
        for (int f = x.span.begin; f <= x.span.end; f += 10) ++covered[f / 10];
      }
      for (int i = 0; i < 20; ++i) CHECK(covered[i] == (segs[i].scores[p] >= 0.5 ? 1 : 0));
    }
  }
}

TEST_CASE("recognition config validation") {
  RecognitionConfig cfg;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = {};
  cfg.top_k = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
