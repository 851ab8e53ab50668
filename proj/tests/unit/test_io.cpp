#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "hoi/errors.hpp"
#include "hoi/io.hpp"

using namespace hoi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hoi_io_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

LabelSpace labels() {
  LabelSpace l;
  l.objects = {"person", "dog", "cup"};
  l.predicates = {"walk", "hold"};
  return l;
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("label space round trip") {
  TempDir dir;
  io::save_label_space(dir / "labels.json", labels());
  CHECK(io::load_label_space(dir / "labels.json") == labels());
  write(dir / "bad.json", R"({"human": "person", "objects": ["dog"], "predicates": ["walk"]})");
  CHECK_THROWS_AS(io::load_label_space(dir / "bad.json"), DataError);
}

TEST_CASE("detections") {
  TempDir dir;
  write(dir / "empty.jsonl", "");
  CHECK(io::load_detections(dir / "empty.jsonl", labels()).empty());

  write(dir / "one.jsonl",
        R"({"video": "v", "frame": 3, "box": [1, 2, 3, 4], "category": "dog", "score": 0.5})" "\n");
  const auto one = io::load_detections(dir / "one.jsonl", labels());
  REQUIRE(one.at("v").size() == 1);
  CHECK(one.at("v")[0].box == Box{1, 2, 3, 4});
  CHECK(one.at("v")[0].category == 1);

  write(dir / "score.jsonl",
        "\n" R"({"video": "v", "frame": 3, "box": [1, 2, 3, 4], "category": "dog", "score": 1.5})" "\n");
  CHECK_THROWS_WITH_AS(io::load_detections(dir / "score.jsonl", labels()), doctest::Contains(":2:"),
                       DataError);
  write(dir / "cat.jsonl",
        R"({"video": "v", "frame": 3, "box": [1, 2, 3, 4], "category": "zebra", "score": 0.5})" "\n");
  CHECK_THROWS_WITH_AS(io::load_detections(dir / "cat.jsonl", labels()), doctest::Contains("zebra"),
                       DataError);
  write(dir / "junk.jsonl", "{not json\n");
  CHECK_THROWS_WITH_AS(io::load_detections(dir / "junk.jsonl", labels()), doctest::Contains(":1:"),
                       DataError);

  io::DetectionsByVideo dets;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 100);
  for (int i = 0; i < 50; ++i) {
    dets["a"].push_back({i / 3, {u(rng), u(rng), u(rng), u(rng)}, i % 3, u(rng) / 100.0});
  }
  io::save_detections(dir / "rt.jsonl", dets, labels());
  const auto back = io::load_detections(dir / "rt.jsonl", labels());
  REQUIRE(back.at("a").size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(back.at("a")[i].box == dets["a"][i].box);
    CHECK(back.at("a")[i].score == dets["a"][i].score);
  }
}

TEST_CASE("keypoints") {
  TempDir dir;
  io::KeypointsByVideo kp;
  Skeleton s;
  for (int j = 0; j < kNumJoints; ++j) s.joints[j] = {1.5 * j, 2.0 * j, j % 2 ? 1.0 : 0.25};
  kp["v"][4] = {s, s};
  io::save_keypoints(dir / "k.jsonl", kp);
  const auto back = io::load_keypoints(dir / "k.jsonl");
  REQUIRE(back.at("v").at(4).size() == 2);
  CHECK(back.at("v").at(4)[1].joints[16].x == s.joints[16].x);
  CHECK(back.at("v").at(4)[1].joints[16].visibility == s.joints[16].visibility);

  std::string sixteen = R"({"video": "v", "frame": 0, "keypoints": [)";
  for (int j = 0; j < 16; ++j) sixteen += std::string(j ? "," : "") + "[0, 0, 1]";
  write(dir / "short.jsonl", sixteen + "]}\n");
  CHECK_THROWS_AS(io::load_keypoints(dir / "short.jsonl"), DataError);

  std::string vis = R"({"video": "v", "frame": 0, "keypoints": [)";
  for (int j = 0; j < 17; ++j) vis += std::string(j ? "," : "") + (j == 5 ? "[0, 0, 1.5]" : "[0, 0, 1]");
  write(dir / "vis.jsonl", vis + "]}\n");
  CHECK_THROWS_AS(io::load_keypoints(dir / "vis.jsonl"), DataError);
}

TEST_CASE("feature grid container") {
  TempDir dir;
  const io::GridHeader h{3, 2, 4, 5, 0, 64.0f, 32.0f};
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-5, 5);
  std::vector<std::vector<float>> frames(6, std::vector<float>(24));
  for (auto& f : frames)
    for (auto& v : f) v = u(rng);
  {
    io::FeatureGridWriter w(dir / "g.grid", h);
    for (const auto& f : frames) w.append(f);
  }
  CHECK(fs::file_size(dir / "g.grid") == io::kGridHeaderBytes + 6 * 24 * sizeof(float));
  io::FeatureGridReader r(dir / "g.grid");
  CHECK(r.header().frame_count == 6);
  CHECK(r.frames() == Span{5, 10});
  const auto g = r.read(8);
  CHECK(g.frame == 8);
  CHECK(g.frame_box == Box{0, 0, 64, 32});
  CHECK(std::memcmp(g.values.data(), frames[3].data(), 24 * sizeof(float)) == 0);
  const auto many = io::load_feature_grids(dir / "g.grid", {5, 10});
  for (int i = 0; i < 6; ++i) CHECK(std::memcmp(many[i].values.data(), frames[i].data(), 96) == 0);
  CHECK_THROWS_AS(r.read(11), DataError);
  CHECK_THROWS_AS(io::load_feature_grids(dir / "g.grid", {4, 6}), DataError);

  {
    io::FeatureGridWriter w(dir / "empty.grid", h);
  }
  io::FeatureGridReader e(dir / "empty.grid");
  CHECK(e.header().frame_count == 0);

  std::string raw = bytes_of(dir / "g.grid");
  raw[0] = 'X';
  write(dir / "magic.grid", raw);
  CHECK_THROWS_WITH_AS(io::FeatureGridReader(dir / "magic.grid"), doctest::Contains("magic"), DataError);
  raw = bytes_of(dir / "g.grid");
  raw[4] = 9;
  write(dir / "version.grid", raw);
  CHECK_THROWS_WITH_AS(io::FeatureGridReader(dir / "version.grid"), doctest::Contains("version"), DataError);
  raw = bytes_of(dir / "g.grid");
  write(dir / "trunc.grid", raw.substr(0, raw.size() - 10));
  CHECK_THROWS_AS(io::FeatureGridReader(dir / "trunc.grid"), DataError);
}

TEST_CASE("embeddings") {
  TempDir dir;
  write(dir / "e.txt", "person 1 2 3 4\ndog 0.5 0.25 -1 2\n");
  const auto t = io::load_embeddings(dir / "e.txt");
  CHECK(t.size() == 2);
  CHECK(t.dim() == 4);
  io::save_embeddings(dir / "rt.txt", t);
  CHECK(io::load_embeddings(dir / "rt.txt").entries() == t.entries());

  write(dir / "dup.txt", "a 1 2\na 3 4\n");
  CHECK_THROWS_AS(io::load_embeddings(dir / "dup.txt"), DataError);
  write(dir / "dim.txt", "a 1 2\nb 3 4 5\n");
  CHECK_THROWS_AS(io::load_embeddings(dir / "dim.txt"), DataError);
  write(dir / "empty.txt", "");
  CHECK_THROWS_AS(io::load_embeddings(dir / "empty.txt"), DataError);
}

TEST_CASE("predictions round trip") {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 300);
  std::uniform_int_distribution<int> len(1, 20), start(0, 100), pred(0, 1), obj(0, 2);
  std::vector<HoiInstance> list;
  for (int i = 0; i < 100; ++i) {
    HoiInstance x;
    x.video = "v" + std::to_string(i % 7);
    x.predicate = pred(rng);
    x.object_category = obj(rng);
    const int b = start(rng);
    x.span = {b, b + len(rng) - 1};
    std::vector<Box> hb, ob;
    for (int f = 0; f < x.span.length(); ++f) {
      hb.push_back({u(rng), u(rng), u(rng), u(rng)});
      ob.push_back({u(rng), u(rng), u(rng), u(rng)});
    }
    x.subject = make_trajectory(x.span, hb, 0, u(rng) / 300);
    x.object = make_trajectory(x.span, ob, x.object_category, u(rng) / 300);
    x.score = u(rng) / 300;
    list.push_back(x);
  }
  io::save_predictions(dir / "p.jsonl", list, labels());
  const auto back = io::load_predictions(dir / "p.jsonl", labels());
  REQUIRE(back.size() == list.size());
  for (std::size_t i = 0; i < list.size(); ++i) {
    CHECK(back[i].video == list[i].video);
    CHECK(back[i].label() == list[i].label());
    CHECK(back[i].span == list[i].span);
    CHECK(back[i].score == list[i].score);
    CHECK(back[i].subject.boxes == list[i].subject.boxes);
    CHECK(back[i].object.boxes == list[i].object.boxes);
    CHECK(back[i].subject.score == list[i].subject.score);
  }

  io::save_predictions(dir / "none.jsonl", {}, labels());
  CHECK(io::load_predictions(dir / "none.jsonl", labels()).empty());

  const std::string text = bytes_of(dir / "p.jsonl");
  write(dir / "trunc.jsonl", text.substr(0, text.size() / 2));
  CHECK_THROWS_WITH_AS(io::load_predictions(dir / "trunc.jsonl", labels()), doctest::Contains("trunc.jsonl:"),
                       DataError);

  write(dir / "span.jsonl",
        R"({"video":"v","predicate":"hold","object":"cup","score":0.5,"begin":0,"end":2,)"
        R"("subject_trajectory":{"category":"person","score":1,"begin":0,"boxes":[[0,0,1,1]]},)"
        R"("object_trajectory":{"category":"cup","score":1,"begin":0,"boxes":[[0,0,1,1],[0,0,1,1],[0,0,1,1]]}})" "\n");
  CHECK_THROWS_AS(io::load_predictions(dir / "span.jsonl", labels()), DataError);
}

TEST_CASE("annotations") {
  TempDir dir;
  io::AnnotationRecord rec;
  rec.video_id = "v";
  rec.frame_count = 20;
  rec.width = 320;
  rec.height = 240;
  rec.trajectories.push_back({0, "person", make_trajectory({0, 9}, std::vector<Box>(10, {1, 2, 3, 4}), 0)});
  rec.trajectories.push_back({1, "cup", make_trajectory({5, 19}, std::vector<Box>(15, {5, 6, 7, 8}), 2)});
  rec.relations.push_back({0, 1, "hold", 5, 10});
  io::save_annotation(dir / "a.json", rec);
  const auto back = io::load_annotation(dir / "a.json");
  CHECK(back.trajectory(1).trajectory.span == Span{5, 19});
  CHECK(back.trajectory(1).trajectory.boxes == rec.trajectories[1].trajectory.boxes);
  const auto gt = io::ground_truth_instances(back, labels());
  REQUIRE(gt.size() == 1);
  CHECK(gt[0].span == Span{5, 9});
  CHECK(gt[0].subject.span == Span{5, 9});

  rec.relations[0].end_fid = 12;  // past the subject's last frame
  io::save_annotation(dir / "bad.json", rec);
  CHECK_THROWS_AS(io::load_annotation(dir / "bad.json"), DataError);

  rec.relations[0] = {1, 0, "hold", 5, 10};  // cup as subject
  io::save_annotation(dir / "subj.json", rec);
  CHECK_THROWS_AS(io::ground_truth_instances(io::load_annotation(dir / "subj.json"), labels()), DataError);
}

namespace {

InteractionModel random_model(const LabelSpace& l) {
  std::vector<TrainingSample> samples;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  for (int i = 0; i < 6; ++i) {
    TrainingSample s;
    s.object = 1 + i % 2;
    s.targets = {static_cast<std::uint8_t>(i % 2 == 0), static_cast<std::uint8_t>(i % 3 == 0)};
    s.features.behavior.resize(5);
    s.features.motion.resize(15);
    s.features.semantic.resize(4);
    for (auto* v : {&s.features.behavior, &s.features.motion, &s.features.semantic})
      for (auto& x : *v) x = g(rng);
    samples.push_back(s);
  }
  RecognitionConfig cfg;
  cfg.hidden = 5;
  return initialize_model(samples, l, cfg);
}

}  // namespace

TEST_CASE("model checkpoint") {
  TempDir dir;
  const auto model = random_model(labels());
  io::save_model(dir / "m.bin", model);
  const auto back = io::load_model(dir / "m.bin");
  CHECK(back.flat_parameters() == model.flat_parameters());
  CHECK(back.mask == model.mask);
  CHECK(back.labels == model.labels);
  FeatureBundle b;
  b.behavior = {0.1, 0.2, 0.3, 0.4, 0.5};
  b.motion.assign(15, 0.3);
  b.semantic = {1, 0, -1, 0.5};
  CHECK(predict_segment(b, 1, back).per_branch == predict_segment(b, 1, model).per_branch);

  std::string raw = bytes_of(dir / "m.bin");
  raw[raw.size() - 20] ^= 0x40;
  write(dir / "flip.bin", raw);
  CHECK_THROWS_WITH_AS(io::load_model(dir / "flip.bin"), doctest::Contains("checksum"), DataError);

  raw = bytes_of(dir / "m.bin");
  raw[4] = 7;
  write(dir / "version.bin", raw);
  CHECK_THROWS_WITH_AS(io::load_model(dir / "version.bin"), doctest::Contains("version"), DataError);

  auto short_mask = model;
  short_mask.mask.rows.pop_back();
  io::save_model(dir / "mask.bin", short_mask);
  CHECK_THROWS_WITH_AS(io::load_model(dir / "mask.bin"), doctest::Contains("mask"), DataError);
}

TEST_CASE("manifest") {
  TempDir dir;
  fs::create_directories(dir / "v1");
  write(dir / "labels.json", "{}");
  write(dir / "v1/d.jsonl", "");
  io::DatasetManifest m;
  m.labels = "labels.json";
  m.videos.push_back({"v1", 30, 25.0, "v1/d.jsonl", "", "", ""});
  io::save_manifest(dir / "manifest.json", m);
  const auto back = io::load_manifest(dir / "manifest.json");
  REQUIRE(back.videos.size() == 1);
  CHECK(back.videos[0].detections == dir / "v1/d.jsonl");
  CHECK(back.videos[0].fps == 25.0);

  m.videos.push_back(m.videos[0]);
  io::save_manifest(dir / "dup.json", m);
  CHECK_THROWS_WITH_AS(io::load_manifest(dir / "dup.json"), doctest::Contains("duplicate"), DataError);

  m.videos.pop_back();
  m.videos[0].detections = "v1/missing.jsonl";
  io::save_manifest(dir / "missing.json", m);
  CHECK_THROWS_WITH_AS(io::load_manifest(dir / "missing.json"), doctest::Contains("missing.jsonl"),
                       DataError);
}

TEST_CASE("checksum is FNV-1a") {
  CHECK(io::checksum("", 0) == 0xcbf29ce484222325ULL);
  CHECK(io::checksum("a", 1) == 0xaf63dc4c8601ec8cULL);
}
