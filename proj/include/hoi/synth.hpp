#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hoi/features.hpp"
#include "hoi/io.hpp"
#include "hoi/labels.hpp"
#include "hoi/tracklets.hpp"

// Synthetic scenes: humans and objects in a grid of slots, scripted
// interactions, detections with configurable noise, keypoints at fixed body
// offsets and feature grids whose per-predicate channels light up around the
// joints a predicate involves. A test bed, not a model of real footage.
namespace hoi::synth {

struct ObjectKind {
  std::string name;
  double width = 0.0;
  double height = 0.0;
};

struct PredicateKind {
  std::string name;
  double dx = 0.0;  // object centre relative to the human centre while interacting
  double dy = 0.0;
  std::vector<int> joints;  // joints whose regions activate the predicate channel
  std::vector<std::string> objects;  // categories the predicate is scripted with
};

struct Vocabulary {
  std::string human = "person";
  double human_width = 42.0;
  double human_height = 96.0;
  std::vector<ObjectKind> objects;  // excludes the human
  std::vector<PredicateKind> predicates;
  // Pairs (implied, by): scripting `by` with an object compatible with
  // `implied` also scripts `implied` over the same span.
  std::vector<std::pair<std::string, std::string>> implies;

  LabelSpace label_space() const;
  const ObjectKind& object(const std::string& name) const;
};

// 8 predicates over 11 object categories; "car" and "bench" never interact.
Vocabulary default_vocabulary();

enum class MotionModel { kStatic, kLinear, kSinusoidal };

struct NoiseSpec {
  double jitter = 0.0;               // Gaussian sigma on x, y, w, h in pixels
  double drop_rate = 0.0;            // probability a true box is not detected
  double false_positive_rate = 0.0;  // probability of an extra, displaced duplicate

  void validate() const;
};

struct ScriptEntry {
  int subject = 0;  // human index
  int object = 0;   // object index
  std::string predicate;
  Span span;
};

struct SceneSpec {
  std::string id;
  std::uint64_t seed = 0;
  int num_frames = 150;
  int num_humans = 1;
  std::vector<std::string> objects;  // categories; object i has track id num_humans + i
  MotionModel motion = MotionModel::kSinusoidal;
  double deformation = 0.1;  // relative amplitude of periodic box size changes
  double pose_wobble = 2.0;  // pixels a partner object drifts around its pose
  double annotation_jitter = 0.0;  // Gaussian sigma on the annotated boxes themselves
  std::vector<ScriptEntry> script;
  NoiseSpec noise;

  // Throws ValidationError on malformed specs and on scenes whose entities
  // cannot be laid out without full occlusion.
  void validate(const Vocabulary& vocab) const;
};

struct RenderConfig {
  int width = 480;
  int height = 360;
  int cell = 24;             // feature grid cell size in pixels
  double blob_sigma = 15.0;  // pixels
  int embedding_dim = 16;
  std::uint64_t embedding_seed = 1;

  int grid_width() const { return width / cell; }
  int grid_height() const { return height / cell; }
};

struct Scene {
  SceneSpec spec;
  io::AnnotationRecord truth;
  std::vector<Detection> detections;  // sorted by frame
  SkeletonFrames keypoints;
  // Per-frame predicate activity of each human, for grid rendering.
  std::vector<std::vector<std::vector<int>>> active;  // [human][frame] -> predicate ids
};

Scene generate_scene(const SceneSpec& spec, const Vocabulary& vocab, const RenderConfig& render);

// One frame of the scene's feature grid, channel-major. Channel 0 marks
// humans, channel 1 objects, channel 2 + k predicate k.
std::vector<float> render_grid(const Scene& scene, const Vocabulary& vocab,
                               const RenderConfig& render, int frame);

struct SuiteConfig {
  int num_videos = 20;
  std::uint64_t seed = 1;
  int min_frames = 150;
  int max_frames = 200;
  int max_interacting = 2;      // humans with a partner object
  double idle_human_rate = 0.3;  // chance of one extra human without interactions
  int max_distractors = 2;      // objects nobody interacts with
  MotionModel motion = MotionModel::kSinusoidal;
  double annotation_jitter = 0.0;
  NoiseSpec noise;
  std::string prefix = "scene";

  void validate() const;
};

// Random scene specs. Interaction spans start and end on multiples of
// `segment_len`, and the partners of one scene have disjoint predicate sets.
std::vector<SceneSpec> random_suite(const SuiteConfig& cfg, const Vocabulary& vocab,
                                    int segment_len = 10);

// Writes labels, embeddings, per-scene files and manifest.json into `dir`;
// returns the manifest path.
std::filesystem::path write_suite(const std::filesystem::path& dir,
                                  const std::vector<SceneSpec>& specs,
                                  const Vocabulary& vocab, const RenderConfig& render);

EmbeddingTable make_embeddings(const LabelSpace& labels, int dim, std::uint64_t seed);

}  // namespace hoi::synth
