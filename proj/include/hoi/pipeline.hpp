#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoi/evaluation.hpp"
#include "hoi/features.hpp"
#include "hoi/io.hpp"
#include "hoi/recognition.hpp"
#include "hoi/tracklets.hpp"

namespace hoi {

struct PairingConfig {
  int segment_len = 10;  // candidate segment duration L

  void validate() const;
};

struct RuntimeConfig {
  int workers = 0;  // 0 = available parallelism; HOI_WORKERS overrides

  void validate() const;
};

struct PipelineConfig {
  SegmentationConfig tracklets;
  PairingConfig pairing;
  FeatureConfig features;
  RecognitionConfig recognition;
  MatchConfig evaluation;
  RuntimeConfig runtime;

  void validate() const;
};

// JSON document with one object per section. Unknown keys and ill-typed
// values are ValidationErrors naming "section.key".
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

// "section.key=value"; value is parsed as JSON, falling back to a string.
void apply_override(PipelineConfig& cfg, const std::string& assignment);

// Pretty-printed JSON of every field.
std::string dump_config(const PipelineConfig& cfg);

// Worker count after the environment override, at least 1.
int resolve_workers(const RuntimeConfig& cfg);

// ---- datasets ------------------------------------------------------------

struct Dataset {
  std::filesystem::path root;
  io::DatasetManifest manifest;
  LabelSpace labels;
  std::optional<EmbeddingTable> embeddings;
};

Dataset load_dataset(const std::filesystem::path& manifest_path);

struct VideoData {
  io::VideoEntry entry;
  std::vector<Detection> detections;
  SkeletonFrames keypoints;
  std::optional<io::AnnotationRecord> truth;
};

VideoData load_video(const io::VideoEntry& entry, const LabelSpace& labels);

// Ground truth of every annotated video, keyed by video id.
VideoInstances dataset_ground_truth(const Dataset& data);

// ---- per-video stages ----------------------------------------------------

struct VideoFeatures {
  std::vector<CandidatePair> pairs;
  std::vector<CandidateSegment> segments;
  std::vector<FeatureBundle> bundles;  // parallel to segments
};

// Pairs, candidate segments and their feature bundles. The behavior
// descriptor is skipped (left empty) when `with_behavior` is false.
VideoFeatures extract_features(const std::vector<Trajectory>& trajectories,
                               const VideoData& video, const Dataset& data,
                               const PipelineConfig& cfg, bool with_behavior);

// Segments of annotated pairs get predicate targets from the relations that
// cover at least half of their frames; all other segments are negatives.
std::vector<TrainingSample> training_samples(const VideoData& video, const Dataset& data,
                                             const PipelineConfig& cfg, bool with_behavior);

std::vector<HoiInstance> detect_video(const VideoData& video, const Dataset& data,
                                      const InteractionModel& model, const PipelineConfig& cfg,
                                      bool gt_trajectories);

// ---- commands ------------------------------------------------------------

struct TrackReport {
  std::map<std::string, std::vector<Trajectory>> trajectories;
  std::size_t frames = 0;
  double seconds = 0.0;
  double fps = 0.0;
  std::optional<double> detection_map;  // when every video is annotated
};

TrackReport run_track(const Dataset& data, const PipelineConfig& cfg);

TrainResult run_train(const Dataset& data, const PipelineConfig& cfg);

// Instances of all videos in video-id order, each video's list rank-ordered.
std::vector<HoiInstance> run_detect(const Dataset& data, const InteractionModel& model,
                                    const PipelineConfig& cfg, bool gt_trajectories);

// Throws DataError listing prediction videos absent from the ground truth.
Metrics run_evaluate(const std::vector<HoiInstance>& predictions, const VideoInstances& truth,
                     const LabelSpace& labels, const PipelineConfig& cfg);

// Per video, deduplicated labels ranked by score, truncated to `top_n`.
std::map<std::string, std::vector<Tag>> run_tag(const std::vector<HoiInstance>& predictions,
                                                const LabelSpace& labels, int top_n);

// Fixed key order: class_mAP, video_mAP, R@K..., P@N... .
std::vector<std::pair<std::string, double>> report_rows(const Metrics& metrics);
std::string format_report(const Metrics& metrics);
std::string report_json(const Metrics& metrics);
std::string per_class_csv(const Metrics& metrics, const LabelSpace& labels);

}  // namespace hoi
