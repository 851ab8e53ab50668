#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoi/features.hpp"
#include "hoi/labels.hpp"
#include "hoi/recognition.hpp"
#include "hoi/tracklets.hpp"

namespace hoi::io {

namespace fs = std::filesystem;

// ---- label space ---------------------------------------------------------

LabelSpace load_label_space(const fs::path& path);
void save_label_space(const fs::path& path, const LabelSpace& labels);

// ---- detections (JSON lines) ---------------------------------------------
// {"video": str, "frame": int, "box": [x, y, w, h], "category": str, "score": float}

using DetectionsByVideo = std::map<std::string, std::vector<Detection>>;

// Detections of each video sorted by frame. Errors carry the line number.
DetectionsByVideo load_detections(const fs::path& path, const LabelSpace& labels);
void save_detections(const fs::path& path, const DetectionsByVideo& dets,
                     const LabelSpace& labels);

// ---- keypoints (JSON lines) ----------------------------------------------
// {"video": str, "frame": int, "keypoints": [[x, y, v] x 17]}

using KeypointsByVideo = std::map<std::string, SkeletonFrames>;

KeypointsByVideo load_keypoints(const fs::path& path);
void save_keypoints(const fs::path& path, const KeypointsByVideo& keypoints);

// ---- feature grids (binary container) ------------------------------------

inline constexpr char kGridMagic[4] = {'H', 'O', 'I', 'G'};
inline constexpr std::uint32_t kGridVersion = 1;
inline constexpr std::size_t kGridHeaderBytes = 36;

struct GridHeader {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t first_frame = 0;
  std::uint32_t frame_count = 0;
  float frame_width = 0.0f;
  float frame_height = 0.0f;
};

// Appends frames in order; the frame count in the header is patched on close.
class FeatureGridWriter {
 public:
  FeatureGridWriter(const fs::path& path, GridHeader header);
  ~FeatureGridWriter();
  FeatureGridWriter(const FeatureGridWriter&) = delete;
  FeatureGridWriter& operator=(const FeatureGridWriter&) = delete;

  // `values` is one frame, channel-major, channels * height * width floats.
  void append(const std::vector<float>& values);
  void close();

 private:
  std::ofstream out_;
  GridHeader header_;
  bool closed_ = false;
};

// Random access by frame; only the requested frames are read.
class FeatureGridReader {
 public:
  explicit FeatureGridReader(const fs::path& path);

  const GridHeader& header() const { return header_; }
  Span frames() const;
  FeatureGrid read(int frame);
  std::vector<FeatureGrid> read(const Span& span);

 private:
  fs::path path_;
  std::ifstream in_;
  GridHeader header_;
};

std::vector<FeatureGrid> load_feature_grids(const fs::path& path, const Span& span);

// ---- embeddings (text) ---------------------------------------------------
// one line per token: token v1 v2 ... v_d

EmbeddingTable load_embeddings(const fs::path& path);
void save_embeddings(const fs::path& path, const EmbeddingTable& table);

// ---- annotations (VidOR-style JSON) --------------------------------------

struct AnnotatedTrajectory {
  int tid = 0;
  std::string category;
  Trajectory trajectory;
};

struct RelationInstance {
  int subject_tid = 0;
  int object_tid = 0;
  std::string predicate;
  int begin_fid = 0;  // inclusive
  int end_fid = 0;    // exclusive, as in VidOR
};

struct AnnotationRecord {
  std::string video_id;
  int frame_count = 0;
  double fps = 30.0;
  int width = 0;
  int height = 0;
  std::vector<AnnotatedTrajectory> trajectories;
  std::vector<RelationInstance> relations;

  const AnnotatedTrajectory& trajectory(int tid) const;
};

AnnotationRecord load_annotation(const fs::path& path);
void save_annotation(const fs::path& path, const AnnotationRecord& record);

// Ground-truth instances of a record: trajectories cropped to each relation span.
std::vector<HoiInstance> ground_truth_instances(const AnnotationRecord& record,
                                                const LabelSpace& labels);

// Annotated trajectories with label-space category ids.
std::vector<Trajectory> ground_truth_trajectories(const AnnotationRecord& record,
                                                  const LabelSpace& labels);

// ---- predictions (JSON lines) --------------------------------------------

void save_predictions(const fs::path& path, const std::vector<HoiInstance>& instances,
                      const LabelSpace& labels);
std::vector<HoiInstance> load_predictions(const fs::path& path, const LabelSpace& labels);

// ---- trajectories (JSON lines, output of `track`) ------------------------

void save_trajectories(const fs::path& path,
                       const std::map<std::string, std::vector<Trajectory>>& trajectories,
                       const LabelSpace& labels);

// ---- model checkpoint (binary) -------------------------------------------

inline constexpr char kModelMagic[4] = {'H', 'O', 'I', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_model(const fs::path& path, const InteractionModel& model);
InteractionModel load_model(const fs::path& path);

// ---- dataset manifest (JSON) ---------------------------------------------

struct VideoEntry {
  std::string id;
  int frame_count = 0;
  double fps = 30.0;
  fs::path detections;
  fs::path keypoints;
  fs::path features;
  fs::path annotations;  // empty when no ground truth
};

struct DatasetManifest {
  fs::path labels;
  fs::path embeddings;
  std::vector<VideoEntry> videos;
};

// Relative paths resolve against the manifest's directory. Referenced files
// must exist.
DatasetManifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const DatasetManifest& manifest);

// FNV-1a 64-bit.
std::uint64_t checksum(const void* data, std::size_t size);

}  // namespace hoi::io
