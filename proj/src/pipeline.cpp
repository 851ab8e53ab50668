#include "hoi/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "hoi/errors.hpp"
#include "json.hpp"

namespace hoi {

using json = nlohmann::ordered_json;

// ---- configuration -------------------------------------------------------

void PairingConfig::validate() const {
  if (segment_len < 2) throw ValidationError("pairing.segment_len must be >= 2");
}

void RuntimeConfig::validate() const {
  if (workers < 0) throw ValidationError("runtime.workers must be >= 0");
}

void PipelineConfig::validate() const {
  tracklets.validate();
  pairing.validate();
  features.validate();
  recognition.validate();
  evaluation.validate();
  runtime.validate();
}

namespace {

json to_json(const PipelineConfig& c) {
  json j;
  j["tracklets"] = {{"segment_len", c.tracklets.segment_len},
                    {"segment_stride", c.tracklets.segment_stride},
                    {"beta", c.tracklets.beta},
                    {"merge_threshold", c.tracklets.merge_threshold}};
  j["pairing"] = {{"segment_len", c.pairing.segment_len}};
  j["features"] = {{"part_ratio", c.features.part_ratio},
                   {"min_visibility", c.features.min_visibility},
                   {"roi_size", c.features.roi_size}};
  const RecognitionConfig& r = c.recognition;
  j["recognition"] = {{"hidden", r.hidden},
                      {"learning_rate", r.learning_rate},
                      {"epochs", r.epochs},
                      {"batch_size", r.batch_size},
                      {"seed", r.seed},
                      {"score_threshold", r.score_threshold},
                      {"top_k", r.top_k},
                      {"score_with_confidence", r.score_with_confidence},
                      {"use_behavior", r.use_behavior},
                      {"use_mask", r.use_mask},
                      {"late_fusion", r.late_fusion},
                      {"factorized", r.factorized}};
  j["evaluation"] = {{"viou_threshold", c.evaluation.viou_threshold},
                     {"recall_k", c.evaluation.recall_k},
                     {"precision_n", c.evaluation.precision_n}};
  j["runtime"] = {{"workers", c.runtime.workers}};
  return j;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_boolean() || b.is_boolean()) return a.is_boolean() && b.is_boolean();
  if (a.is_number() || b.is_number()) return a.is_number() && b.is_number();
  return a.type() == b.type();
}

template <typename T>
T field(const json& j, const char* section, const char* key) {
  const json& v = j.at(section).at(key);
  const std::string name = std::string(section) + "." + key;
  if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer()) throw ValidationError(name + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
        throw ValidationError(name + " must be non-negative");
      }
    }
  }
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(name + " has the wrong type");
  }
}

PipelineConfig from_json(const json& user) {
  json merged = to_json(PipelineConfig{});
  if (!user.is_object()) throw ValidationError("configuration must be a JSON object");
  for (const auto& [section, body] : user.items()) {
    if (!merged.contains(section)) throw ValidationError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ValidationError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      if (!merged[section].contains(key)) throw ValidationError("unknown config key '" + name + "'");
      if (!same_kind(merged[section][key], value)) {
        throw ValidationError(name + " has the wrong type");
      }
      merged[section][key] = value;
    }
  }
  PipelineConfig c;
  c.tracklets.segment_len = field<int>(merged, "tracklets", "segment_len");
  c.tracklets.segment_stride = field<int>(merged, "tracklets", "segment_stride");
  c.tracklets.beta = field<double>(merged, "tracklets", "beta");
  c.tracklets.merge_threshold = field<double>(merged, "tracklets", "merge_threshold");
  c.pairing.segment_len = field<int>(merged, "pairing", "segment_len");
  c.features.part_ratio = field<double>(merged, "features", "part_ratio");
  c.features.min_visibility = field<double>(merged, "features", "min_visibility");
  c.features.roi_size = field<int>(merged, "features", "roi_size");
  RecognitionConfig& r = c.recognition;
  r.hidden = field<int>(merged, "recognition", "hidden");
  r.learning_rate = field<double>(merged, "recognition", "learning_rate");
  r.epochs = field<int>(merged, "recognition", "epochs");
  r.batch_size = field<int>(merged, "recognition", "batch_size");
  r.seed = field<std::uint64_t>(merged, "recognition", "seed");
  r.score_threshold = field<double>(merged, "recognition", "score_threshold");
  r.top_k = field<int>(merged, "recognition", "top_k");
  r.score_with_confidence = field<bool>(merged, "recognition", "score_with_confidence");
  r.use_behavior = field<bool>(merged, "recognition", "use_behavior");
  r.use_mask = field<bool>(merged, "recognition", "use_mask");
  r.late_fusion = field<bool>(merged, "recognition", "late_fusion");
  r.factorized = field<bool>(merged, "recognition", "factorized");
  c.evaluation.viou_threshold = field<double>(merged, "evaluation", "viou_threshold");
  c.evaluation.recall_k = field<std::vector<int>>(merged, "evaluation", "recall_k");
  c.evaluation.precision_n = field<std::vector<int>>(merged, "evaluation", "precision_n");
  c.runtime.workers = field<int>(merged, "runtime", "workers");
  c.validate();
  return c;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("configuration is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ValidationError("override '" + assignment + "' must look like section.key=value");
  }
  const std::string section = assignment.substr(0, dot);
  const std::string key = assignment.substr(dot + 1, eq - dot - 1);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json j = to_json(cfg);
  if (!j.contains(section)) throw ValidationError("unknown config section '" + section + "'");
  json user = j;
  user[section][key] = value;
  if (!j[section].contains(key)) {
    throw ValidationError("unknown config key '" + section + "." + key + "'");
  }
  cfg = from_json(user);
}

std::string dump_config(const PipelineConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

int resolve_workers(const RuntimeConfig& cfg) {
  int n = cfg.workers;
  if (const char* env = std::getenv("HOI_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0) throw ValidationError("HOI_WORKERS must be a non-negative integer");
    n = static_cast<int>(v);
  }
  if (n == 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return std::max(n, 1);
}

// ---- worker pool ---------------------------------------------------------

namespace {

// Runs fn(i) for i in [0, count) on up to `workers` threads. The exception of
// the lowest failing index is rethrown, so failures are deterministic too.
template <typename Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(workers));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Manifest entries ordered by video id.
std::vector<const io::VideoEntry*> videos_by_id(const Dataset& data) {
  std::vector<const io::VideoEntry*> out;
  for (const auto& v : data.manifest.videos) out.push_back(&v);
  std::sort(out.begin(), out.end(),
            [](const io::VideoEntry* a, const io::VideoEntry* b) { return a->id < b->id; });
  return out;
}

}  // namespace

// ---- datasets ------------------------------------------------------------

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  Dataset d;
  d.root = manifest_path.parent_path();
  d.manifest = io::load_manifest(manifest_path);
  d.labels = io::load_label_space(d.manifest.labels);
  if (!d.manifest.embeddings.empty()) d.embeddings = io::load_embeddings(d.manifest.embeddings);
  return d;
}

VideoData load_video(const io::VideoEntry& entry, const LabelSpace& labels) {
  VideoData v;
  v.entry = entry;
  if (!entry.detections.empty()) {
    auto all = io::load_detections(entry.detections, labels);
    if (auto it = all.find(entry.id); it != all.end()) v.detections = std::move(it->second);
  }
  if (!entry.keypoints.empty()) {
    auto all = io::load_keypoints(entry.keypoints);
    if (auto it = all.find(entry.id); it != all.end()) v.keypoints = std::move(it->second);
  }
  if (!entry.annotations.empty()) {
    v.truth = io::load_annotation(entry.annotations);
    if (v.truth->video_id != entry.id) {
      throw DataError(entry.annotations.string() + ": annotation is for video '" +
                      v.truth->video_id + "', manifest says '" + entry.id + "'");
    }
  }
  return v;
}

VideoInstances dataset_ground_truth(const Dataset& data) {
  VideoInstances out;
  for (const auto& e : data.manifest.videos) {
    if (e.annotations.empty()) continue;
    out[e.id] = io::ground_truth_instances(io::load_annotation(e.annotations), data.labels);
  }
  return out;
}

// ---- per-video stages ----------------------------------------------------

VideoFeatures extract_features(const std::vector<Trajectory>& trajectories,
                               const VideoData& video, const Dataset& data,
                               const PipelineConfig& cfg, bool with_behavior) {
  if (!data.embeddings) throw DataError("the manifest names no embeddings file");
  const int human = data.labels.human_index();
  VideoFeatures out;
  out.pairs = co_occurrent_pairs(trajectories, human);
  for (std::size_t i = 0; i < out.pairs.size(); ++i) {
    if (out.pairs[i].span.length() < 2) continue;
    auto segs = split_candidate_segments(out.pairs[i], i, trajectories, cfg.pairing.segment_len);
    for (auto& s : segs) out.segments.push_back(std::move(s));
  }
  if (out.segments.empty()) return out;

  std::vector<SkeletonTrajectory> skeletons;
  std::map<std::size_t, const SkeletonTrajectory*> skeleton_of;
  std::optional<io::FeatureGridReader> reader;
  if (with_behavior) {
    if (video.entry.features.empty()) {
      throw DataError("video '" + video.entry.id + "' has no feature grid file");
    }
    reader.emplace(video.entry.features);
    skeletons = assign_skeletons(video.keypoints, trajectories, human, cfg.features.min_visibility);
    for (const auto& st : skeletons) skeleton_of[st.host] = &st;
  }

  // The behavior descriptor depends only on the human track and the window, so
  // pairs sharing a human reuse it.
  std::map<std::tuple<std::size_t, int, int>, std::vector<double>> behavior_cache;
  std::map<std::pair<int, int>, std::vector<FeatureGrid>> grid_cache;
  const auto& table = *data.embeddings;
  out.bundles.reserve(out.segments.size());
  for (const CandidateSegment& seg : out.segments) {
    const CandidatePair& pair = out.pairs[seg.pair];
    FeatureBundle b;
    if (with_behavior) {
      const std::tuple<std::size_t, int, int> key{pair.human, seg.span.begin, seg.span.end};
      auto it = behavior_cache.find(key);
      if (it == behavior_cache.end()) {
        auto& grids = grid_cache[{seg.span.begin, seg.span.end}];
        if (grids.empty()) grids = reader->read(seg.span);
        const auto sk = skeleton_of.find(pair.human);
        it = behavior_cache
                 .emplace(key, behavior_descriptor(seg, sk == skeleton_of.end() ? nullptr : sk->second,
                                                   grids, cfg.features))
                 .first;
      }
      b.behavior = it->second;
    }
    b.motion = motion_feature(seg);
    b.semantic = semantic_feature(data.labels.objects.at(trajectories[pair.human].category),
                                  data.labels.objects.at(trajectories[pair.object].category), table);
    out.bundles.push_back(std::move(b));
  }
  return out;
}

std::vector<TrainingSample> training_samples(const VideoData& video, const Dataset& data,
                                             const PipelineConfig& cfg, bool with_behavior) {
  if (!video.truth) return {};
  const io::AnnotationRecord& rec = *video.truth;
  const auto trajectories = io::ground_truth_trajectories(rec, data.labels);
  VideoFeatures vf = extract_features(trajectories, video, data, cfg, with_behavior);

  const int np = data.labels.num_predicates();
  std::vector<TrainingSample> out;
  out.reserve(vf.segments.size());
  for (std::size_t i = 0; i < vf.segments.size(); ++i) {
    const CandidateSegment& seg = vf.segments[i];
    const CandidatePair& pair = vf.pairs[seg.pair];
    const int subject_tid = rec.trajectories[pair.human].tid;
    const int object_tid = rec.trajectories[pair.object].tid;
    TrainingSample s;
    s.features = std::move(vf.bundles[i]);
    s.object = trajectories[pair.object].category;
    s.targets.assign(np, 0);
    for (const auto& r : rec.relations) {
      if (r.subject_tid != subject_tid || r.object_tid != object_tid) continue;
      const auto overlap = intersect(seg.span, Span{r.begin_fid, r.end_fid - 1});
      if (overlap && 2 * overlap->length() >= seg.span.length()) {
        s.targets[data.labels.predicate_index(r.predicate)] = 1;
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<HoiInstance> detect_video(const VideoData& video, const Dataset& data,
                                      const InteractionModel& model, const PipelineConfig& cfg,
                                      bool gt_trajectories) {
  std::vector<Trajectory> trajectories;
  if (gt_trajectories) {
    if (!video.truth) {
      throw DataError("video '" + video.entry.id + "' has no annotations for ground-truth trajectories");
    }
    trajectories = io::ground_truth_trajectories(*video.truth, data.labels);
  } else {
    trajectories = detect_trajectories(video.detections, video.entry.frame_count, cfg.tracklets);
  }
  const bool with_behavior = std::any_of(model.branches.begin(), model.branches.end(), [](const Branch& b) {
    return std::find(b.inputs.begin(), b.inputs.end(), FeatureKind::kBehavior) != b.inputs.end();
  });
  const VideoFeatures vf = extract_features(trajectories, video, data, cfg, with_behavior);

  const int np = model.labels.num_predicates();
  std::vector<ScoredSegment> scored;
  for (std::size_t i = 0; i < vf.segments.size(); ++i) {
    const CandidateSegment& seg = vf.segments[i];
    const int object = trajectories[vf.pairs[seg.pair].object].category;
    const BranchScores bs = predict_segment(vf.bundles[i], object, model);
    const std::vector<double> fused = fuse_scores(bs.per_branch);
    if (model.config.factorized) {
      scored.push_back({seg.pair, seg.span, object, fused});
      continue;
    }
    for (int o = 0; o < model.labels.num_objects(); ++o) {
      std::vector<double> slice(fused.begin() + o * np, fused.begin() + (o + 1) * np);
      if (std::all_of(slice.begin(), slice.end(), [](double v) { return v == 0.0; })) continue;
      scored.push_back({seg.pair, seg.span, o, std::move(slice)});
    }
  }
  RecognitionConfig rc = model.config;
  rc.score_threshold = cfg.recognition.score_threshold;
  rc.top_k = cfg.recognition.top_k;
  rc.score_with_confidence = cfg.recognition.score_with_confidence;
  auto instances = associate_instances(scored, vf.pairs, trajectories, rc);
  for (auto& inst : instances) inst.video = video.entry.id;
  return instances;
}

// ---- commands ------------------------------------------------------------

TrackReport run_track(const Dataset& data, const PipelineConfig& cfg) {
  cfg.validate();
  const auto videos = videos_by_id(data);
  std::vector<std::vector<Trajectory>> results(videos.size());
  std::vector<VideoData> loaded(videos.size());
  parallel_for(videos.size(), resolve_workers(cfg.runtime),
               [&](std::size_t i) { loaded[i] = load_video(*videos[i], data.labels); });

  TrackReport report;
  const auto start = std::chrono::steady_clock::now();
  parallel_for(videos.size(), resolve_workers(cfg.runtime), [&](std::size_t i) {
    results[i] = detect_trajectories(loaded[i].detections, loaded[i].entry.frame_count, cfg.tracklets);
  });
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  bool annotated = !videos.empty();
  std::map<std::string, std::vector<Trajectory>> truth;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    report.frames += static_cast<std::size_t>(videos[i]->frame_count);
    report.trajectories[videos[i]->id] = std::move(results[i]);
    if (loaded[i].truth) {
      truth[videos[i]->id] = io::ground_truth_trajectories(*loaded[i].truth, data.labels);
    } else {
      annotated = false;
    }
  }
  report.fps = report.seconds > 0.0 ? static_cast<double>(report.frames) / report.seconds : 0.0;
  if (annotated) report.detection_map = frame_detection_map(report.trajectories, truth);
  return report;
}

TrainResult run_train(const Dataset& data, const PipelineConfig& cfg) {
  cfg.validate();
  if (!data.embeddings) throw DataError("training needs an embeddings file in the manifest");
  const auto videos = videos_by_id(data);
  std::vector<std::vector<TrainingSample>> per_video(videos.size());
  parallel_for(videos.size(), resolve_workers(cfg.runtime), [&](std::size_t i) {
    const VideoData v = load_video(*videos[i], data.labels);
    per_video[i] = training_samples(v, data, cfg, cfg.recognition.use_behavior);
  });
  std::vector<TrainingSample> samples;
  bool any_positive = false;
  for (auto& list : per_video) {
    for (auto& s : list) {
      any_positive = any_positive || std::any_of(s.targets.begin(), s.targets.end(),
                                                 [](std::uint8_t t) { return t != 0; });
      samples.push_back(std::move(s));
    }
  }
  if (!any_positive) throw DataError("no annotated interaction instances to train on");
  return train(samples, data.labels, cfg.recognition);
}

std::vector<HoiInstance> run_detect(const Dataset& data, const InteractionModel& model,
                                    const PipelineConfig& cfg, bool gt_trajectories) {
  cfg.validate();
  if (!(model.labels == data.labels)) {
    throw DataError("the model's label space differs from the manifest's label space");
  }
  const auto videos = videos_by_id(data);
  std::vector<std::vector<HoiInstance>> per_video(videos.size());
  parallel_for(videos.size(), resolve_workers(cfg.runtime), [&](std::size_t i) {
    const VideoData v = load_video(*videos[i], data.labels);
    per_video[i] = detect_video(v, data, model, cfg, gt_trajectories);
  });
  std::vector<HoiInstance> out;
  for (auto& list : per_video) {
    for (auto& inst : list) out.push_back(std::move(inst));
  }
  return out;
}

Metrics run_evaluate(const std::vector<HoiInstance>& predictions, const VideoInstances& truth,
                     const LabelSpace& labels, const PipelineConfig& cfg) {
  cfg.validate();
  VideoInstances preds;
  std::set<std::string> orphans;
  for (const auto& p : predictions) {
    if (!truth.count(p.video)) orphans.insert(p.video);
    preds[p.video].push_back(p);
  }
  if (!orphans.empty()) {
    std::string list;
    for (const auto& o : orphans) list += (list.empty() ? "" : ", ") + o;
    throw DataError("predictions for videos without ground truth: " + list);
  }
  return evaluate(preds, truth, labels, cfg.evaluation);
}

std::map<std::string, std::vector<Tag>> run_tag(const std::vector<HoiInstance>& predictions,
                                                const LabelSpace& labels, int top_n) {
  if (top_n < 1) throw ValidationError("tag count must be >= 1");
  VideoInstances by_video;
  for (const auto& p : predictions) by_video[p.video].push_back(p);
  std::map<std::string, std::vector<Tag>> out;
  for (const auto& [video, list] : by_video) {
    auto tags = video_tags(list, labels);
    if (tags.size() > static_cast<std::size_t>(top_n)) tags.resize(top_n);
    out[video] = std::move(tags);
  }
  return out;
}

std::vector<std::pair<std::string, double>> report_rows(const Metrics& m) {
  std::vector<std::pair<std::string, double>> rows;
  rows.emplace_back("class_mAP", m.class_map);
  rows.emplace_back("video_mAP", m.video_map);
  for (const auto& [k, v] : m.recall) rows.emplace_back("R@" + std::to_string(k), v);
  for (const auto& [n, v] : m.precision) rows.emplace_back("P@" + std::to_string(n), v);
  return rows;
}

std::string format_report(const Metrics& m) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  for (const auto& [key, value] : report_rows(m)) out << key << ' ' << value << '\n';
  return out.str();
}

std::string report_json(const Metrics& m) {
  json j = json::object();
  for (const auto& [key, value] : report_rows(m)) j[key] = value;
  return j.dump(2) + "\n";
}

std::string per_class_csv(const Metrics& m, const LabelSpace& labels) {
  std::ostringstream out;
  out << "predicate,object,ap,num_gt,num_pred\n" << std::setprecision(17);
  for (const auto& [label, stats] : m.per_class) {
    out << labels.predicates.at(label.predicate) << ',' << labels.objects.at(label.object) << ','
        << stats.ap << ',' << stats.num_gt << ',' << stats.num_pred << '\n';
  }
  return out.str();
}

}  // namespace hoi
