#include "hoi/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "hoi/errors.hpp"
#include "json.hpp"

namespace hoi::io {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order, which must be little-endian");

using json = nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

[[noreturn]] void fail_at(const fs::path& path, std::size_t line, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

// Calls fn(record, line_number) for every non-blank line parsed as JSON.
template <typename Fn>
void for_each_record(const fs::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_at(path, n, std::string("malformed record: ") + e.what());
    }
    try {
      fn(rec, n);
    } catch (const json::exception& e) {
      fail_at(path, n, std::string("bad record: ") + e.what());
    } catch (const DataError& e) {
      fail_at(path, n, e.what());
    }
  }
}

Box parse_box(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("box must be [x, y, w, h]");
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!b.valid()) throw DataError("box must have finite coordinates and positive size");
  return b;
}

json box_json(const Box& b) { return json::array({b.x, b.y, b.w, b.h}); }

json trajectory_json(const Trajectory& t, const LabelSpace& labels) {
  json boxes = json::array();
  for (const Box& b : t.boxes) boxes.push_back(box_json(b));
  return json{{"category", labels.objects.at(t.category)},
              {"score", t.score},
              {"begin", t.span.begin},
              {"boxes", std::move(boxes)}};
}

Trajectory parse_trajectory(const json& j, const LabelSpace& labels) {
  std::vector<Box> boxes;
  for (const auto& b : j.at("boxes")) boxes.push_back(parse_box(b));
  if (boxes.empty()) throw DataError("trajectory has no boxes");
  const int begin = j.at("begin").get<int>();
  const int end = begin + static_cast<int>(boxes.size()) - 1;
  return make_trajectory({begin, end}, std::move(boxes),
                         labels.object_index(j.at("category").get<std::string>()),
                         j.at("score").get<double>());
}

void write_json_file(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

// ---- label space ---------------------------------------------------------

LabelSpace load_label_space(const fs::path& path) {
  const json j = read_json_file(path);
  LabelSpace labels;
  try {
    labels.human = j.at("human").get<std::string>();
    labels.objects = j.at("objects").get<std::vector<std::string>>();
    labels.predicates = j.at("predicates").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  labels.validate();
  return labels;
}

void save_label_space(const fs::path& path, const LabelSpace& labels) {
  write_json_file(path, json{{"human", labels.human},
                             {"objects", labels.objects},
                             {"predicates", labels.predicates}});
}

// ---- detections ----------------------------------------------------------

DetectionsByVideo load_detections(const fs::path& path, const LabelSpace& labels) {
  DetectionsByVideo out;
  for_each_record(path, [&](const json& rec, std::size_t) {
    Detection d;
    d.frame = rec.at("frame").get<int>();
    if (d.frame < 0) throw DataError("frame must be >= 0");
    d.box = parse_box(rec.at("box"));
    d.category = labels.object_index(rec.at("category").get<std::string>());
    d.score = rec.at("score").get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw DataError("score " + std::to_string(d.score) + " outside [0, 1]");
    }
    out[rec.at("video").get<std::string>()].push_back(d);
  });
  for (auto& [video, list] : out) {
    std::stable_sort(list.begin(), list.end(),
                     [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
  }
  return out;
}

void save_detections(const fs::path& path, const DetectionsByVideo& dets,
                     const LabelSpace& labels) {
  auto out = open_out(path);
  for (const auto& [video, list] : dets) {
    for (const Detection& d : list) {
      out << json{{"video", video},
                  {"frame", d.frame},
                  {"box", box_json(d.box)},
                  {"category", labels.objects.at(d.category)},
                  {"score", d.score}}
                 .dump()
          << '\n';
    }
  }
}

// ---- keypoints -----------------------------------------------------------

KeypointsByVideo load_keypoints(const fs::path& path) {
  KeypointsByVideo out;
  for_each_record(path, [&](const json& rec, std::size_t) {
    const json& kps = rec.at("keypoints");
    if (!kps.is_array() || kps.size() != static_cast<std::size_t>(kNumJoints)) {
      throw DataError("expected " + std::to_string(kNumJoints) + " keypoints, got " +
                      std::to_string(kps.is_array() ? kps.size() : 0));
    }
    Skeleton sk;
    for (int i = 0; i < kNumJoints; ++i) {
      const json& k = kps[i];
      if (!k.is_array() || k.size() != 3) throw DataError("keypoint must be [x, y, visibility]");
      sk.joints[i] = {k[0].get<double>(), k[1].get<double>(), k[2].get<double>()};
      const double v = sk.joints[i].visibility;
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("keypoint visibility outside [0, 1]");
      if (!std::isfinite(sk.joints[i].x) || !std::isfinite(sk.joints[i].y)) {
        throw DataError("keypoint coordinates must be finite");
      }
    }
    const int frame = rec.at("frame").get<int>();
    if (frame < 0) throw DataError("frame must be >= 0");
    out[rec.at("video").get<std::string>()][frame].push_back(sk);
  });
  return out;
}

void save_keypoints(const fs::path& path, const KeypointsByVideo& keypoints) {
  auto out = open_out(path);
  for (const auto& [video, frames] : keypoints) {
    for (const auto& [frame, list] : frames) {
      for (const Skeleton& sk : list) {
        json kps = json::array();
        for (const auto& j : sk.joints) kps.push_back(json::array({j.x, j.y, j.visibility}));
        out << json{{"video", video}, {"frame", frame}, {"keypoints", std::move(kps)}}.dump()
            << '\n';
      }
    }
  }
}

// ---- feature grids -------------------------------------------------------

namespace {

void put_u32(char* dst, std::uint32_t v) { std::memcpy(dst, &v, 4); }
void put_f32(char* dst, float v) { std::memcpy(dst, &v, 4); }
std::uint32_t get_u32(const char* src) {
  std::uint32_t v;
  std::memcpy(&v, src, 4);
  return v;
}
float get_f32(const char* src) {
  float v;
  std::memcpy(&v, src, 4);
  return v;
}

void encode_header(char* buf, const GridHeader& h) {
  std::memcpy(buf, kGridMagic, 4);
  put_u32(buf + 4, kGridVersion);
  put_u32(buf + 8, h.channels);
  put_u32(buf + 12, h.height);
  put_u32(buf + 16, h.width);
  put_u32(buf + 20, h.first_frame);
  put_u32(buf + 24, h.frame_count);
  put_f32(buf + 28, h.frame_width);
  put_f32(buf + 32, h.frame_height);
}

std::size_t frame_floats(const GridHeader& h) {
  return static_cast<std::size_t>(h.channels) * h.height * h.width;
}

}  // namespace

FeatureGridWriter::FeatureGridWriter(const fs::path& path, GridHeader header)
    : header_(header) {
  if (header.channels == 0 || header.height == 0 || header.width == 0) {
    throw DataError("feature grid dimensions must be >= 1");
  }
  if (!(header.frame_width > 0.0f && header.frame_height > 0.0f)) {
    throw DataError("feature grid frame extent must be positive");
  }
  out_ = open_out(path, std::ios::binary | std::ios::out | std::ios::trunc);
  header_.frame_count = 0;
  char buf[kGridHeaderBytes];
  encode_header(buf, header_);
  out_.write(buf, kGridHeaderBytes);
}

FeatureGridWriter::~FeatureGridWriter() {
  try {
    close();
  } catch (...) {
  }
}

void FeatureGridWriter::append(const std::vector<float>& values) {
  if (closed_) throw DataError("feature grid writer already closed");
  if (values.size() != frame_floats(header_)) {
    throw DataError("feature grid frame has " + std::to_string(values.size()) +
                    " values, expected " + std::to_string(frame_floats(header_)));
  }
  out_.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  ++header_.frame_count;
}

void FeatureGridWriter::close() {
  if (closed_) return;
  closed_ = true;
  char buf[kGridHeaderBytes];
  encode_header(buf, header_);
  out_.seekp(0);
  out_.write(buf, kGridHeaderBytes);
  out_.close();
  if (!out_) throw DataError("failed writing feature grid file");
}

FeatureGridReader::FeatureGridReader(const fs::path& path) : path_(path) {
  in_ = open_in(path, std::ios::binary);
  char buf[kGridHeaderBytes];
  if (!in_.read(buf, kGridHeaderBytes)) {
    throw DataError(path.string() + ": truncated feature grid header");
  }
  if (std::memcmp(buf, kGridMagic, 4) != 0) {
    throw DataError(path.string() + ": not a feature grid file (bad magic)");
  }
  const std::uint32_t version = get_u32(buf + 4);
  if (version != kGridVersion) {
    throw DataError(path.string() + ": unsupported feature grid version " +
                    std::to_string(version));
  }
  header_.channels = get_u32(buf + 8);
  header_.height = get_u32(buf + 12);
  header_.width = get_u32(buf + 16);
  header_.first_frame = get_u32(buf + 20);
  header_.frame_count = get_u32(buf + 24);
  header_.frame_width = get_f32(buf + 28);
  header_.frame_height = get_f32(buf + 32);
  if (header_.channels == 0 || header_.height == 0 || header_.width == 0) {
    throw DataError(path.string() + ": feature grid dimensions must be >= 1");
  }
  const auto expected = kGridHeaderBytes +
                        frame_floats(header_) * sizeof(float) * header_.frame_count;
  if (fs::file_size(path) < expected) {
    throw DataError(path.string() + ": feature grid payload is truncated");
  }
}

Span FeatureGridReader::frames() const {
  const int first = static_cast<int>(header_.first_frame);
  return {first, first + static_cast<int>(header_.frame_count) - 1};
}

FeatureGrid FeatureGridReader::read(int frame) {
  const Span range = frames();
  if (header_.frame_count == 0 || !range.contains(frame)) {
    throw DataError(path_.string() + ": frame " + std::to_string(frame) +
                    " outside stored range");
  }
  FeatureGrid g;
  g.frame = frame;
  g.channels = static_cast<int>(header_.channels);
  g.height = static_cast<int>(header_.height);
  g.width = static_cast<int>(header_.width);
  g.frame_box = {0.0, 0.0, header_.frame_width, header_.frame_height};
  g.values.resize(frame_floats(header_));
  const auto bytes = g.values.size() * sizeof(float);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(kGridHeaderBytes +
                                        bytes * static_cast<std::size_t>(frame - range.begin)));
  if (!in_.read(reinterpret_cast<char*>(g.values.data()), static_cast<std::streamsize>(bytes))) {
    throw DataError(path_.string() + ": short read at frame " + std::to_string(frame));
  }
  return g;
}

std::vector<FeatureGrid> FeatureGridReader::read(const Span& span) {
  const Span range = frames();
  if (span.begin > span.end) return {};
  if (header_.frame_count == 0 || !range.contains(span)) {
    throw DataError(path_.string() + ": frames [" + std::to_string(span.begin) + ", " +
                    std::to_string(span.end) + "] outside stored range");
  }
  std::vector<FeatureGrid> out;
  out.reserve(span.length());
  for (int f = span.begin; f <= span.end; ++f) out.push_back(read(f));
  return out;
}

std::vector<FeatureGrid> load_feature_grids(const fs::path& path, const Span& span) {
  FeatureGridReader reader(path);
  return reader.read(span);
}

// ---- embeddings ----------------------------------------------------------

EmbeddingTable load_embeddings(const fs::path& path) {
  auto in = open_in(path);
  EmbeddingTable table;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (ss >> field) {
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
        fail_at(path, n, "bad embedding value '" + field + "'");
      }
      vec.push_back(v);
    }
    try {
      table.add(token, std::move(vec));
    } catch (const DataError& e) {
      fail_at(path, n, e.what());
    }
  }
  if (table.size() == 0) throw DataError(path.string() + ": embedding table is empty");
  return table;
}

void save_embeddings(const fs::path& path, const EmbeddingTable& table) {
  auto out = open_out(path);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& [token, vec] : table.entries()) {
    out << token;
    for (double v : vec) out << ' ' << v;
    out << '\n';
  }
}

// ---- annotations ---------------------------------------------------------

const AnnotatedTrajectory& AnnotationRecord::trajectory(int tid) const {
  for (const auto& t : trajectories) {
    if (t.tid == tid) return t;
  }
  throw DataError("video '" + video_id + "' has no trajectory with tid " + std::to_string(tid));
}

AnnotationRecord load_annotation(const fs::path& path) {
  const json j = read_json_file(path);
  AnnotationRecord rec;
  try {
    rec.video_id = j.at("video_id").get<std::string>();
    rec.frame_count = j.at("frame_count").get<int>();
    rec.fps = j.value("fps", 30.0);
    rec.width = j.value("width", 0);
    rec.height = j.value("height", 0);
    if (rec.frame_count < 1) throw DataError("frame_count must be >= 1");

    std::map<int, std::string> categories;
    for (const auto& so : j.at("subject/objects")) {
      const int tid = so.at("tid").get<int>();
      if (!categories.emplace(tid, so.at("category").get<std::string>()).second) {
        throw DataError("duplicate tid " + std::to_string(tid));
      }
    }
    std::map<int, std::map<int, Box>> boxes;
    const json& frames = j.at("trajectories");
    for (std::size_t f = 0; f < frames.size(); ++f) {
      for (const auto& entry : frames[f]) {
        const int tid = entry.at("tid").get<int>();
        if (!categories.count(tid)) throw DataError("box for unknown tid " + std::to_string(tid));
        const json& bb = entry.at("bbox");
        const double x0 = bb.at("xmin").get<double>();
        const double y0 = bb.at("ymin").get<double>();
        const Box b{x0, y0, bb.at("xmax").get<double>() - x0, bb.at("ymax").get<double>() - y0};
        if (!b.valid()) throw DataError("degenerate box for tid " + std::to_string(tid));
        boxes[tid][static_cast<int>(f)] = b;
      }
    }
    for (const auto& [tid, category] : categories) {
      const auto it = boxes.find(tid);
      if (it == boxes.end()) throw DataError("tid " + std::to_string(tid) + " has no boxes");
      const auto& per_frame = it->second;
      const int begin = per_frame.begin()->first;
      const int end = per_frame.rbegin()->first;
      if (end - begin + 1 != static_cast<int>(per_frame.size())) {
        throw DataError("trajectory of tid " + std::to_string(tid) + " is not contiguous");
      }
      std::vector<Box> seq;
      for (const auto& [f, b] : per_frame) seq.push_back(b);
      rec.trajectories.push_back({tid, category, make_trajectory({begin, end}, std::move(seq), 0)});
    }
    for (const auto& r : j.at("relation_instances")) {
      RelationInstance ri;
      ri.subject_tid = r.at("subject_tid").get<int>();
      ri.object_tid = r.at("object_tid").get<int>();
      ri.predicate = r.at("predicate").get<std::string>();
      ri.begin_fid = r.at("begin_fid").get<int>();
      ri.end_fid = r.at("end_fid").get<int>();
      const Span span{ri.begin_fid, ri.end_fid - 1};
      if (span.begin > span.end) throw DataError("empty relation span");
      if (!rec.trajectory(ri.subject_tid).trajectory.span.contains(span) ||
          !rec.trajectory(ri.object_tid).trajectory.span.contains(span)) {
        throw DataError("relation span [" + std::to_string(ri.begin_fid) + ", " +
                        std::to_string(ri.end_fid) + ") exceeds its trajectories");
      }
      rec.relations.push_back(std::move(ri));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return rec;
}

void save_annotation(const fs::path& path, const AnnotationRecord& record) {
  json so = json::array();
  std::vector<json> frames(record.frame_count, json::array());
  for (const auto& t : record.trajectories) {
    so.push_back({{"tid", t.tid}, {"category", t.category}});
    const Trajectory& tr = t.trajectory;
    for (int f = tr.span.begin; f <= tr.span.end; ++f) {
      if (f < 0 || f >= record.frame_count) throw DataError("trajectory frame outside the video");
      const Box& b = tr.box_at(f);
      frames[f].push_back({{"tid", t.tid},
                           {"bbox",
                            {{"xmin", b.x}, {"ymin", b.y}, {"xmax", b.right()},
                             {"ymax", b.bottom()}}}});
    }
  }
  json rel = json::array();
  for (const auto& r : record.relations) {
    rel.push_back({{"subject_tid", r.subject_tid},
                   {"object_tid", r.object_tid},
                   {"predicate", r.predicate},
                   {"begin_fid", r.begin_fid},
                   {"end_fid", r.end_fid}});
  }
  write_json_file(path, json{{"video_id", record.video_id},
                             {"frame_count", record.frame_count},
                             {"fps", record.fps},
                             {"width", record.width},
                             {"height", record.height},
                             {"subject/objects", std::move(so)},
                             {"trajectories", frames},
                             {"relation_instances", std::move(rel)}});
}

std::vector<Trajectory> ground_truth_trajectories(const AnnotationRecord& record,
                                                  const LabelSpace& labels) {
  std::vector<Trajectory> out;
  for (const auto& t : record.trajectories) {
    Trajectory tr = t.trajectory;
    tr.category = labels.object_index(t.category);
    tr.score = 1.0;
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<HoiInstance> ground_truth_instances(const AnnotationRecord& record,
                                                const LabelSpace& labels) {
  std::vector<HoiInstance> out;
  for (const auto& r : record.relations) {
    const auto& subj = record.trajectory(r.subject_tid);
    const auto& obj = record.trajectory(r.object_tid);
    if (subj.category != labels.human) {
      throw DataError("video '" + record.video_id + "': subject tid " +
                      std::to_string(r.subject_tid) + " is not a " + labels.human);
    }
    HoiInstance inst;
    inst.video = record.video_id;
    inst.predicate = labels.predicate_index(r.predicate);
    inst.object_category = labels.object_index(obj.category);
    inst.span = {r.begin_fid, r.end_fid - 1};
    inst.subject = subj.trajectory.crop(inst.span);
    inst.subject.category = labels.human_index();
    inst.object = obj.trajectory.crop(inst.span);
    inst.object.category = inst.object_category;
    inst.score = 1.0;
    out.push_back(std::move(inst));
  }
  return out;
}

// ---- predictions ---------------------------------------------------------

void save_predictions(const fs::path& path, const std::vector<HoiInstance>& instances,
                      const LabelSpace& labels) {
  auto out = open_out(path);
  for (const auto& inst : instances) {
    out << json{{"video", inst.video},
                {"predicate", labels.predicates.at(inst.predicate)},
                {"object", labels.objects.at(inst.object_category)},
                {"score", inst.score},
                {"begin", inst.span.begin},
                {"end", inst.span.end},
                {"subject_trajectory", trajectory_json(inst.subject, labels)},
                {"object_trajectory", trajectory_json(inst.object, labels)}}
               .dump()
        << '\n';
  }
}

std::vector<HoiInstance> load_predictions(const fs::path& path, const LabelSpace& labels) {
  std::vector<HoiInstance> out;
  for_each_record(path, [&](const json& rec, std::size_t) {
    HoiInstance inst;
    inst.video = rec.at("video").get<std::string>();
    inst.predicate = labels.predicate_index(rec.at("predicate").get<std::string>());
    inst.object_category = labels.object_index(rec.at("object").get<std::string>());
    inst.score = rec.at("score").get<double>();
    inst.span = {rec.at("begin").get<int>(), rec.at("end").get<int>()};
    if (inst.span.begin > inst.span.end) throw DataError("instance span is empty");
    inst.subject = parse_trajectory(rec.at("subject_trajectory"), labels);
    inst.object = parse_trajectory(rec.at("object_trajectory"), labels);
    if (!(inst.subject.span == inst.span) || !(inst.object.span == inst.span)) {
      throw DataError("trajectory box count does not match the instance span");
    }
    out.push_back(std::move(inst));
  });
  return out;
}

void save_trajectories(const fs::path& path,
                       const std::map<std::string, std::vector<Trajectory>>& trajectories,
                       const LabelSpace& labels) {
  auto out = open_out(path);
  for (const auto& [video, list] : trajectories) {
    for (const auto& t : list) {
      json j = trajectory_json(t, labels);
      j["video"] = video;
      out << j.dump() << '\n';
    }
  }
}

// ---- model checkpoint ----------------------------------------------------

std::uint64_t checksum(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 14695981039346656037ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

const char* kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::kBehavior: return "behavior";
    case FeatureKind::kMotion: return "motion";
    case FeatureKind::kSemantic: return "semantic";
  }
  return "?";
}

FeatureKind kind_from(const std::string& s) {
  if (s == "behavior") return FeatureKind::kBehavior;
  if (s == "motion") return FeatureKind::kMotion;
  if (s == "semantic") return FeatureKind::kSemantic;
  throw DataError("unknown feature kind '" + s + "'");
}

json config_json(const RecognitionConfig& c) {
  return json{{"hidden", c.hidden},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"score_threshold", c.score_threshold},
              {"top_k", c.top_k},
              {"score_with_confidence", c.score_with_confidence},
              {"use_behavior", c.use_behavior},
              {"use_mask", c.use_mask},
              {"late_fusion", c.late_fusion},
              {"factorized", c.factorized}};
}

RecognitionConfig config_from(const json& j) {
  RecognitionConfig c;
  c.hidden = j.at("hidden").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.score_threshold = j.at("score_threshold").get<double>();
  c.top_k = j.at("top_k").get<int>();
  c.score_with_confidence = j.at("score_with_confidence").get<bool>();
  c.use_behavior = j.at("use_behavior").get<bool>();
  c.use_mask = j.at("use_mask").get<bool>();
  c.late_fusion = j.at("late_fusion").get<bool>();
  c.factorized = j.at("factorized").get<bool>();
  return c;
}

void append_doubles(std::string& buf, const double* data, Eigen::Index n) {
  buf.append(reinterpret_cast<const char*>(data), static_cast<std::size_t>(n) * sizeof(double));
}

class ByteCursor {
 public:
  ByteCursor(const std::string& buf, std::size_t pos, std::size_t end)
      : buf_(buf), pos_(pos), end_(end) {}
  void doubles(double* dst, Eigen::Index n) {
    const std::size_t bytes = static_cast<std::size_t>(n) * sizeof(double);
    if (pos_ + bytes > end_) throw DataError("model checkpoint payload is truncated");
    std::memcpy(dst, buf_.data() + pos_, bytes);
    pos_ += bytes;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_;
  std::size_t end_;
};

}  // namespace

void save_model(const fs::path& path, const InteractionModel& model) {
  json header;
  header["labels"] = {{"human", model.labels.human},
                      {"objects", model.labels.objects},
                      {"predicates", model.labels.predicates}};
  header["mask"] = model.mask.rows;
  header["config"] = config_json(model.config);
  json branches = json::array();
  for (const Branch& b : model.branches) {
    json inputs = json::array();
    for (FeatureKind k : b.inputs) inputs.push_back(kind_name(k));
    branches.push_back({{"inputs", inputs},
                        {"input_size", b.mlp.input_size()},
                        {"hidden", b.mlp.w1.rows()},
                        {"output_size", b.mlp.output_size()}});
  }
  header["branches"] = branches;
  const std::string text = header.dump();

  std::string buf;
  buf.append(kModelMagic, 4);
  const std::uint32_t version = kModelVersion;
  buf.append(reinterpret_cast<const char*>(&version), 4);
  const std::uint64_t len = text.size();
  buf.append(reinterpret_cast<const char*>(&len), 8);
  buf += text;
  for (const Branch& b : model.branches) {
    append_doubles(buf, b.mean.data(), b.mean.size());
    append_doubles(buf, b.inv_std.data(), b.inv_std.size());
    append_doubles(buf, b.mlp.w1.data(), b.mlp.w1.size());
    append_doubles(buf, b.mlp.b1.data(), b.mlp.b1.size());
    append_doubles(buf, b.mlp.w2.data(), b.mlp.w2.size());
    append_doubles(buf, b.mlp.b2.data(), b.mlp.b2.size());
  }
  const std::uint64_t sum = checksum(buf.data(), buf.size());
  buf.append(reinterpret_cast<const char*>(&sum), 8);

  auto out = open_out(path, std::ios::binary | std::ios::out | std::ios::trunc);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("failed writing model checkpoint '" + path.string() + "'");
}

InteractionModel load_model(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (buf.size() < 24 || std::memcmp(buf.data(), kModelMagic, 4) != 0) {
    throw DataError(where + "not a model checkpoint");
  }
  std::uint32_t version;
  std::memcpy(&version, buf.data() + 4, 4);
  if (version != kModelVersion) {
    throw DataError(where + "unsupported model checkpoint version " + std::to_string(version));
  }
  const std::size_t body_end = buf.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body_end, 8);
  if (stored != checksum(buf.data(), body_end)) {
    throw DataError(where + "model checkpoint checksum mismatch");
  }
  std::uint64_t len;
  std::memcpy(&len, buf.data() + 8, 8);
  if (16 + len > body_end) throw DataError(where + "model checkpoint header is truncated");

  InteractionModel model;
  try {
    const json header = json::parse(buf.substr(16, len));
    const json& lj = header.at("labels");
    model.labels.human = lj.at("human").get<std::string>();
    model.labels.objects = lj.at("objects").get<std::vector<std::string>>();
    model.labels.predicates = lj.at("predicates").get<std::vector<std::string>>();
    model.labels.validate();
    model.mask.rows = header.at("mask").get<std::vector<std::vector<std::uint8_t>>>();
    model.mask.num_predicates = model.labels.num_predicates();
    if (static_cast<int>(model.mask.rows.size()) != model.labels.num_objects()) {
      throw DataError("mask has " + std::to_string(model.mask.rows.size()) +
                      " rows, expected one per object category (" +
                      std::to_string(model.labels.num_objects()) + ")");
    }
    for (const auto& row : model.mask.rows) {
      if (static_cast<int>(row.size()) != model.labels.num_predicates()) {
        throw DataError("mask row length differs from the predicate count");
      }
      for (auto v : row) {
        if (v > 1) throw DataError("mask entries must be 0 or 1");
      }
    }
    model.config = config_from(header.at("config"));
    ByteCursor cur(buf, 16 + len, body_end);
    for (const auto& bj : header.at("branches")) {
      Branch b;
      for (const auto& k : bj.at("inputs")) b.inputs.push_back(kind_from(k.get<std::string>()));
      const auto in = bj.at("input_size").get<Eigen::Index>();
      const auto hid = bj.at("hidden").get<Eigen::Index>();
      const auto outn = bj.at("output_size").get<Eigen::Index>();
      if (outn != model.output_size()) throw DataError("branch output size mismatch");
      b.mean.resize(in);
      b.inv_std.resize(in);
      b.mlp.w1.resize(hid, in);
      b.mlp.b1.resize(hid);
      b.mlp.w2.resize(outn, hid);
      b.mlp.b2.resize(outn);
      cur.doubles(b.mean.data(), in);
      cur.doubles(b.inv_std.data(), in);
      cur.doubles(b.mlp.w1.data(), b.mlp.w1.size());
      cur.doubles(b.mlp.b1.data(), hid);
      cur.doubles(b.mlp.w2.data(), b.mlp.w2.size());
      cur.doubles(b.mlp.b2.data(), outn);
      model.branches.push_back(std::move(b));
    }
    if (cur.pos() != body_end) throw DataError("trailing bytes after model parameters");
  } catch (const json::exception& e) {
    throw DataError(where + e.what());
  } catch (const DataError& e) {
    throw DataError(where + e.what());
  }
  return model;
}

// ---- manifest ------------------------------------------------------------

DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_json_file(path);
  const fs::path base = path.parent_path();
  const auto resolve = [&](const json& obj, const char* key, bool required) -> fs::path {
    if (!obj.contains(key) || obj.at(key).get<std::string>().empty()) {
      if (required) throw DataError(path.string() + ": missing '" + key + "'");
      return {};
    }
    fs::path p = obj.at(key).get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) {
      throw DataError(path.string() + ": referenced file '" + p.string() + "' does not exist");
    }
    return p;
  };
  DatasetManifest m;
  try {
    m.labels = resolve(j, "labels", true);
    m.embeddings = resolve(j, "embeddings", false);
    std::set<std::string> ids;
    for (const auto& v : j.at("videos")) {
      VideoEntry e;
      e.id = v.at("id").get<std::string>();
      if (!ids.insert(e.id).second) throw DataError("duplicate video id '" + e.id + "'");
      e.frame_count = v.at("frame_count").get<int>();
      if (e.frame_count < 1) throw DataError("video '" + e.id + "' has frame_count < 1");
      e.fps = v.value("fps", 30.0);
      e.detections = resolve(v, "detections", false);
      e.keypoints = resolve(v, "keypoints", false);
      e.features = resolve(v, "features", false);
      e.annotations = resolve(v, "annotations", false);
      m.videos.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const auto str = [](const fs::path& p) { return p.generic_string(); };
  json videos = json::array();
  for (const auto& v : manifest.videos) {
    videos.push_back({{"id", v.id},
                      {"frame_count", v.frame_count},
                      {"fps", v.fps},
                      {"detections", str(v.detections)},
                      {"keypoints", str(v.keypoints)},
                      {"features", str(v.features)},
                      {"annotations", str(v.annotations)}});
  }
  write_json_file(path, json{{"labels", str(manifest.labels)},
                             {"embeddings", str(manifest.embeddings)},
                             {"videos", std::move(videos)}});
}

}  // namespace hoi::io
