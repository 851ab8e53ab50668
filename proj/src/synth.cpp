#include "hoi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "hoi/errors.hpp"

namespace hoi::synth {

namespace {

constexpr double kSlotWidth = 160.0;
constexpr double kSlotHeight = 180.0;
constexpr double kHumanX = 63.0;  // human centre inside its slot
constexpr double kHumanY = 93.0;
constexpr double kRestDx = 45.0;
constexpr double kRestDy = 18.0;
constexpr int kTransition = 20;  // frames to move between the rest pose and the first/last interaction

// Joint positions as fractions of the human box, COCO order.
constexpr std::array<std::array<double, 2>, kNumJoints> kTemplate = {{
    {0.50, 0.08}, {0.56, 0.06}, {0.44, 0.06}, {0.64, 0.08}, {0.36, 0.08},
    {0.75, 0.22}, {0.25, 0.22}, {0.85, 0.37}, {0.15, 0.37}, {0.90, 0.50},
    {0.10, 0.50}, {0.65, 0.55}, {0.35, 0.55}, {0.65, 0.75}, {0.35, 0.75},
    {0.65, 0.95}, {0.35, 0.95},
}};

int find_predicate(const Vocabulary& vocab, const std::string& name) {
  for (std::size_t i = 0; i < vocab.predicates.size(); ++i) {
    if (vocab.predicates[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

bool compatible(const PredicateKind& p, const std::string& object) {
  return std::find(p.objects.begin(), p.objects.end(), object) != p.objects.end();
}

std::set<int> predicates_for(const Vocabulary& vocab, const std::string& object) {
  std::set<int> out;
  for (std::size_t i = 0; i < vocab.predicates.size(); ++i) {
    if (compatible(vocab.predicates[i], object)) out.insert(static_cast<int>(i));
  }
  return out;
}

struct Motion {
  double vx = 0.0, vy = 0.0;
  double ax = 0.0, ay = 0.0, period = 1.0, phase = 0.0;
};

Motion draw_motion(MotionModel model, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Motion m;
  if (model == MotionModel::kLinear) {
    m.vx = (u(rng) * 2.0 - 1.0) * 0.04;
    m.vy = (u(rng) * 2.0 - 1.0) * 0.02;
  } else if (model == MotionModel::kSinusoidal) {
    m.ax = 2.0 + 3.0 * u(rng);
    m.ay = 1.0 + 2.0 * u(rng);
    m.period = 50.0 + 40.0 * u(rng);
    m.phase = 2.0 * std::numbers::pi * u(rng);
  }
  return m;
}

std::array<double, 2> displacement(const Motion& m, int frame, int num_frames) {
  const double t = frame - 0.5 * (num_frames - 1);
  const double w = 2.0 * std::numbers::pi * frame / m.period + m.phase;
  return {m.vx * t + m.ax * std::sin(w), m.vy * t + m.ay * std::cos(w)};
}

// Periodic size change of one entity, and a periodic drift of a held object
// around its interaction pose.
struct Deformation {
  double scale_w = 0.0, scale_h = 0.0, period = 1.0, phase = 0.0;
  double wobble_x = 0.0, wobble_y = 0.0, wobble_period = 1.0;

  std::array<double, 2> size(double w, double h, int frame) const {
    const double a = 2.0 * std::numbers::pi * frame / period + phase;
    return {w * (1.0 + scale_w * std::sin(a)), h * (1.0 + scale_h * std::cos(a))};
  }
  std::array<double, 2> wobble(int frame) const {
    const double a = 2.0 * std::numbers::pi * frame / wobble_period + phase;
    return {wobble_x * std::sin(a), wobble_y * std::sin(1.3 * a)};
  }
};

Deformation draw_deformation(double amount, double wobble, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Deformation d;
  d.scale_w = amount * (0.5 + 0.5 * u(rng));
  d.scale_h = amount * (0.5 + 0.5 * u(rng));
  d.period = 30.0 + 40.0 * u(rng);
  d.phase = 2.0 * std::numbers::pi * u(rng);
  d.wobble_x = wobble * (0.5 + 0.5 * u(rng));
  d.wobble_y = wobble * (0.5 + 0.5 * u(rng));
  d.wobble_period = 15.0 + 20.0 * u(rng);
  return d;
}

Box centred_box(double cx, double cy, double w, double h, const Box& slot) {
  Box b{cx - 0.5 * w, cy - 0.5 * h, w, h};
  b.x = std::clamp(b.x, slot.x, slot.right() - w);
  b.y = std::clamp(b.y, slot.y, slot.bottom() - h);
  return b;
}

}  // namespace

LabelSpace Vocabulary::label_space() const {
  LabelSpace labels;
  labels.human = human;
  labels.objects.push_back(human);
  for (const auto& o : objects) labels.objects.push_back(o.name);
  for (const auto& p : predicates) labels.predicates.push_back(p.name);
  return labels;
}

const ObjectKind& Vocabulary::object(const std::string& name) const {
  for (const auto& o : objects) {
    if (o.name == name) return o;
  }
  throw ValidationError("unknown synthetic object category '" + name + "'");
}

Vocabulary default_vocabulary() {
  Vocabulary v;
  v.objects = {
      {"bicycle", 60, 48}, {"skateboard", 48, 27}, {"ball", 36, 36}, {"cup", 33, 39},
      {"phone", 30, 42},   {"bag", 42, 45},        {"guitar", 33, 60}, {"dog", 48, 36},
      {"chair", 39, 51},   {"car", 72, 42},        {"bench", 66, 33},
  };
  v.predicates = {
      {"hold", 27, 0, {7, 9}, {"cup", "phone", "bag", "ball", "guitar"}},
      {"ride", 0, 36, {11, 12, 13, 14}, {"bicycle", "skateboard"}},
      {"kick", 24, 45, {13, 15}, {"ball"}},
      {"watch", 60, -24, {0, 1, 2}, {"phone", "dog"}},
      {"push", 45, -9, {7, 8, 9, 10}, {"bicycle", "chair"}},
      {"pull", -36, 9, {5, 6, 10}, {"bag", "dog", "chair"}},
      {"lift", 6, -45, {5, 6, 7, 8}, {"cup", "bag", "chair"}},
      {"play", 12, 6, {8, 10, 11}, {"guitar"}},
  };
  v.implies = {{"hold", "lift"}, {"hold", "play"}};
  return v;
}

void NoiseSpec::validate() const {
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) {
    throw ValidationError("noise.jitter must be a finite value >= 0");
  }
  if (!(drop_rate >= 0.0 && drop_rate <= 1.0)) {
    throw ValidationError("noise.drop_rate must lie in [0, 1]");
  }
  if (!(false_positive_rate >= 0.0 && false_positive_rate <= 1.0)) {
    throw ValidationError("noise.false_positive_rate must lie in [0, 1]");
  }
}

void SceneSpec::validate(const Vocabulary& vocab) const {
  if (num_frames < 2) throw ValidationError("scene '" + id + "': num_frames must be >= 2");
  if (num_humans < 0) throw ValidationError("scene '" + id + "': num_humans must be >= 0");
  if (!(deformation >= 0.0 && deformation < 0.5)) {
    throw ValidationError("scene '" + id + "': deformation must lie in [0, 0.5)");
  }
  if (!(pose_wobble >= 0.0 && pose_wobble <= 10.0)) {
    throw ValidationError("scene '" + id + "': pose_wobble must lie in [0, 10]");
  }
  noise.validate();
  for (const auto& o : objects) vocab.object(o);

  std::map<int, int> partner_of_human;
  std::map<int, int> human_of_object;
  for (const auto& e : script) {
    if (e.subject < 0 || e.subject >= num_humans) {
      throw ValidationError("scene '" + id + "': script subject out of range");
    }
    if (e.object < 0 || e.object >= static_cast<int>(objects.size())) {
      throw ValidationError("scene '" + id + "': script object out of range");
    }
    if (find_predicate(vocab, e.predicate) < 0) {
      throw ValidationError("scene '" + id + "': unknown predicate '" + e.predicate + "'");
    }
    if (e.span.begin < 0 || e.span.end >= num_frames || e.span.begin > e.span.end) {
      throw ValidationError("scene '" + id + "': script span outside the video");
    }
    const auto [hp, hnew] = partner_of_human.emplace(e.subject, e.object);
    const auto [oh, onew] = human_of_object.emplace(e.object, e.subject);
    if (hp->second != e.object || oh->second != e.subject) {
      throw ValidationError("scene '" + id +
                            "': each human interacts with one object and vice versa");
    }
  }
}

namespace {

int slot_capacity(const RenderConfig& r) {
  return static_cast<int>(r.width / kSlotWidth) * static_cast<int>(r.height / kSlotHeight);
}

Box slot_box(int slot, const RenderConfig& r) {
  const int cols = static_cast<int>(r.width / kSlotWidth);
  const double sw = static_cast<double>(r.width) / cols;
  const double sh = static_cast<double>(r.height) / static_cast<int>(r.height / kSlotHeight);
  return {(slot % cols) * sw, (slot / cols) * sh, sw, sh};
}

// Object centre relative to its human: the interaction pose while scripted,
// linear moves between consecutive interactions, and the rest pose before the
// first and after the last one, reached over kTransition frames.
std::vector<std::array<double, 2>> relative_offsets(const std::vector<int>& primary,
                                                    const Vocabulary& vocab) {
  using Offset = std::array<double, 2>;
  const int n = static_cast<int>(primary.size());
  const Offset rest{kRestDx, kRestDy};
  std::vector<std::pair<int, Offset>> keys;
  for (int f = 0; f < n; ++f) {
    if (primary[f] < 0) continue;
    const auto& p = vocab.predicates[primary[f]];
    const bool starts = f == 0 || primary[f - 1] != primary[f];
    const bool ends = f == n - 1 || primary[f + 1] != primary[f];
    if (starts || ends) keys.emplace_back(f, Offset{p.dx, p.dy});
  }
  std::vector<Offset> out(n, rest);
  if (keys.empty()) return out;
  keys.insert(keys.begin(), {keys.front().first - kTransition, rest});
  keys.emplace_back(keys.back().first + kTransition, rest);
  std::size_t k = 0;
  for (int f = 0; f < n; ++f) {
    while (k + 1 < keys.size() && keys[k + 1].first <= f) ++k;
    if (f <= keys.front().first) continue;
    if (k + 1 >= keys.size()) break;
    const auto& [f0, a] = keys[k];
    const auto& [f1, b] = keys[k + 1];
    const double w = static_cast<double>(f - f0) / (f1 - f0);
    out[f] = {a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])};
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, const Vocabulary& vocab, const RenderConfig& render) {
  spec.validate(vocab);
  const LabelSpace labels = vocab.label_space();
  const int n = spec.num_frames;
  const int num_objects = static_cast<int>(spec.objects.size());

  std::map<int, int> partner;  // human -> object
  for (const auto& e : spec.script) partner[e.subject] = e.object;
  std::set<int> attached;
  for (const auto& [h, o] : partner) attached.insert(o);

  const int needed = spec.num_humans + num_objects - static_cast<int>(attached.size());
  if (needed > slot_capacity(render)) {
    throw ValidationError("scene '" + spec.id + "' needs " + std::to_string(needed) +
                          " slots but a " + std::to_string(render.width) + "x" +
                          std::to_string(render.height) + " frame holds " +
                          std::to_string(slot_capacity(render)));
  }

  std::mt19937_64 motion_rng(spec.seed);
  std::mt19937_64 noise_rng(spec.seed ^ 0x5bd1e9955bd1e995ULL);

  Scene scene;
  scene.spec = spec;
  scene.active.assign(spec.num_humans, std::vector<std::vector<int>>(n));
  const int total = spec.num_humans + num_objects;
  std::vector<std::vector<Box>> tracks(total, std::vector<Box>(n));

  int next_slot = 0;
  std::vector<Box> human_slot(spec.num_humans);
  for (int h = 0; h < spec.num_humans; ++h) {
    human_slot[h] = slot_box(next_slot++, render);
    const Motion m = draw_motion(spec.motion, motion_rng);
    const Deformation def = draw_deformation(spec.deformation, spec.pose_wobble, motion_rng);
    for (int f = 0; f < n; ++f) {
      const auto d = displacement(m, f, n);
      const auto sz = def.size(vocab.human_width, vocab.human_height, f);
      tracks[h][f] = centred_box(human_slot[h].x + kHumanX + d[0], human_slot[h].y + kHumanY + d[1],
                                 sz[0], sz[1], human_slot[h]);
    }
  }
  for (const auto& e : spec.script) {
    const int p = find_predicate(vocab, e.predicate);
    for (int f = e.span.begin; f <= e.span.end; ++f) scene.active[e.subject][f].push_back(p);
  }

  for (int o = 0; o < num_objects; ++o) {
    const ObjectKind& kind = vocab.object(spec.objects[o]);
    auto& track = tracks[spec.num_humans + o];
    int owner = -1;
    for (const auto& [h, obj] : partner) {
      if (obj == o) owner = h;
    }
    if (owner < 0) {
      const Box slot = slot_box(next_slot++, render);
      const Motion m = draw_motion(spec.motion, motion_rng);
      const Deformation def = draw_deformation(spec.deformation, 0.0, motion_rng);
      for (int f = 0; f < n; ++f) {
        const auto d = displacement(m, f, n);
        const auto sz = def.size(kind.width, kind.height, f);
        track[f] = centred_box(slot.center_x() + d[0], slot.center_y() + d[1], sz[0], sz[1], slot);
      }
      continue;
    }
    // The first scripted predicate on a frame sets the pose.
    std::vector<int> primary(n, -1);
    for (int f = 0; f < n; ++f) {
      if (!scene.active[owner][f].empty()) primary[f] = scene.active[owner][f].front();
    }
    const auto offsets = relative_offsets(primary, vocab);
    const Deformation def = draw_deformation(spec.deformation, spec.pose_wobble, motion_rng);
    for (int f = 0; f < n; ++f) {
      const Box& hb = tracks[owner][f];
      const auto sz = def.size(kind.width, kind.height, f);
      const auto wob = def.wobble(f);
      track[f] = centred_box(hb.center_x() + offsets[f][0] + wob[0],
                             hb.center_y() + offsets[f][1] + wob[1], sz[0], sz[1],
                             human_slot[owner]);
    }
  }

  if (spec.annotation_jitter > 0.0) {
    std::mt19937_64 ann_rng(spec.seed ^ 0x27d4eb2f165667c5ULL);
    std::normal_distribution<double> g(0.0, spec.annotation_jitter);
    for (auto& track : tracks) {
      for (Box& b : track) {
        b = {b.x + g(ann_rng), b.y + g(ann_rng), std::max(2.0, b.w + g(ann_rng)),
             std::max(2.0, b.h + g(ann_rng))};
      }
    }
  }

  // Ground truth.
  io::AnnotationRecord& truth = scene.truth;
  truth.video_id = spec.id;
  truth.frame_count = n;
  truth.width = render.width;
  truth.height = render.height;
  for (int e = 0; e < total; ++e) {
    const std::string category = e < spec.num_humans ? vocab.human : spec.objects[e - spec.num_humans];
    truth.trajectories.push_back(
        {e, category, make_trajectory({0, n - 1}, tracks[e], labels.object_index(category))});
  }
  for (const auto& s : spec.script) {
    truth.relations.push_back({s.subject, spec.num_humans + s.object, s.predicate, s.span.begin,
                               s.span.end + 1});
  }

  // Keypoints at template offsets inside the true human boxes.
  for (int f = 0; f < n; ++f) {
    for (int h = 0; h < spec.num_humans; ++h) {
      const Box& b = tracks[h][f];
      Skeleton sk;
      for (int j = 0; j < kNumJoints; ++j) {
        sk.joints[j] = {b.x + kTemplate[j][0] * b.w, b.y + kTemplate[j][1] * b.h, 1.0};
      }
      scene.keypoints[f].push_back(sk);
    }
  }

  // Detections.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const NoiseSpec& noise = spec.noise;
  const auto jittered = [&](const Box& b, double sigma) {
    if (sigma == 0.0) return b;
    Box j{b.x + sigma * gauss(noise_rng), b.y + sigma * gauss(noise_rng),
          b.w + sigma * gauss(noise_rng), b.h + sigma * gauss(noise_rng)};
    j.w = std::max(j.w, 2.0);
    j.h = std::max(j.h, 2.0);
    return j;
  };
  for (int f = 0; f < n; ++f) {
    for (int e = 0; e < total; ++e) {
      const bool dropped = u(noise_rng) < noise.drop_rate;
      const double score = 0.6 + 0.4 * u(noise_rng);
      const bool extra = u(noise_rng) < noise.false_positive_rate;
      const int category = truth.trajectories[e].trajectory.category;
      if (!dropped) scene.detections.push_back({f, jittered(tracks[e][f], noise.jitter), category, score});
      if (extra) {
        scene.detections.push_back(
            {f, jittered(tracks[e][f], 3.0 * noise.jitter + 2.0), category, 0.1 + 0.3 * u(noise_rng)});
      }
    }
  }
  return scene;
}

std::vector<float> render_grid(const Scene& scene, const Vocabulary& vocab,
                               const RenderConfig& render, int frame) {
  const int gw = render.grid_width();
  const int gh = render.grid_height();
  const int channels = 2 + static_cast<int>(vocab.predicates.size());
  std::vector<float> values(static_cast<std::size_t>(channels) * gw * gh, 0.0f);
  const auto cell = [&](int c, int y, int x) -> float& {
    return values[(static_cast<std::size_t>(c) * gh + y) * gw + x];
  };
  const double inv2s2 = 1.0 / (2.0 * render.blob_sigma * render.blob_sigma);
  const int humans = scene.spec.num_humans;

  for (const auto& t : scene.truth.trajectories) {
    const Box& b = t.trajectory.box_at(frame);
    const int c = t.tid < humans ? 0 : 1;
    for (int y = 0; y < gh; ++y) {
      for (int x = 0; x < gw; ++x) {
        const double cx = (x + 0.5) * render.cell;
        const double cy = (y + 0.5) * render.cell;
        if (cx >= b.x && cx <= b.right() && cy >= b.y && cy <= b.bottom()) cell(c, y, x) = 1.0f;
      }
    }
  }
  const auto& frames = scene.keypoints.at(frame);
  for (int h = 0; h < humans; ++h) {
    for (int p : scene.active[h][frame]) {
      for (int j : vocab.predicates[p].joints) {
        const Keypoint& k = frames[h].joints[j];
        for (int y = 0; y < gh; ++y) {
          for (int x = 0; x < gw; ++x) {
            const double dx = (x + 0.5) * render.cell - k.x;
            const double dy = (y + 0.5) * render.cell - k.y;
            float& v = cell(2 + p, y, x);
            v = std::max(v, static_cast<float>(std::exp(-(dx * dx + dy * dy) * inv2s2)));
          }
        }
      }
    }
  }
  return values;
}

void SuiteConfig::validate() const {
  if (num_videos < 0) throw ValidationError("synth.num_videos must be >= 0");
  if (min_frames < 2 || max_frames < min_frames) {
    throw ValidationError("synth frame range must satisfy 2 <= min_frames <= max_frames");
  }
  if (max_interacting < 1) throw ValidationError("synth.max_interacting must be >= 1");
  if (max_distractors < 0) throw ValidationError("synth.max_distractors must be >= 0");
  if (!(idle_human_rate >= 0.0 && idle_human_rate <= 1.0)) {
    throw ValidationError("synth.idle_human_rate must lie in [0, 1]");
  }
  noise.validate();
}

std::vector<SceneSpec> random_suite(const SuiteConfig& cfg, const Vocabulary& vocab,
                                    int segment_len) {
  cfg.validate();
  if (segment_len < 1) throw ValidationError("segment_len must be >= 1");
  const int capacity = slot_capacity(RenderConfig{});

  std::vector<std::string> interactive, inert;
  for (const auto& o : vocab.objects) {
    (predicates_for(vocab, o.name).empty() ? inert : interactive).push_back(o.name);
  }

  std::vector<SceneSpec> specs;
  for (int i = 0; i < cfg.num_videos; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    const auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    std::uniform_real_distribution<double> u(0.0, 1.0);

    SceneSpec s;
    char id[32];
    std::snprintf(id, sizeof id, "%03d", i);
    s.id = cfg.prefix + "_" + id;
    s.seed = rng();
    const int lo = std::max(2, (cfg.min_frames + segment_len - 1) / segment_len);
    const int hi = std::max(lo, cfg.max_frames / segment_len);
    const int segments = pick(lo, hi);
    s.num_frames = segments * segment_len;
    s.motion = cfg.motion;
    s.annotation_jitter = cfg.annotation_jitter;
    s.noise = cfg.noise;

    // Partners with pairwise disjoint predicate sets, drawn predicate first so
    // that rarely compatible predicates are not starved.
    std::set<int> used;
    const int want = pick(1, std::min(cfg.max_interacting, capacity));
    while (static_cast<int>(s.objects.size()) < want) {
      std::vector<std::string> fits;
      std::vector<int> open;
      for (std::size_t p = 0; p < vocab.predicates.size(); ++p) {
        if (!used.count(static_cast<int>(p))) open.push_back(static_cast<int>(p));
      }
      if (open.empty()) break;
      const auto& predicate = vocab.predicates[open[pick(0, static_cast<int>(open.size()) - 1)]];
      for (const auto& name : interactive) {
        const auto preds = predicates_for(vocab, name);
        if (!compatible(predicate, name)) continue;
        if (std::none_of(preds.begin(), preds.end(), [&](int p) { return used.count(p) > 0; })) {
          fits.push_back(name);
        }
      }
      if (fits.empty()) break;
      const std::string name = fits[pick(0, static_cast<int>(fits.size()) - 1)];
      const auto preds = predicates_for(vocab, name);
      used.insert(preds.begin(), preds.end());
      s.objects.push_back(name);
    }
    const int interacting = static_cast<int>(s.objects.size());
    s.num_humans = interacting;
    if (s.num_humans < capacity && u(rng) < cfg.idle_human_rate) ++s.num_humans;
    const int room = capacity - s.num_humans;
    const int distractors = inert.empty() ? 0 : pick(0, std::min(cfg.max_distractors, room));
    for (int d = 0; d < distractors; ++d) {
      s.objects.push_back(inert[pick(0, static_cast<int>(inert.size()) - 1)]);
    }

    for (int h = 0; h < interacting; ++h) {
      const auto preds = predicates_for(vocab, s.objects[h]);
      const std::vector<int> options(preds.begin(), preds.end());
      int t = pick(1, 2);
      while (true) {
        const int len = pick(3, 5);
        if (t + len > segments) break;
        const Span span{t * segment_len, (t + len) * segment_len - 1};
        const auto& primary = vocab.predicates[options[pick(0, static_cast<int>(options.size()) - 1)]];
        s.script.push_back({h, h, primary.name, span});
        for (const auto& [secondary, by] : vocab.implies) {
          if (by != primary.name) continue;
          const int sp = find_predicate(vocab, secondary);
          if (sp >= 0 && compatible(vocab.predicates[sp], s.objects[h])) {
            s.script.push_back({h, h, secondary, span});
          }
        }
        t += len + pick(2, 3);
      }
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

EmbeddingTable make_embeddings(const LabelSpace& labels, int dim, std::uint64_t seed) {
  if (dim < 1) throw ValidationError("embedding dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  EmbeddingTable table;
  for (const auto& name : labels.objects) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (double& x : v) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    table.add(name, std::move(v));
  }
  return table;
}

std::filesystem::path write_suite(const std::filesystem::path& dir,
                                  const std::vector<SceneSpec>& specs,
                                  const Vocabulary& vocab, const RenderConfig& render) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const LabelSpace labels = vocab.label_space();
  io::save_label_space(dir / "labels.json", labels);
  io::save_embeddings(dir / "embeddings.txt",
                      make_embeddings(labels, render.embedding_dim, render.embedding_seed));

  io::DatasetManifest manifest;
  manifest.labels = "labels.json";
  manifest.embeddings = "embeddings.txt";
  const int channels = 2 + static_cast<int>(vocab.predicates.size());
  for (const auto& spec : specs) {
    const Scene scene = generate_scene(spec, vocab, render);
    const fs::path rel = spec.id;
    fs::create_directories(dir / rel);
    io::save_detections(dir / rel / "detections.jsonl", {{spec.id, scene.detections}}, labels);
    io::save_keypoints(dir / rel / "keypoints.jsonl", {{spec.id, scene.keypoints}});
    io::save_annotation(dir / rel / "annotations.json", scene.truth);
    io::GridHeader header;
    header.channels = static_cast<std::uint32_t>(channels);
    header.height = static_cast<std::uint32_t>(render.grid_height());
    header.width = static_cast<std::uint32_t>(render.grid_width());
    header.first_frame = 0;
    header.frame_width = static_cast<float>(render.width);
    header.frame_height = static_cast<float>(render.height);
    io::FeatureGridWriter writer(dir / rel / "features.grid", header);
    for (int f = 0; f < spec.num_frames; ++f) writer.append(render_grid(scene, vocab, render, f));
    writer.close();

    io::VideoEntry entry;
    entry.id = spec.id;
    entry.frame_count = spec.num_frames;
    entry.fps = 30.0;
    entry.detections = rel / "detections.jsonl";
    entry.keypoints = rel / "keypoints.jsonl";
    entry.features = rel / "features.grid";
    entry.annotations = rel / "annotations.json";
    manifest.videos.push_back(std::move(entry));
  }
  const fs::path path = dir / "manifest.json";
  io::save_manifest(path, manifest);
  return path;
}

}  // namespace hoi::synth
