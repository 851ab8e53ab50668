#include "hoi/evaluation.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "hoi/errors.hpp"

namespace hoi {

void MatchConfig::validate() const {
  if (!(viou_threshold > 0.0 && viou_threshold <= 1.0)) {
    throw ValidationError("evaluation.viou_threshold must lie in (0, 1]");
  }
  for (int k : recall_k) {
    if (k < 1) throw ValidationError("evaluation.recall_k values must be positive");
  }
  for (int n : precision_n) {
    if (n < 1) throw ValidationError("evaluation.precision_n values must be positive");
  }
}

std::optional<std::size_t> match_instance(const HoiInstance& pred,
                                          std::span<const HoiInstance> gts,
                                          std::vector<bool>& used, const MatchConfig& cfg) {
  std::optional<std::size_t> best;
  double best_quality = -1.0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (used[i]) continue;
    const HoiInstance& gt = gts[i];
    if (gt.predicate != pred.predicate || gt.object_category != pred.object_category) continue;
    const double vs = viou(pred.subject, gt.subject);
    if (vs <= cfg.viou_threshold) continue;
    const double vo = viou(pred.object, gt.object);
    if (vo <= cfg.viou_threshold) continue;
    const double quality = std::min(vs, vo);
    if (quality > best_quality) {
      best_quality = quality;
      best = i;
    }
  }
  if (best) used[*best] = true;
  return best;
}

double average_precision(std::span<const std::uint8_t> hits, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  double sum = 0.0;
  std::size_t tp = 0;
  for (std::size_t r = 0; r < hits.size(); ++r) {
    if (!hits[r]) continue;
    ++tp;
    sum += static_cast<double>(tp) / static_cast<double>(r + 1);
  }
  return sum / static_cast<double>(num_gt);
}

namespace {

std::vector<const HoiInstance*> ranked(std::span<const HoiInstance> preds) {
  std::vector<const HoiInstance*> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(&p);
  std::stable_sort(out.begin(), out.end(), [](const HoiInstance* a, const HoiInstance* b) {
    return instance_rank_less(*a, *b);
  });
  return out;
}

const std::vector<HoiInstance>& instances_of(const VideoInstances& m, const std::string& video) {
  static const std::vector<HoiInstance> empty;
  const auto it = m.find(video);
  return it == m.end() ? empty : it->second;
}

}  // namespace

ClassMapResult class_map(const VideoInstances& preds, const VideoInstances& gts,
                         const MatchConfig& cfg) {
  ClassMapResult result;
  for (const auto& [video, list] : gts) {
    for (const auto& g : list) ++result.per_class[g.label()].num_gt;
  }

  std::map<HoiLabel, std::vector<const HoiInstance*>> by_class;
  for (const auto& [video, list] : preds) {
    for (const auto& p : list) {
      if (result.per_class.count(p.label())) by_class[p.label()].push_back(&p);
    }
  }

  std::map<std::string, std::vector<bool>> used;
  for (const auto& [video, list] : gts) used[video].assign(list.size(), false);

  double sum = 0.0;
  for (auto& [label, stats] : result.per_class) {
    auto& list = by_class[label];
    std::stable_sort(list.begin(), list.end(), [](const HoiInstance* a, const HoiInstance* b) {
      return instance_rank_less(*a, *b);
    });
    std::vector<std::uint8_t> hits;
    hits.reserve(list.size());
    for (const HoiInstance* p : list) {
      const auto& video_gts = instances_of(gts, p->video);
      auto& flags = used[p->video];
      flags.resize(video_gts.size(), false);
      hits.push_back(match_instance(*p, video_gts, flags, cfg).has_value());
    }
    stats.num_pred = list.size();
    stats.ap = average_precision(hits, stats.num_gt);
    sum += stats.ap;
  }
  result.mean = result.per_class.empty() ? 0.0 : sum / static_cast<double>(result.per_class.size());
  return result;
}

double video_map(const VideoInstances& preds, const VideoInstances& gts, const MatchConfig& cfg) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [video, video_gts] : gts) {
    if (video_gts.empty()) continue;
    std::vector<bool> used(video_gts.size(), false);
    std::vector<std::uint8_t> hits;
    for (const HoiInstance* p : ranked(instances_of(preds, video))) {
      hits.push_back(match_instance(*p, video_gts, used, cfg).has_value());
    }
    sum += average_precision(hits, video_gts.size());
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::map<int, double> recall_at_k(const VideoInstances& preds, const VideoInstances& gts,
                                  const MatchConfig& cfg) {
  std::map<int, double> out;
  for (int k : cfg.recall_k) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [video, video_gts] : gts) {
      if (video_gts.empty()) continue;
      const auto order = ranked(instances_of(preds, video));
      std::vector<bool> used(video_gts.size(), false);
      std::size_t matched = 0;
      const std::size_t top = std::min(order.size(), static_cast<std::size_t>(k));
      for (std::size_t i = 0; i < top; ++i) {
        if (match_instance(*order[i], video_gts, used, cfg)) ++matched;
      }
      sum += static_cast<double>(matched) / static_cast<double>(video_gts.size());
      ++count;
    }
    out[k] = count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
  return out;
}

std::vector<Tag> video_tags(std::span<const HoiInstance> instances, const LabelSpace& labels) {
  std::map<HoiLabel, double> best;
  for (const auto& inst : instances) {
    const auto it = best.find(inst.label());
    if (it == best.end() || inst.score > it->second) best[inst.label()] = inst.score;
  }
  std::vector<Tag> tags;
  for (const auto& [label, score] : best) tags.push_back({label, score});
  const auto name = [&](const HoiLabel& l) {
    return std::tie(labels.predicates.at(l.predicate), labels.objects.at(l.object));
  };
  std::stable_sort(tags.begin(), tags.end(), [&](const Tag& a, const Tag& b) {
    if (a.score != b.score) return a.score > b.score;
    return name(a.label) < name(b.label);
  });
  return tags;
}

std::map<int, double> tagging_precision(const std::map<std::string, std::vector<Tag>>& tags,
                                        const VideoInstances& gts, const MatchConfig& cfg) {
  std::map<int, double> out;
  for (int n : cfg.precision_n) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& [video, video_gts] : gts) {
      if (video_gts.empty()) continue;
      ++count;
      const auto it = tags.find(video);
      if (it == tags.end() || it->second.empty()) continue;
      std::set<HoiLabel> truth;
      for (const auto& g : video_gts) truth.insert(g.label());
      const std::size_t top = std::min(it->second.size(), static_cast<std::size_t>(n));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < top; ++i) hits += truth.count(it->second[i].label);
      sum += static_cast<double>(hits) / static_cast<double>(top);
    }
    out[n] = count == 0 ? 0.0 : sum / static_cast<double>(count);
  }
  return out;
}

Metrics evaluate(const VideoInstances& preds, const VideoInstances& gts,
                 const LabelSpace& labels, const MatchConfig& cfg) {
  cfg.validate();
  Metrics m;
  auto cm = class_map(preds, gts, cfg);
  m.class_map = cm.mean;
  m.per_class = std::move(cm.per_class);
  m.video_map = video_map(preds, gts, cfg);
  m.recall = recall_at_k(preds, gts, cfg);
  std::map<std::string, std::vector<Tag>> tags;
  for (const auto& [video, list] : preds) tags[video] = video_tags(list, labels);
  m.precision = tagging_precision(tags, gts, cfg);
  return m;
}

double frame_detection_map(const std::map<std::string, std::vector<Trajectory>>& predicted,
                           const std::map<std::string, std::vector<Trajectory>>& truth,
                           double iou_threshold) {
  struct FrameBox {
    double score;
    const std::string* video;
    int frame;
    Box box;
  };
  // (category) -> scored boxes; (video, frame, category) -> ground-truth boxes.
  std::map<int, std::vector<FrameBox>> preds;
  std::map<std::tuple<std::string, int, int>, std::vector<Box>> gts;
  std::map<int, std::size_t> num_gt;
  for (const auto& [video, list] : truth) {
    for (const auto& t : list) {
      for (int f = t.span.begin; f <= t.span.end; ++f) {
        gts[{video, f, t.category}].push_back(t.box_at(f));
        ++num_gt[t.category];
      }
    }
  }
  for (const auto& [video, list] : predicted) {
    for (const auto& t : list) {
      if (!num_gt.count(t.category)) continue;
      for (int f = t.span.begin; f <= t.span.end; ++f) {
        preds[t.category].push_back({t.score, &video, f, t.box_at(f)});
      }
    }
  }

  double sum = 0.0;
  for (const auto& [category, count] : num_gt) {
    auto& list = preds[category];
    std::stable_sort(list.begin(), list.end(),
                     [](const FrameBox& a, const FrameBox& b) { return a.score > b.score; });
    std::map<std::tuple<std::string, int, int>, std::vector<bool>> used;
    std::vector<std::uint8_t> hits;
    hits.reserve(list.size());
    for (const FrameBox& p : list) {
      const std::tuple<std::string, int, int> key{*p.video, p.frame, category};
      const auto it = gts.find(key);
      bool hit = false;
      if (it != gts.end()) {
        auto& flags = used[key];
        flags.resize(it->second.size(), false);
        double best = -1.0;
        std::optional<std::size_t> arg;
        for (std::size_t i = 0; i < it->second.size(); ++i) {
          if (flags[i]) continue;
          const double v = iou(p.box, it->second[i]);
          if (v >= iou_threshold && v > best) {
            best = v;
            arg = i;
          }
        }
        if (arg) {
          flags[*arg] = true;
          hit = true;
        }
      }
      hits.push_back(hit);
    }
    sum += average_precision(hits, count);
  }
  return num_gt.empty() ? 0.0 : sum / static_cast<double>(num_gt.size());
}

}  // namespace hoi
