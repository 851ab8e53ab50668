#include "hoi/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hoi/errors.hpp"

namespace hoi {

std::optional<Box> Skeleton::bounding_box(double min_visibility) const {
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  bool any = false;
  for (const auto& j : joints) {
    if (j.visibility < min_visibility) continue;
    x0 = std::min(x0, j.x);
    y0 = std::min(y0, j.y);
    x1 = std::max(x1, j.x);
    y1 = std::max(y1, j.y);
    any = true;
  }
  if (!any) {
    for (const auto& j : joints) {
      x0 = std::min(x0, j.x);
      y0 = std::min(y0, j.y);
      x1 = std::max(x1, j.x);
      y1 = std::max(y1, j.y);
    }
  }
  if (!(x1 > x0) || !(y1 > y0)) return std::nullopt;
  return Box{x0, y0, x1 - x0, y1 - y0};
}

void EmbeddingTable::add(const std::string& token, std::vector<double> vec) {
  if (vec.empty()) throw DataError("embedding '" + token + "' has no values");
  if (table_.count(token)) throw DataError("duplicate embedding token '" + token + "'");
  if (!table_.empty() && static_cast<int>(vec.size()) != dim_) {
    throw DataError("embedding '" + token + "' has dimension " +
                    std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  }
  dim_ = static_cast<int>(vec.size());
  table_.emplace(token, std::move(vec));
}

const std::vector<double>& EmbeddingTable::lookup(const std::string& token) const {
  const auto it = table_.find(token);
  if (it == table_.end()) throw DataError("missing embedding token '" + token + "'");
  return it->second;
}

void FeatureConfig::validate() const {
  if (!(part_ratio > 0.0 && part_ratio < 1.0)) {
    throw ValidationError("features.part_ratio must lie in (0, 1)");
  }
  if (!(min_visibility >= 0.0 && min_visibility <= 1.0)) {
    throw ValidationError("features.min_visibility must lie in [0, 1]");
  }
  if (roi_size < 1) throw ValidationError("features.roi_size must be >= 1");
}

std::vector<SkeletonTrajectory> assign_skeletons(
    const SkeletonFrames& skeletons, const std::vector<Trajectory>& trajectories,
    int human_category, double min_visibility) {
  std::vector<SkeletonTrajectory> out;
  std::vector<std::size_t> humans;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].category != human_category) continue;
    humans.push_back(i);
    SkeletonTrajectory st;
    st.host = i;
    st.span = trajectories[i].span;
    st.skeletons.resize(st.span.length());
    out.push_back(std::move(st));
  }

  std::vector<double> best_iou(humans.size());
  std::vector<const Skeleton*> best(humans.size());
  for (const auto& [frame, list] : skeletons) {
    std::fill(best_iou.begin(), best_iou.end(), 0.0);
    std::fill(best.begin(), best.end(), nullptr);
    for (const Skeleton& sk : list) {
      const auto bb = sk.bounding_box(min_visibility);
      if (!bb) continue;
      double top = 0.0;
      std::size_t arg = humans.size();
      for (std::size_t k = 0; k < humans.size(); ++k) {
        const Trajectory& t = trajectories[humans[k]];
        if (!t.span.contains(frame)) continue;
        const double v = iou(*bb, t.box_at(frame));
        if (v > top) {
          top = v;
          arg = k;
        }
      }
      if (arg == humans.size()) continue;
      if (top > best_iou[arg]) {
        best_iou[arg] = top;
        best[arg] = &sk;
      }
    }
    for (std::size_t k = 0; k < humans.size(); ++k) {
      if (best[k]) out[k].skeletons[frame - out[k].span.begin] = *best[k];
    }
  }
  return out;
}

namespace {

Box clip_or(const Box& box, const Box& frame, const Box& fallback) {
  if (const auto c = intersect(box, frame)) return *c;
  return fallback;
}

}  // namespace

std::array<Box, kNumJoints> body_part_boxes(const Skeleton& skeleton,
                                            const Box& host, double ratio,
                                            double min_visibility,
                                            const Box& frame_box) {
  const Box host_clipped = clip_or(host, frame_box, host);
  const double side = ratio * std::max(host.w, host.h);
  std::array<Box, kNumJoints> parts;
  for (int i = 0; i < kNumJoints; ++i) {
    const Keypoint& j = skeleton.joints[i];
    if (j.visibility < min_visibility) {
      parts[i] = host_clipped;
      continue;
    }
    const Box raw{j.x - 0.5 * side, j.y - 0.5 * side, side, side};
    parts[i] = clip_or(raw, frame_box, host_clipped);
  }
  return parts;
}

PooledMap roi_pool_frame(const FeatureGrid& grid, const Box& box, int out_size) {
  const auto clipped = intersect(box, grid.frame_box);
  if (!clipped) throw DataError("RoI box has zero area after clipping to the frame");

  PooledMap out;
  out.channels = grid.channels;
  out.size = out_size;
  out.values.resize(static_cast<std::size_t>(grid.channels) * out_size * out_size);

  const double cell_w = grid.frame_box.w / grid.width;
  const double cell_h = grid.frame_box.h / grid.height;
  const double bin_w = clipped->w / out_size;
  const double bin_h = clipped->h / out_size;
  const std::size_t plane = static_cast<std::size_t>(grid.width) * grid.height;

  for (int by = 0; by < out_size; ++by) {
    const double py = clipped->y + (by + 0.5) * bin_h;
    const double gy = std::clamp((py - grid.frame_box.y) / cell_h - 0.5, 0.0,
                                 static_cast<double>(grid.height - 1));
    const int y0 = static_cast<int>(gy);
    const int y1 = std::min(y0 + 1, grid.height - 1);
    const double ly = gy - y0;
    for (int bx = 0; bx < out_size; ++bx) {
      const double px = clipped->x + (bx + 0.5) * bin_w;
      const double gx = std::clamp((px - grid.frame_box.x) / cell_w - 0.5, 0.0,
                                   static_cast<double>(grid.width - 1));
      const int x0 = static_cast<int>(gx);
      const int x1 = std::min(x0 + 1, grid.width - 1);
      const double lx = gx - x0;

      const double w00 = (1 - ly) * (1 - lx);
      const double w01 = (1 - ly) * lx;
      const double w10 = ly * (1 - lx);
      const double w11 = ly * lx;
      const std::size_t i00 = static_cast<std::size_t>(y0) * grid.width + x0;
      const std::size_t i01 = static_cast<std::size_t>(y0) * grid.width + x1;
      const std::size_t i10 = static_cast<std::size_t>(y1) * grid.width + x0;
      const std::size_t i11 = static_cast<std::size_t>(y1) * grid.width + x1;
      for (int c = 0; c < grid.channels; ++c) {
        const float* p = grid.values.data() + c * plane;
        out.values[(static_cast<std::size_t>(c) * out_size + by) * out_size + bx] =
            w00 * p[i00] + w01 * p[i01] + w10 * p[i10] + w11 * p[i11];
      }
    }
  }
  return out;
}

ToiPooled toi_pool(std::span<const FeatureGrid> grids, std::span<const Box> boxes,
                   int out_size) {
  if (grids.empty()) throw DataError("ToI pooling needs at least one frame");
  if (grids.size() != boxes.size()) {
    throw DataError("ToI pooling: grid and box counts differ");
  }
  ToiPooled out;
  out.max_map = roi_pool_frame(grids[0], boxes[0], out_size);
  for (std::size_t i = 1; i < grids.size(); ++i) {
    const PooledMap next = roi_pool_frame(grids[i], boxes[i], out_size);
    if (next.channels != out.max_map.channels) {
      throw DataError("ToI pooling: channel count changes across frames");
    }
    for (std::size_t k = 0; k < next.values.size(); ++k) {
      out.max_map.values[k] = std::max(out.max_map.values[k], next.values[k]);
    }
  }
  const std::size_t cells = static_cast<std::size_t>(out_size) * out_size;
  out.descriptor.assign(out.max_map.channels, 0.0);
  for (int c = 0; c < out.max_map.channels; ++c) {
    double sum = 0.0;
    for (std::size_t k = 0; k < cells; ++k) sum += out.max_map.values[c * cells + k];
    out.descriptor[c] = sum / static_cast<double>(cells);
  }
  return out;
}

std::vector<double> behavior_descriptor(const CandidateSegment& seg,
                                        const SkeletonTrajectory* skeletons,
                                        std::span<const FeatureGrid> grids,
                                        const FeatureConfig& cfg) {
  const int len = seg.span.length();
  if (static_cast<int>(grids.size()) != len) {
    throw DataError("behavior descriptor: expected " + std::to_string(len) +
                    " feature grids, got " + std::to_string(grids.size()));
  }
  for (int i = 0; i < len; ++i) {
    if (grids[i].frame != seg.span.begin + i) {
      throw DataError("behavior descriptor: grid for frame " +
                      std::to_string(grids[i].frame) + " is misaligned");
    }
  }

  // part_boxes[k][i]: box of part k on frame i.
  std::array<std::vector<Box>, kNumJoints> part_boxes;
  for (auto& v : part_boxes) v.resize(len);
  for (int i = 0; i < len; ++i) {
    const Box& host = seg.human_boxes[i];
    const std::optional<Skeleton>* sk =
        skeletons ? skeletons->at(seg.span.begin + i) : nullptr;
    if (sk && sk->has_value()) {
      const auto parts = body_part_boxes(**sk, host, cfg.part_ratio,
                                         cfg.min_visibility, grids[i].frame_box);
      for (int k = 0; k < kNumJoints; ++k) part_boxes[k][i] = parts[k];
    } else {
      const Box clipped = clip_or(host, grids[i].frame_box, host);
      for (int k = 0; k < kNumJoints; ++k) part_boxes[k][i] = clipped;
    }
  }

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(kNumJoints) * grids[0].channels);
  for (int k = 0; k < kNumJoints; ++k) {
    const auto pooled = toi_pool(grids, part_boxes[k], cfg.roi_size);
    out.insert(out.end(), pooled.descriptor.begin(), pooled.descriptor.end());
  }
  return out;
}

std::array<double, 5> f_loc(const Box& h, const Box& o) {
  if (!(h.w > 0 && h.h > 0 && o.w > 0 && o.h > 0)) {
    throw DataError("relative location needs boxes with positive width and height");
  }
  return {(h.x - o.x) / h.w, (h.y - o.y) / h.h, std::log(h.w / o.w),
          std::log(h.h / o.h), std::log((h.w * h.h) / (o.w * o.h))};
}

std::vector<double> motion_feature(const CandidateSegment& seg) {
  if (seg.human_boxes.size() < 2 || seg.object_boxes.size() != seg.human_boxes.size()) {
    throw DataError("motion feature needs an aligned segment of at least 2 frames");
  }
  const auto first = f_loc(seg.human_boxes.front(), seg.object_boxes.front());
  const auto last = f_loc(seg.human_boxes.back(), seg.object_boxes.back());
  std::vector<double> out(15);
  for (int i = 0; i < 5; ++i) {
    out[i] = first[i];
    out[5 + i] = last[i];
    out[10 + i] = last[i] - first[i];
  }
  return out;
}

std::vector<double> semantic_feature(const std::string& human_token,
                                     const std::string& object_token,
                                     const EmbeddingTable& table) {
  const auto& vh = table.lookup(human_token);
  const auto& vo = table.lookup(object_token);
  std::vector<double> out(vh);
  out.insert(out.end(), vo.begin(), vo.end());
  return out;
}

}  // namespace hoi
