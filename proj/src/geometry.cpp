#include "hoi/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hoi {

bool Box::valid() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
         std::isfinite(h) && w > 0.0 && h > 0.0;
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  const double left = std::max(a.x, b.x);
  const double top = std::max(a.y, b.y);
  const double right = std::min(a.right(), b.right());
  const double bottom = std::min(a.bottom(), b.bottom());
  if (right <= left || bottom <= top) return std::nullopt;
  return Box{left, top, right - left, bottom - top};
}

Box enclose(const Box& a, const Box& b) {
  const double left = std::min(a.x, b.x);
  const double top = std::min(a.y, b.y);
  return Box{left, top, std::max(a.right(), b.right()) - left,
             std::max(a.bottom(), b.bottom()) - top};
}

std::optional<Span> intersect(const Span& a, const Span& b) {
  const int begin = std::max(a.begin, b.begin);
  const int end = std::min(a.end, b.end);
  if (begin > end) return std::nullopt;
  return Span{begin, end};
}

Trajectory Trajectory::crop(const Span& window) const {
  Trajectory out;
  out.span = window;
  out.category = category;
  out.score = score;
  const auto first = boxes.begin() + (window.begin - span.begin);
  out.boxes.assign(first, first + window.length());
  if (!sources.empty()) {
    const auto s = sources.begin() + (window.begin - span.begin);
    out.sources.assign(s, s + window.length());
  }
  return out;
}

bool Trajectory::consistent() const {
  if (span.begin > span.end) return false;
  if (static_cast<int>(boxes.size()) != span.length()) return false;
  if (!sources.empty() && sources.size() != boxes.size()) return false;
  return std::all_of(boxes.begin(), boxes.end(),
                     [](const Box& b) { return b.valid(); });
}

Trajectory make_trajectory(Span span, std::vector<Box> boxes, int category,
                           double score) {
  Trajectory t;
  t.span = span;
  t.sources.assign(boxes.size(), FrameSource::kDetected);
  t.boxes = std::move(boxes);
  t.category = category;
  t.score = score;
  return t;
}

double iou(const Box& a, const Box& b) {
  const auto inter = intersect(a, b);
  if (!inter) return 0.0;
  const double overlap = inter->area();
  return overlap / (a.area() + b.area() - overlap);
}

double trajectory_overlap(const Trajectory& tx, const Trajectory& ty,
                          double beta) {
  const auto common = intersect(tx.span, ty.span);
  if (!common) return 0.0;
  int hits = 0;
  for (int f = common->begin; f <= common->end; ++f) {
    if (iou(tx.box_at(f), ty.box_at(f)) > beta) ++hits;
  }
  return static_cast<double>(hits) / common->length();
}

double viou(const Trajectory& tx, const Trajectory& ty) {
  const auto common = intersect(tx.span, ty.span);
  if (!common) return 0.0;
  double total = 0.0;
  for (int f = common->begin; f <= common->end; ++f) {
    total += iou(tx.box_at(f), ty.box_at(f));
  }
  const int union_len = std::max(tx.span.end, ty.span.end) -
                        std::min(tx.span.begin, ty.span.begin) + 1;
  return total / union_len;
}

}  // namespace hoi
