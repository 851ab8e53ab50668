#pragma once

#include <string>
#include <vector>

#include "hoi/geometry.hpp"

namespace hoi {

// Object categories and predicate categories. The human category is one of
// the object categories, since humans can be the object of an interaction.
struct LabelSpace {
  std::string human = "person";
  std::vector<std::string> objects;
  std::vector<std::string> predicates;

  int num_objects() const { return static_cast<int>(objects.size()); }
  int num_predicates() const { return static_cast<int>(predicates.size()); }

  // Throw DataError naming the unknown token.
  int object_index(const std::string& name) const;
  int predicate_index(const std::string& name) const;
  int human_index() const { return object_index(human); }

  // Non-empty, duplicate-free, human listed among objects.
  void validate() const;

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;
};

// An HOI category <predicate, object>.
struct HoiLabel {
  int predicate = 0;
  int object = 0;

  friend auto operator<=>(const HoiLabel&, const HoiLabel&) = default;
};

// One spatio-temporal interaction: labels, subject/object trajectories cropped
// to `span`, and a ranking score.
struct HoiInstance {
  std::string video;
  int predicate = 0;
  int object_category = 0;
  Span span;
  Trajectory subject;
  Trajectory object;
  double score = 0.0;

  HoiLabel label() const { return {predicate, object_category}; }
};

// Deterministic ranking order: score descending, then label, then span.
bool instance_rank_less(const HoiInstance& a, const HoiInstance& b);

}  // namespace hoi
