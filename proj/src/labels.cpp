#include "hoi/labels.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "hoi/errors.hpp"

namespace hoi {

namespace {

int index_of(const std::vector<std::string>& list, const std::string& name,
             const char* what) {
  const auto it = std::find(list.begin(), list.end(), name);
  if (it == list.end()) {
    throw DataError(std::string("unknown ") + what + " category '" + name + "'");
  }
  return static_cast<int>(it - list.begin());
}

void check_unique(const std::vector<std::string>& list, const char* what) {
  if (list.empty()) throw DataError(std::string("label space has no ") + what + " categories");
  std::set<std::string> seen;
  for (const auto& s : list) {
    if (s.empty()) throw DataError(std::string("empty ") + what + " category name");
    if (!seen.insert(s).second) {
      throw DataError(std::string("duplicate ") + what + " category '" + s + "'");
    }
  }
}

}  // namespace

int LabelSpace::object_index(const std::string& name) const {
  return index_of(objects, name, "object");
}

int LabelSpace::predicate_index(const std::string& name) const {
  return index_of(predicates, name, "predicate");
}

void LabelSpace::validate() const {
  check_unique(objects, "object");
  check_unique(predicates, "predicate");
  object_index(human);
}

bool instance_rank_less(const HoiInstance& a, const HoiInstance& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.predicate, a.object_category, a.span.begin, a.span.end, a.video,
                  a.subject.span.begin, a.object.span.begin) <
         std::tie(b.predicate, b.object_category, b.span.begin, b.span.end, b.video,
                  b.subject.span.begin, b.object.span.begin);
}

}  // namespace hoi
