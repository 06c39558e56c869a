#include "zsnav/hints.hpp"

#include "zsnav/linalg.hpp"

#include <algorithm>

namespace zsnav {

const char* to_string(HintKind kind) {
  switch (kind) {
    case HintKind::initial_distance: return "initial-distance";
    case HintKind::identical_prototype: return "identical-prototype";
    case HintKind::general: return "general";
  }
  return "general";
}

namespace {

struct Candidate {
  Hint hint;
  double distance = 0.0;
};

}  // namespace

std::vector<Hint> generate_hints(const ClassAttributeMatrix& matrix, const ExemplarSet& exemplars,
                                 const ConfusionMatrix* confusion, int k) {
  const Index ns = exemplars.size();
  if (ns < 2) fail(ErrorKind::invalid_argument, "hints need at least two seen classes");
  if (matrix.n_attributes() > 0 && confusion == nullptr)
    fail(ErrorKind::invalid_argument, "a confusion matrix is required once attributes exist");

  const Matrix dist = pairwise_squared_distances(exemplars.points, exemplars.points).cwiseSqrt();
  std::vector<Candidate> cands;

  if (matrix.n_attributes() == 0) {
    for (Index i = 0; i < ns; ++i)
      for (Index j = i + 1; j < ns; ++j) {
        Candidate c;
        c.hint.class_a = exemplars.classes[static_cast<size_t>(i)];
        c.hint.class_b = exemplars.classes[static_cast<size_t>(j)];
        c.hint.kind = HintKind::initial_distance;
        c.hint.score = dist(i, j);
        cands.push_back(std::move(c));
      }
    // Descending distance; stable keeps (a, b) order on ties.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& x, const Candidate& y) { return x.hint.score > y.hint.score; });
  } else {
    bool any_identical = false;
    for (Index i = 0; i < ns && !any_identical; ++i)
      for (Index j = i + 1; j < ns && !any_identical; ++j)
        any_identical = matrix.rows_equal(exemplars.classes[static_cast<size_t>(i)], exemplars.classes[static_cast<size_t>(j)]);

    for (Index i = 0; i < ns; ++i)
      for (Index j = i + 1; j < ns; ++j) {
        const int a = exemplars.classes[static_cast<size_t>(i)];
        const int b = exemplars.classes[static_cast<size_t>(j)];
        const bool identical = matrix.rows_equal(a, b);
        if (any_identical && !identical) continue;
        Candidate c;
        c.hint.class_a = a;
        c.hint.class_b = b;
        c.hint.kind = identical ? HintKind::identical_prototype : HintKind::general;
        c.hint.score = confusion->at(a, b) + confusion->at(b, a);
        if (!identical) c.hint.excluded_attributes = matrix.differing_attributes(a, b);
        c.distance = dist(i, j);
        cands.push_back(std::move(c));
      }
    std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
      const bool xp = x.hint.score > 0.0, yp = y.hint.score > 0.0;
      if (xp != yp) return xp;
      if (xp) return x.hint.score > y.hint.score;
      return x.distance < y.distance;
    });
  }

  std::vector<Hint> out;
  for (auto& c : cands) {
    if (static_cast<int>(out.size()) >= k) break;
    out.push_back(std::move(c.hint));
  }
  return out;
}

std::string render_question(const Hint& hint, const std::vector<std::string>& class_names,
                            const std::vector<std::string>& attribute_names) {
  auto name_of = [](const std::vector<std::string>& names, int i, const char* what) -> const std::string& {
    if (i < 0 || i >= static_cast<int>(names.size()))
      fail(ErrorKind::invalid_argument, std::string("no name for ") + what + " " + std::to_string(i));
    return names[static_cast<size_t>(i)];
  };
  std::string text = "What is the most visible attribute between classes " +
                     name_of(class_names, hint.class_a, "class") + " and " + name_of(class_names, hint.class_b, "class");
  const auto& ex = hint.excluded_attributes;
  if (!ex.empty()) {
    std::vector<int> sorted = ex;
    std::sort(sorted.begin(), sorted.end());
    text += sorted.size() == 1 ? " except attribute " : " except attributes ";
    for (size_t i = 0; i < sorted.size(); ++i) {
      if (i > 0) text += sorted.size() == 2 ? " and " : (i + 1 == sorted.size() ? ", and " : ", ");
      text += name_of(attribute_names, sorted[i], "attribute");
    }
  }
  return text + "?";
}

}  // namespace zsnav
