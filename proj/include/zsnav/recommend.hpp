#pragma once

#include "zsnav/embed.hpp"
#include "zsnav/hints.hpp"
#include "zsnav/optim.hpp"
#include "zsnav/smo.hpp"

#include <map>
#include <optional>
#include <vector>

namespace zsnav {

// Class -> +1 / -1.
using LabelMap = std::map<int, int>;

struct RecommendOptions {
  double labeled_cost = 10.0;
  double unlabeled_cost = 10.0;
  std::vector<double> anneal{0.01, 0.1, 1.0};  // unlabeled weight schedule
  double hinge_sharpness = 20.0;               // softplus approximation of the labeled hinge
  double unlabeled_sharpness = 3.0;            // exp(-s f^2) symmetric unlabeled loss
  LbfgsOptions lbfgs{10, 500, 1e-6};
  bool balance = true;  // mean unlabeled decision value tied to the mean fixed label
  bool refine = true;   // single-flip label switching on the supervised margin
  int exact_limit = 16; // branch and bound over the free classes up to this many
  double hard_margin_c = 1e8;
  SmoOptions hard_margin_smo{1e-9, 200000};
};

struct DraftAttribute {
  std::vector<int> classes;  // seen classes, ascending (exemplar order)
  LabelMap fixed_labels;
  std::vector<int> recommended;  // +1/-1 aligned with `classes`
  Vector w;                      // hyperplane in the mutual space
  double b = 0.0;
  double margin = 0.0;           // 2 / |w|
  bool separable = true;
  Vector decision;               // w'x + b per class
  std::optional<Hint> origin_hint;
  std::vector<IntVector> excluded_labelings;  // 0/1 over `classes`
  bool conflicts_with_existing = false;       // only when every class is analyst-fixed

  int label_of(int cls) const;
  LabelMap recommended_map() const;
  IntVector as_column() const;  // 0/1 aligned with `classes`
};

DraftAttribute recommend_labels(const ExemplarSet& exemplars, const LabelMap& fixed,
                                const std::vector<IntVector>& excluded_labelings, const RecommendOptions& options = {},
                                const std::vector<int>* warm_start = nullptr);

DraftAttribute apply_feedback(const DraftAttribute& draft, const LabelMap& edits, const ExemplarSet& exemplars,
                              const RecommendOptions& options = {});

DraftAttribute reverse(const DraftAttribute& draft);

// Supervised hard margin of a complete labeling of `points` (rows); 0 when the labeling is not separable.
double labeling_margin(const Matrix& points, const std::vector<int>& labels, const RecommendOptions& options = {});

// Discrete balance rule: with two or more free classes, both signs must appear among them.
bool balance_feasible(const std::vector<int>& labels, const std::vector<bool>& is_fixed);

bool matches_labeling(const std::vector<int>& labels, const IntVector& column01);

}  // namespace zsnav
