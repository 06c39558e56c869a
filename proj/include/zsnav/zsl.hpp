#pragma once

#include "zsnav/common.hpp"
#include "zsnav/data.hpp"
#include "zsnav/embed.hpp"
#include "zsnav/smo.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zsnav {

// Binary N x M class-attribute matrix, row c is the prototype of class c.
class ClassAttributeMatrix {
 public:
  ClassAttributeMatrix() = default;
  explicit ClassAttributeMatrix(int n_classes) : values_(n_classes, 0) {}
  ClassAttributeMatrix(IntMatrix values, std::vector<std::string> names);

  Index n_classes() const { return values_.rows(); }
  Index n_attributes() const { return values_.cols(); }
  const IntMatrix& values() const { return values_; }
  const std::vector<std::string>& attribute_names() const { return names_; }

  IntVector prototype(int cls) const { return values_.row(cls).transpose(); }
  bool rows_equal(int a, int b) const { return values_.row(a) == values_.row(b); }
  std::vector<int> differing_attributes(int a, int b) const;
  bool has_attribute(const std::string& name) const;

  void append(const std::string& name, const IntVector& column);
  void remove_last();

  bool operator==(const ClassAttributeMatrix& other) const {
    return values_ == other.values_ && names_ == other.names_;
  }

 private:
  IntMatrix values_;
  std::vector<std::string> names_;
};

ClassAttributeMatrix matrix_from_table(const NamedBinaryTable& table, const FeatureDataset& dataset);
NamedBinaryTable matrix_to_table(const ClassAttributeMatrix& matrix, const FeatureDataset& dataset);

struct ExemHyper {
  double gamma = 0.0;           // <= 0 selects 1 / M
  double c = 10.0;
  double epsilon_factor = 0.1;  // tube = factor * std of the per-dimension targets
  SmoOptions smo{1e-4, 100000};
  bool standardize_targets = false;
  bool standardized_distance = false;
};

// psi: prototype -> predicted exemplar, one epsilon-SVR per mutual-space dimension.
class ExemModel {
 public:
  Index dim() const { return coef_.cols(); }
  Index n_attributes() const { return train_prototypes_.cols(); }
  Index n_regressors() const { return coef_.cols(); }
  double gamma() const { return gamma_; }
  const Vector& epsilons() const { return epsilons_; }
  const IntMatrix& trained_on() const { return trained_on_; }
  const std::vector<SvrFit>& fits() const { return fits_; }

  Vector predict(const IntVector& prototype) const;
  Matrix predict_rows(const IntMatrix& prototypes) const;

  // Distance used by the nearest-exemplar rule.
  double distance(const Vector& a, const Vector& b) const;

 private:
  friend ExemModel train_exem(const ClassAttributeMatrix&, const ExemplarSet&, const ExemHyper&,
                              std::vector<std::string>*);

  Matrix train_prototypes_;  // N_s x M
  Matrix coef_;              // N_s x d
  Vector bias_;              // d
  Vector target_mean_, target_scale_;
  Vector distance_weights_;  // empty for plain Euclidean
  Vector epsilons_;
  std::vector<SvrFit> fits_;
  IntMatrix trained_on_;  // full matrix snapshot
  double gamma_ = 0.0;
};

// Fits psi on the seen rows. Warnings (e.g. all prototypes identical) are appended to `warnings`.
ExemModel train_exem(const ClassAttributeMatrix& matrix, const ExemplarSet& exemplars, const ExemHyper& hyper,
                     std::vector<std::string>* warnings = nullptr);

Vector predict_exemplar(const ExemModel& model, const IntVector& prototype);

// Rows of `predicted` are candidate exemplars; returns the row position of the nearest (lowest position on ties).
Index nearest_row(const ExemModel& model, const Vector& point, const Matrix& predicted);

int classify(const ExemModel& model, const MutualSpace& space, const Vector& x, std::span<const int> candidates,
             const ClassAttributeMatrix& matrix);

struct Accuracy {
  std::optional<double> train;  // macro-averaged percent over seen classes
  std::optional<double> test;   // macro-averaged percent over unseen classes
};

Accuracy evaluate(const ExemModel& model, const MutualSpace& space, const FeatureDataset& dataset,
                  const ClassAttributeMatrix& matrix);
// Same as evaluate, with every dataset row already projected into the mutual space.
Accuracy evaluate_projected(const ExemModel& model, const Matrix& projected, const FeatureDataset& dataset,
                            const ClassAttributeMatrix& matrix);

struct ConfusionMatrix {
  std::vector<int> classes;  // seen classes, ascending
  Matrix percent;            // row: true class, column: predicted class

  double at(int true_cls, int predicted_cls) const;
};

ConfusionMatrix confusion(const ExemModel& model, const MutualSpace& space, const FeatureDataset& dataset,
                          const ClassAttributeMatrix& matrix);
ConfusionMatrix confusion_projected(const ExemModel& model, const Matrix& projected, const FeatureDataset& dataset,
                                    const ClassAttributeMatrix& matrix);

}  // namespace zsnav
