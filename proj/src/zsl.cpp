#include "zsnav/zsl.hpp"

#include "zsnav/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zsnav {

ClassAttributeMatrix::ClassAttributeMatrix(IntMatrix values, std::vector<std::string> names)
    : values_(std::move(values)), names_(std::move(names)) {
  require(static_cast<Index>(names_.size()) == values_.cols(), "attribute name count does not match columns");
  require((values_.array() == 0 || values_.array() == 1).all(), "class-attribute entries must be 0 or 1");
  for (size_t i = 0; i < names_.size(); ++i) {
    require(!names_[i].empty(), "attribute names must be nonempty");
    for (size_t j = 0; j < i; ++j) require(names_[i] != names_[j], "duplicate attribute name '" + names_[i] + "'");
  }
}

std::vector<int> ClassAttributeMatrix::differing_attributes(int a, int b) const {
  std::vector<int> out;
  for (Index k = 0; k < values_.cols(); ++k)
    if (values_(a, k) != values_(b, k)) out.push_back(static_cast<int>(k));
  return out;
}

bool ClassAttributeMatrix::has_attribute(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

void ClassAttributeMatrix::append(const std::string& name, const IntVector& column) {
  require(!name.empty(), "attribute names must be nonempty");
  if (has_attribute(name)) fail(ErrorKind::conflict, "attribute '" + name + "' already exists");
  require(column.size() == values_.rows(), "column length does not match the class count");
  require((column.array() == 0 || column.array() == 1).all(), "class-attribute entries must be 0 or 1");
  values_.conservativeResize(Eigen::NoChange, values_.cols() + 1);
  values_.col(values_.cols() - 1) = column;
  names_.push_back(name);
}

void ClassAttributeMatrix::remove_last() {
  if (values_.cols() == 0) fail(ErrorKind::invalid_argument, "matrix has no attributes");
  values_.conservativeResize(Eigen::NoChange, values_.cols() - 1);
  names_.pop_back();
}

ClassAttributeMatrix matrix_from_table(const NamedBinaryTable& table, const FeatureDataset& ds) {
  const GroundTruthMatrix aligned = align_ground_truth(table, ds);
  return ClassAttributeMatrix(aligned.values, aligned.attribute_names);
}

NamedBinaryTable matrix_to_table(const ClassAttributeMatrix& matrix, const FeatureDataset& ds) {
  return NamedBinaryTable{ds.class_names, matrix.attribute_names(), matrix.values()};
}

ExemModel train_exem(const ClassAttributeMatrix& matrix, const ExemplarSet& exemplars, const ExemHyper& hyper,
                     std::vector<std::string>* warnings) {
  const Index m = matrix.n_attributes();
  if (m == 0) fail(ErrorKind::invalid_argument, "cannot train on an empty class-attribute matrix");
  const Index ns = exemplars.size();
  require(ns >= 1, "no exemplars");
  for (int c : exemplars.classes)
    if (c < 0 || c >= matrix.n_classes()) fail(ErrorKind::invalid_argument, "exemplar class outside the matrix");

  ExemModel model;
  model.trained_on_ = matrix.values();
  model.train_prototypes_.resize(ns, m);
  for (Index i = 0; i < ns; ++i)
    model.train_prototypes_.row(i) = matrix.values().row(exemplars.classes[static_cast<size_t>(i)]).cast<double>();
  bool all_identical = true;
  for (Index i = 1; i < ns && all_identical; ++i)
    all_identical = model.train_prototypes_.row(i) == model.train_prototypes_.row(0);
  if (all_identical && warnings) warnings->push_back("all seen prototypes are identical; predictions collapse");

  model.gamma_ = hyper.gamma > 0.0 ? hyper.gamma : 1.0 / static_cast<double>(m);
  const Matrix kernel = rbf_kernel(model.train_prototypes_, model.train_prototypes_, model.gamma_);

  const Index d = exemplars.points.cols();
  Matrix targets = exemplars.points;
  model.target_mean_ = Vector::Zero(d);
  model.target_scale_ = Vector::Ones(d);
  if (hyper.standardize_targets) {
    model.target_mean_ = column_mean(targets);
    targets.rowwise() -= model.target_mean_.transpose();
    for (Index j = 0; j < d; ++j) {
      const double sd = std::sqrt(targets.col(j).squaredNorm() / static_cast<double>(ns));
      model.target_scale_(j) = sd > 0.0 ? sd : 1.0;
      targets.col(j) /= model.target_scale_(j);
    }
  }
  if (hyper.standardized_distance) {
    const Matrix centered = exemplars.points.rowwise() - column_mean(exemplars.points).transpose();
    model.distance_weights_ = (centered.colwise().squaredNorm() / static_cast<double>(ns)).transpose();
    for (Index j = 0; j < d; ++j)
      model.distance_weights_(j) = model.distance_weights_(j) > 0.0 ? 1.0 / model.distance_weights_(j) : 1.0;
  }

  model.coef_.resize(ns, d);
  model.bias_.resize(d);
  model.epsilons_.resize(d);
  model.fits_.reserve(static_cast<size_t>(d));
  for (Index j = 0; j < d; ++j) {
    const Vector z = targets.col(j);
    const double sd = std::sqrt((z.array() - z.mean()).square().sum() / static_cast<double>(ns));
    model.epsilons_(j) = hyper.epsilon_factor * sd;
    SvrFit fit = fit_svr(kernel, z, hyper.c, model.epsilons_(j), hyper.smo);
    model.coef_.col(j) = fit.coef;
    model.bias_(j) = fit.bias;
    model.fits_.push_back(std::move(fit));
  }
  return model;
}

Vector ExemModel::predict(const IntVector& prototype) const {
  if (prototype.size() != n_attributes())
    fail(ErrorKind::invalid_argument, "prototype has " + std::to_string(prototype.size()) + " attributes, model expects " +
                                          std::to_string(n_attributes()));
  const Vector p = prototype.cast<double>();
  const Vector k = (-gamma_ * squared_distances_to(train_prototypes_, p)).array().exp();
  const Vector z = coef_.transpose() * k + bias_;
  return (z.array() * target_scale_.array() + target_mean_.array()).matrix();
}

Matrix ExemModel::predict_rows(const IntMatrix& prototypes) const {
  Matrix out(prototypes.rows(), dim());
  for (Index r = 0; r < prototypes.rows(); ++r) out.row(r) = predict(prototypes.row(r).transpose()).transpose();
  return out;
}

double ExemModel::distance(const Vector& a, const Vector& b) const {
  if (distance_weights_.size() == 0) return (a - b).norm();
  return std::sqrt(((a - b).array().square() * distance_weights_.array()).sum());
}

Vector predict_exemplar(const ExemModel& model, const IntVector& prototype) { return model.predict(prototype); }

Index nearest_row(const ExemModel& model, const Vector& point, const Matrix& predicted) {
  require(predicted.rows() > 0, "no candidate exemplars");
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index r = 0; r < predicted.rows(); ++r) {
    const double dist = model.distance(point, predicted.row(r).transpose());
    if (dist < best_d) best_d = dist, best = r;
  }
  return best;
}

namespace {

Matrix candidate_exemplars(const ExemModel& model, std::span<const int> candidates, const ClassAttributeMatrix& matrix) {
  Matrix out(static_cast<Index>(candidates.size()), model.dim());
  for (size_t i = 0; i < candidates.size(); ++i) {
    const int c = candidates[i];
    if (c < 0 || c >= matrix.n_classes()) fail(ErrorKind::invalid_argument, "candidate class has no prototype");
    out.row(static_cast<Index>(i)) = model.predict(matrix.prototype(c)).transpose();
  }
  return out;
}

// Predicted class per instance in `rows`, candidates given as class indices.
std::vector<int> predict_instances(const ExemModel& model, const Matrix& projected, std::span<const Index> rows,
                                   std::span<const int> candidates, const ClassAttributeMatrix& matrix) {
  const Matrix predicted = candidate_exemplars(model, candidates, matrix);
  std::vector<int> out;
  out.reserve(rows.size());
  for (Index r : rows)
    out.push_back(candidates[static_cast<size_t>(nearest_row(model, projected.row(r).transpose(), predicted))]);
  return out;
}

std::optional<double> macro_accuracy(const FeatureDataset& ds, std::span<const Index> rows, const std::vector<int>& predicted,
                                     std::span<const int> classes) {
  if (rows.empty()) return std::nullopt;
  double sum = 0.0;
  int n_present = 0;
  for (int c : classes) {
    int total = 0, hit = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (ds.class_of[static_cast<size_t>(rows[i])] != c) continue;
      ++total;
      hit += predicted[i] == c;
    }
    if (total == 0) continue;
    sum += 100.0 * hit / total;
    ++n_present;
  }
  if (n_present == 0) return std::nullopt;
  return sum / n_present;
}

}  // namespace

int classify(const ExemModel& model, const MutualSpace& space, const Vector& x, std::span<const int> candidates,
             const ClassAttributeMatrix& matrix) {
  if (candidates.empty()) fail(ErrorKind::invalid_argument, "empty candidate set");
  const Matrix predicted = candidate_exemplars(model, candidates, matrix);
  return candidates[static_cast<size_t>(nearest_row(model, project(space, x), predicted))];
}

Accuracy evaluate_projected(const ExemModel& model, const Matrix& projected, const FeatureDataset& ds,
                            const ClassAttributeMatrix& matrix) {
  Accuracy acc;
  const auto train = ds.training_indices();
  if (!train.empty()) {
    const auto pred = predict_instances(model, projected, train, ds.seen_classes, matrix);
    acc.train = macro_accuracy(ds, train, pred, ds.seen_classes);
  }
  const auto test = ds.test_indices();
  if (!test.empty()) {
    const auto pred = predict_instances(model, projected, test, ds.unseen_classes, matrix);
    acc.test = macro_accuracy(ds, test, pred, ds.unseen_classes);
  }
  return acc;
}

Accuracy evaluate(const ExemModel& model, const MutualSpace& space, const FeatureDataset& ds,
                  const ClassAttributeMatrix& matrix) {
  return evaluate_projected(model, project_rows(space, ds.instances), ds, matrix);
}

double ConfusionMatrix::at(int true_cls, int predicted_cls) const {
  auto row = std::lower_bound(classes.begin(), classes.end(), true_cls);
  auto col = std::lower_bound(classes.begin(), classes.end(), predicted_cls);
  if (row == classes.end() || *row != true_cls || col == classes.end() || *col != predicted_cls)
    fail(ErrorKind::invalid_argument, "class outside the confusion matrix");
  return percent(row - classes.begin(), col - classes.begin());
}

ConfusionMatrix confusion_projected(const ExemModel& model, const Matrix& projected, const FeatureDataset& ds,
                                    const ClassAttributeMatrix& matrix) {
  ConfusionMatrix cm;
  cm.classes = ds.seen_classes;
  const auto n = static_cast<Index>(cm.classes.size());
  cm.percent = Matrix::Zero(n, n);
  const auto train = ds.training_indices();
  const auto pred = predict_instances(model, projected, train, cm.classes, matrix);
  std::vector<int> totals(static_cast<size_t>(n), 0);
  auto pos = [&](int c) { return std::lower_bound(cm.classes.begin(), cm.classes.end(), c) - cm.classes.begin(); };
  for (size_t i = 0; i < train.size(); ++i) {
    const auto r = pos(ds.class_of[static_cast<size_t>(train[i])]);
    cm.percent(r, pos(pred[i])) += 1.0;
    ++totals[static_cast<size_t>(r)];
  }
  for (Index r = 0; r < n; ++r)
    if (totals[static_cast<size_t>(r)] > 0) cm.percent.row(r) *= 100.0 / totals[static_cast<size_t>(r)];
  return cm;
}

ConfusionMatrix confusion(const ExemModel& model, const MutualSpace& space, const FeatureDataset& ds,
                          const ClassAttributeMatrix& matrix) {
  return confusion_projected(model, project_rows(space, ds.instances), ds, matrix);
}

}  // namespace zsnav
