#pragma once

#include "zsnav/common.hpp"
#include "zsnav/data.hpp"

#include <string>
#include <vector>

namespace zsnav {

// Linear map from feature space into the mutual space: x -> projection * (x - mean).
struct MutualSpace {
  Matrix projection;  // d x D, orthonormal rows, descending variance
  Vector mean;        // D
  Vector variances;   // d, eigenvalues of the training covariance

  Index dim() const { return projection.rows(); }
  Index input_dim() const { return projection.cols(); }
};

struct PcaResult {
  MutualSpace space;
  std::vector<std::string> warnings;  // e.g. d reduced to the data rank
};

// Covariance eigendecomposition for D <= 4096, thin SVD of the centered data otherwise.
// A request above the numerical rank is reduced to the rank with a warning.
PcaResult fit_pca(const Matrix& train_instances, Index d);

template <typename Derived>
Vector project(const MutualSpace& space, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != space.input_dim())
    fail(ErrorKind::invalid_argument, "feature vector has dimension " + std::to_string(x.size()) + ", expected " +
                                          std::to_string(space.input_dim()));
  return space.projection * (x - space.mean);
}

// Projects every row of `rows`.
Matrix project_rows(const MutualSpace& space, const Matrix& rows);

// Per seen class, the mean of its projected training instances.
struct ExemplarSet {
  std::vector<int> classes;  // seen class indices, ascending
  Matrix points;             // row i belongs to classes[i]

  Index size() const { return points.rows(); }
  Index row_of(int cls) const;  // -1 when absent
};

ExemplarSet compute_exemplars(const MutualSpace& space, const FeatureDataset& dataset);

}  // namespace zsnav
