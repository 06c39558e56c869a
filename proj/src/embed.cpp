#include "zsnav/embed.hpp"

#include "zsnav/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>

namespace zsnav {

namespace {

// Largest-magnitude entry of each row made positive; first index wins ties.
void fix_signs(Matrix& rows) {
  for (Index r = 0; r < rows.rows(); ++r) {
    Index arg = 0;
    rows.row(r).cwiseAbs().maxCoeff(&arg);
    if (rows(r, arg) < 0) rows.row(r) *= -1.0;
  }
}

constexpr Index kCovarianceRouteLimit = 4096;

}  // namespace

PcaResult fit_pca(const Matrix& train, Index d) {
  const Index n = train.rows();
  const Index dim = train.cols();
  if (n < 2) fail(ErrorKind::invalid_argument, "PCA needs at least two training instances");
  if (d < 1 || d > dim)
    fail(ErrorKind::invalid_argument, "target dimension " + std::to_string(d) + " outside [1, " + std::to_string(dim) + "]");

  PcaResult result;
  MutualSpace& space = result.space;
  space.mean = column_mean(train);
  const Matrix centered = train.rowwise() - space.mean.transpose();

  Vector eigenvalues;  // descending
  Matrix directions;   // columns, same order
  if (dim <= kCovarianceRouteLimit) {
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
    if (es.info() != Eigen::Success) fail(ErrorKind::invalid_argument, "covariance eigendecomposition failed");
    eigenvalues = es.eigenvalues().reverse();
    directions = es.eigenvectors().rowwise().reverse();
  } else {
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    eigenvalues = svd.singularValues().array().square() / static_cast<double>(n - 1);
    directions = svd.matrixV();
  }

  const double top = std::max(eigenvalues.size() > 0 ? eigenvalues(0) : 0.0, 0.0);
  const double tol = top * 1e-12 * static_cast<double>(std::max(n, dim));
  Index rank = 0;
  while (rank < eigenvalues.size() && eigenvalues(rank) > tol) ++rank;
  if (rank == 0) fail(ErrorKind::invalid_argument, "training data has zero variance");
  if (d > rank) {
    result.warnings.push_back("requested d=" + std::to_string(d) + " exceeds data rank " + std::to_string(rank) +
                              "; using d=" + std::to_string(rank));
    d = rank;
  }

  space.projection = directions.leftCols(d).transpose();
  fix_signs(space.projection);
  space.variances = eigenvalues.head(d);
  return result;
}

Matrix project_rows(const MutualSpace& space, const Matrix& rows) {
  if (rows.cols() != space.input_dim()) fail(ErrorKind::invalid_argument, "feature dimension mismatch");
  return (rows.rowwise() - space.mean.transpose()) * space.projection.transpose();
}

Index ExemplarSet::row_of(int cls) const {
  auto it = std::lower_bound(classes.begin(), classes.end(), cls);
  return (it != classes.end() && *it == cls) ? static_cast<Index>(it - classes.begin()) : -1;
}

ExemplarSet compute_exemplars(const MutualSpace& space, const FeatureDataset& ds) {
  ExemplarSet ex;
  ex.classes = ds.seen_classes;
  ex.points = Matrix::Zero(static_cast<Index>(ex.classes.size()), space.dim());
  std::vector<Index> counts(ex.classes.size(), 0);
  const Matrix projected = project_rows(space, ds.instances);
  for (Index i = 0; i < ds.size(); ++i) {
    const Index r = ex.row_of(ds.class_of[static_cast<size_t>(i)]);
    if (r < 0) continue;
    ex.points.row(r) += projected.row(i);
    ++counts[static_cast<size_t>(r)];
  }
  for (size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] == 0)
      fail(ErrorKind::invalid_argument, "seen class '" + ds.class_names[static_cast<size_t>(ex.classes[r])] + "' has no training instances");
    ex.points.row(static_cast<Index>(r)) /= static_cast<double>(counts[r]);
  }
  return ex;
}

}  // namespace zsnav
