#pragma once

#include "zsnav/common.hpp"

#include <span>
#include <vector>

namespace zsnav {

// Squared Euclidean distances between the rows of `a` and the rows of `b`.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> pairwise_squared_distances(const Eigen::MatrixBase<DerivedA>& a,
                                                              const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const VectorX<Scalar> na = a.rowwise().squaredNorm();
  const VectorX<Scalar> nb = b.rowwise().squaredNorm();
  MatrixX<Scalar> d = (-2 * a * b.transpose()).eval();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(Scalar(0));
}

// Exact row-by-row distances; slower than the Gram route but free of cancellation.
template <typename DerivedA, typename DerivedB>
VectorX<typename DerivedA::Scalar> squared_distances_to(const Eigen::MatrixBase<DerivedA>& rows,
                                                        const Eigen::MatrixBase<DerivedB>& point) {
  return (rows.rowwise() - point.transpose()).rowwise().squaredNorm();
}

// max |R R^T - I| over all entries.
template <typename Derived>
typename Derived::Scalar orthonormality_error(const Eigen::MatrixBase<Derived>& rows) {
  using Scalar = typename Derived::Scalar;
  const MatrixX<Scalar> g = rows * rows.transpose();
  return (g - MatrixX<Scalar>::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

template <typename Derived>
MatrixX<typename Derived::Scalar> select_rows(const Eigen::MatrixBase<Derived>& m, std::span<const Index> rows) {
  MatrixX<typename Derived::Scalar> out(static_cast<Index>(rows.size()), m.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = m.row(rows[static_cast<size_t>(i)]);
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> column_mean(const Eigen::MatrixBase<Derived>& m) {
  return m.colwise().mean().transpose();
}

}  // namespace zsnav
