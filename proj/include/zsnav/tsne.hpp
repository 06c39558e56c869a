#pragma once

#include "zsnav/common.hpp"

#include <Eigen/SparseCore>

#include <atomic>
#include <functional>

namespace zsnav {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Symmetric joint affinities P (sums to 1) from Gaussian conditionals calibrated
// to `perplexity` over each point's min(n-1, 3*perplexity) nearest neighbours.
SparseMatrix joint_affinities(const Matrix& high, double perplexity);

double default_perplexity(Index n);

// KL(P || Q) for a 2-D embedding with Student-t similarities.
double kl_divergence(const SparseMatrix& p, const Matrix& low);

struct TsneOptions {
  double perplexity = 0.0;  // <= 0 selects min(30, (n-1)/3)
  int iterations = 1000;
  int exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
};

using Progress = std::function<void(double fraction)>;

// Exact-gradient t-SNE from a PCA-2D initialization.
Matrix tsne_embed(const Matrix& high, const TsneOptions& options, const Progress& progress = {},
                  const std::atomic<bool>* cancel = nullptr);

struct AnchoredOptions {
  int iterations = 300;
  double momentum = 0.5;
  double learning_rate = 50.0;
};

struct AnchoredResult {
  Matrix movable;  // final 2-D positions
  double kl_initial = 0.0;
  double kl_final = 0.0;
  int iterations = 0;
  bool cancelled = false;
};

// Recomputes joint affinities over anchors + movable points and runs gradient
// descent on the movable 2-D positions only; anchor coordinates are read-only.
AnchoredResult anchored_reproject(const Matrix& anchor_high, const Matrix& anchor_low, const Matrix& movable_high,
                                  const Matrix& movable_init, const AnchoredOptions& options,
                                  const Progress& progress = {}, const std::atomic<bool>* cancel = nullptr);

}  // namespace zsnav
