#include "zsnav/tsne.hpp"

#include "zsnav/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace zsnav {

double default_perplexity(Index n) { return std::min(30.0, static_cast<double>(n - 1) / 3.0); }

SparseMatrix joint_affinities(const Matrix& high, double perplexity) {
  const Index n = high.rows();
  require(n >= 2, "affinities need at least two points");
  require(perplexity > 0.0, "perplexity must be positive");
  const Index k = std::min<Index>(n - 1, std::max<Index>(1, static_cast<Index>(std::floor(3.0 * perplexity))));
  const double target_entropy = std::log(perplexity);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n * k));
  constexpr Index kBlock = 256;
  std::vector<Index> order(static_cast<size_t>(n));
  std::vector<double> nd(static_cast<size_t>(k)), pj(static_cast<size_t>(k));
  for (Index start = 0; start < n; start += kBlock) {
    const Index rows = std::min(kBlock, n - start);
    const Matrix dist = pairwise_squared_distances(high.middleRows(start, rows), high);
    for (Index r = 0; r < rows; ++r) {
      const Index i = start + r;
      std::iota(order.begin(), order.end(), Index{0});
      auto less = [&](Index a, Index b) {
        if (a == i) return false;
        if (b == i) return true;
        return dist(r, a) < dist(r, b) || (dist(r, a) == dist(r, b) && a < b);
      };
      std::partial_sort(order.begin(), order.begin() + k, order.end(), less);
      for (Index t = 0; t < k; ++t) nd[static_cast<size_t>(t)] = dist(r, order[static_cast<size_t>(t)]);
      const double d0 = nd[0];

      double beta = 1.0, lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      // Scale-aware start so the search converges on any distance scale.
      const double spread = nd.back() - d0;
      if (spread > 0.0) beta = 1.0 / spread;
      double sum = 0.0;
      for (int iter = 0; iter < 200; ++iter) {
        sum = 0.0;
        double weighted = 0.0;
        for (Index t = 0; t < k; ++t) {
          const double shifted = nd[static_cast<size_t>(t)] - d0;
          pj[static_cast<size_t>(t)] = std::exp(-beta * shifted);
          sum += pj[static_cast<size_t>(t)];
          weighted += shifted * pj[static_cast<size_t>(t)];
        }
        const double entropy = std::log(sum) + beta * weighted / sum;
        const double diff = entropy - target_entropy;
        if (std::abs(diff) < 1e-10) break;
        if (diff > 0) {
          lo = beta;
          beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
          hi = beta;
          beta = std::isinf(lo) ? beta * 0.5 : 0.5 * (beta + lo);
        }
      }
      for (Index t = 0; t < k; ++t)
        trip.emplace_back(i, order[static_cast<size_t>(t)], pj[static_cast<size_t>(t)] / sum);
    }
  }
  SparseMatrix cond(n, n);
  cond.setFromTriplets(trip.begin(), trip.end());
  SparseMatrix joint = SparseMatrix(cond.transpose()) + cond;
  joint /= 2.0 * static_cast<double>(n);
  joint.makeCompressed();
  return joint;
}

namespace {

// Sum over i != j of 1 / (1 + |y_i - y_j|^2).
double normalizer(const Matrix& y) {
  const Index n = y.rows();
  double z = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double xi = y(i, 0), yi = y(i, 1);
    for (Index j = i + 1; j < n; ++j) {
      const double dx = xi - y(j, 0), dy = yi - y(j, 1);
      z += 2.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  return z;
}

Matrix pca_init(const Matrix& high) {
  const Index n = high.rows();
  Matrix centered = high.rowwise() - column_mean(high).transpose();
  Matrix y = Matrix::Zero(n, 2);
  const Index components = std::min<Index>(2, centered.cols());
  if (centered.cols() <= n) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(centered.transpose() * centered);
    for (Index c = 0; c < components; ++c) {
      Vector v = es.eigenvectors().col(centered.cols() - 1 - c);
      Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      y.col(c) = centered * v;
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(centered * centered.transpose());
    for (Index c = 0; c < components; ++c) {
      Vector u = es.eigenvectors().col(n - 1 - c);
      Vector v = centered.transpose() * u;
      Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) u = -u;
      y.col(c) = u * std::sqrt(std::max(es.eigenvalues()(n - 1 - c), 0.0));
    }
  }
  const double sd = std::sqrt((y.col(0).array() - y.col(0).mean()).square().mean());
  if (sd > 0.0) {
    y *= 1e-4 / sd;
  } else {
    // Degenerate input: spread points on a tiny deterministic spiral.
    for (Index i = 0; i < n; ++i) {
      const double a = 2.399963 * static_cast<double>(i);
      y(i, 0) = 1e-4 * std::cos(a) * std::sqrt(static_cast<double>(i + 1));
      y(i, 1) = 1e-4 * std::sin(a) * std::sqrt(static_cast<double>(i + 1));
    }
  }
  return y;
}

}  // namespace

double kl_divergence(const SparseMatrix& p, const Matrix& y) {
  const double z = normalizer(y);
  double kl = 0.0;
  for (Index i = 0; i < p.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(p, i); it; ++it) {
      if (it.value() <= 0.0) continue;
      const double d2 = (y.row(i) - y.row(it.col())).squaredNorm();
      const double q = 1.0 / (1.0 + d2) / z;
      kl += it.value() * std::log(it.value() / std::max(q, 1e-300));
    }
  return kl;
}

Matrix tsne_embed(const Matrix& high, const TsneOptions& opt, const Progress& progress, const std::atomic<bool>* cancel) {
  const Index n = high.rows();
  require(n >= 2, "t-SNE needs at least two points");
  const double perplexity = opt.perplexity > 0.0 ? opt.perplexity : default_perplexity(n);
  const SparseMatrix p = joint_affinities(high, perplexity);

  Matrix y = pca_init(high);
  Matrix update = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  Matrix grad(n, 2), repulse(n, 2);

  for (int it = 0; it < opt.iterations; ++it) {
    if (cancel && cancel->load()) break;
    const double exag = it < opt.exaggeration_iterations ? opt.exaggeration : 1.0;
    const double mom = it < opt.exaggeration_iterations ? opt.momentum : opt.final_momentum;

    repulse.setZero();
    double z = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double xi = y(i, 0), yi = y(i, 1);
      for (Index j = i + 1; j < n; ++j) {
        const double dx = xi - y(j, 0), dy = yi - y(j, 1);
        const double num = 1.0 / (1.0 + dx * dx + dy * dy);
        z += 2.0 * num;
        const double n2 = num * num;
        repulse(i, 0) += n2 * dx, repulse(i, 1) += n2 * dy;
        repulse(j, 0) -= n2 * dx, repulse(j, 1) -= n2 * dy;
      }
    }
    grad = -repulse / z;
    for (Index i = 0; i < n; ++i)
      for (SparseMatrix::InnerIterator e(p, i); e; ++e) {
        const Index j = e.col();
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        const double w = exag * e.value() / (1.0 + dx * dx + dy * dy);
        grad(i, 0) += w * dx, grad(i, 1) += w * dy;
      }
    grad *= 4.0;

    for (Index i = 0; i < grad.size(); ++i) {
      double& g = gains.data()[i];
      g = ((grad.data()[i] > 0) != (update.data()[i] > 0)) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      update.data()[i] = mom * update.data()[i] - opt.learning_rate * g * grad.data()[i];
    }
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (progress && (it + 1) % 50 == 0) progress(static_cast<double>(it + 1) / opt.iterations);
  }
  return y;
}

AnchoredResult anchored_reproject(const Matrix& anchor_high, const Matrix& anchor_low, const Matrix& movable_high,
                                  const Matrix& movable_init, const AnchoredOptions& opt, const Progress& progress,
                                  const std::atomic<bool>* cancel) {
  const Index na = anchor_high.rows();
  const Index m = movable_high.rows();
  require(anchor_low.rows() == na && anchor_low.cols() == 2, "anchor coordinates must be n x 2");
  require(movable_init.rows() == m && movable_init.cols() == 2, "movable coordinates must be m x 2");
  require(anchor_high.cols() == movable_high.cols(), "anchor and movable dimensions differ");

  const Index n = na + m;
  Matrix high(n, anchor_high.cols());
  high << anchor_high, movable_high;
  const SparseMatrix p = joint_affinities(high, default_perplexity(n));

  Matrix y(n, 2);
  y << anchor_low, movable_init;
  const double z_anchor = normalizer(anchor_low);

  AnchoredResult res;
  res.kl_initial = kl_divergence(p, y);
  Matrix velocity = Matrix::Zero(m, 2);
  Matrix grad(m, 2);
  for (res.iterations = 0; res.iterations < opt.iterations; ++res.iterations) {
    if (cancel && cancel->load()) {
      res.cancelled = true;
      break;
    }
    // Z = anchor-anchor part (constant) + twice movable-anchor + movable-movable.
    double z = z_anchor;
    Matrix repulse = Matrix::Zero(m, 2);
    for (Index a = 0; a < m; ++a) {
      const Index i = na + a;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        const double num = 1.0 / (1.0 + dx * dx + dy * dy);
        z += j < na ? 2.0 * num : num;
        repulse(a, 0) += num * num * dx, repulse(a, 1) += num * num * dy;
      }
    }
    grad = -repulse / z;
    for (Index a = 0; a < m; ++a) {
      const Index i = na + a;
      for (SparseMatrix::InnerIterator e(p, i); e; ++e) {
        const Index j = e.col();
        const double dx = y(i, 0) - y(j, 0), dy = y(i, 1) - y(j, 1);
        const double w = e.value() / (1.0 + dx * dx + dy * dy);
        grad(a, 0) += w * dx, grad(a, 1) += w * dy;
      }
    }
    grad *= 4.0;
    velocity = opt.momentum * velocity - opt.learning_rate * grad;
    y.bottomRows(m) += velocity;
    if (progress && (res.iterations + 1) % 30 == 0) progress(static_cast<double>(res.iterations + 1) / opt.iterations);
  }
  res.movable = y.bottomRows(m);
  res.kl_final = kl_divergence(p, y);
  return res;
}

}  // namespace zsnav
