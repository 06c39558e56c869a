#include <doctest.h>

#include "oracles.hpp"
#include "zsnav/linalg.hpp"
#include "zsnav/contour.hpp"
#include "zsnav/tsne.hpp"

#include <random>

using namespace zsnav;

namespace {

Matrix blobs(int per, int k, int d, double sep, std::mt19937_64& rng, std::vector<int>* labels = nullptr) {
  std::normal_distribution<double> g;
  Matrix out(per * k, d);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < per; ++i) {
      for (int j = 0; j < d; ++j) out(c * per + i, j) = g(rng) + (j == c % d ? sep : 0.0) * (c < d ? 1 : -1);
      if (labels) labels->push_back(c);
    }
  return out;
}

// Dense reference: every other point is a neighbour.
Matrix dense_affinities(const Matrix& x, double perplexity) {
  const Index n = x.rows();
  Matrix cond = Matrix::Zero(n, n);
  const double target = std::log(perplexity);
  for (Index i = 0; i < n; ++i) {
    Vector d2(n);
    for (Index j = 0; j < n; ++j) d2(j) = (x.row(i) - x.row(j)).squaredNorm();
    double lo = 0.0, hi = 1e300, beta = 1.0;
    for (int it = 0; it < 500; ++it) {
      double z = 0.0, hsum = 0.0;
      const double dmin = [&]() {
        double m = 1e300;
        for (Index j = 0; j < n; ++j)
          if (j != i) m = std::min(m, d2(j));
        return m;
      }();
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = std::exp(-beta * (d2(j) - dmin));
        z += w;
        hsum += w * beta * (d2(j) - dmin);
      }
      const double h = std::log(z) + hsum / z;
      if (std::abs(h - target) < 1e-12) break;
      if (h > target) {
        lo = beta;
        beta = hi >= 1e300 ? beta * 2 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    double z = 0.0;
    for (Index j = 0; j < n; ++j)
      if (j != i) z += std::exp(-beta * d2(j));
    for (Index j = 0; j < n; ++j)
      if (j != i) cond(i, j) = std::exp(-beta * d2(j)) / z;
  }
  return (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
}

double dense_kl(const Matrix& p, const Matrix& y) {
  const Index n = y.rows();
  Matrix q(n, n);
  double z = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      q(i, j) = i == j ? 0.0 : 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      z += q(i, j);
    }
  double kl = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (p(i, j) > 0) kl += p(i, j) * std::log(p(i, j) / (q(i, j) / z));
  return kl;
}

}  // namespace

TEST_CASE("joint affinities match a dense reference") {
  std::mt19937_64 rng(1);
  const Matrix x = blobs(10, 2, 4, 3.0, rng);
  const SparseMatrix p = joint_affinities(x, 7.0);  // 3 * 7 >= n - 1, so the neighbourhood is complete
  const Matrix ref = dense_affinities(x, 7.0);
  const Matrix dense = Matrix(p);
  CHECK((dense - ref).cwiseAbs().maxCoeff() <= 1e-8 * ref.maxCoeff());
  CHECK(dense.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(dense.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sparse affinities are symmetric and normalized") {
  std::mt19937_64 rng(2);
  const Matrix x = blobs(40, 3, 5, 4.0, rng);
  const SparseMatrix p = joint_affinities(x, 5.0);
  const Matrix dense = Matrix(p);
  CHECK(dense.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((dense.array() >= 0).all());
  for (Index i = 0; i < dense.rows(); ++i) CHECK((dense.row(i).array() > 0).count() >= 15);
  CHECK((dense.array() > 0).count() < dense.size() / 2);
}

TEST_CASE("default perplexity") {
  CHECK(default_perplexity(1000) == 30.0);
  CHECK(default_perplexity(31) == doctest::Approx(10.0));
  CHECK(default_perplexity(4) >= 1.0);
}

TEST_CASE("kl divergence matches a dense reference") {
  std::mt19937_64 rng(3);
  const Matrix x = blobs(8, 2, 3, 2.0, rng);
  const SparseMatrix p = joint_affinities(x, 5.0);
  std::normal_distribution<double> g;
  const Matrix y = Matrix::NullaryExpr(16, 2, [&]() { return g(rng); });
  CHECK(kl_divergence(p, y) == doctest::Approx(dense_kl(Matrix(p), y)).epsilon(1e-10));
}

TEST_CASE("t-SNE separates clusters and is deterministic") {
  std::mt19937_64 rng(4);
  std::vector<int> labels;
  const Matrix x = blobs(30, 4, 10, 8.0, rng, &labels);
  TsneOptions opt;
  opt.iterations = 500;
  std::vector<double> seen;
  const Matrix y = tsne_embed(x, opt, [&](double f) { seen.push_back(f); });
  CHECK(y.rows() == 120);
  CHECK(y.cols() == 2);
  CHECK(oracle::silhouette(y, labels) > 0.5);
  REQUIRE_FALSE(seen.empty());
  CHECK(seen.back() == doctest::Approx(1.0));
  for (size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] >= seen[i - 1]);
  const Matrix y2 = tsne_embed(x, opt);
  CHECK(y2 == y);
  // Lower KL than a random layout of the same spread.
  const SparseMatrix p = joint_affinities(x, default_perplexity(120));
  std::normal_distribution<double> g;
  const double spread = std::sqrt((y.rowwise() - y.colwise().mean()).squaredNorm() / 120.0);
  const Matrix r = Matrix::NullaryExpr(120, 2, [&]() { return spread * g(rng); });
  CHECK(kl_divergence(p, y) < kl_divergence(p, r));
}

TEST_CASE("t-SNE handles duplicates and cancellation") {
  const Matrix same = Matrix::Ones(10, 3);
  const Matrix y = tsne_embed(same, TsneOptions{});
  CHECK(y.allFinite());
  std::atomic<bool> cancel{true};
  std::mt19937_64 rng(5);
  const Matrix x = blobs(10, 2, 3, 3.0, rng);
  int calls = 0;
  const Matrix early = tsne_embed(x, TsneOptions{}, [&](double) { ++calls; }, &cancel);
  CHECK(early.rows() == 20);
  CHECK(calls == 0);
}

TEST_CASE("anchored reprojection leaves anchors alone and does not raise KL") {
  std::mt19937_64 rng(6);
  const Matrix inst = blobs(20, 3, 6, 6.0, rng);
  // Anchors are the instances plus one mean per cluster, as in the semantic map.
  Matrix high(63, 6);
  high.topRows(60) = inst;
  for (int c = 0; c < 3; ++c) high.row(60 + c) = inst.middleRows(20 * c, 20).colwise().mean();
  TsneOptions opt;
  opt.iterations = 400;
  const Matrix low = tsne_embed(high, opt);
  const Matrix anchor_low = low;
  const double diam = layout_diameter(low);
  std::normal_distribution<double> g;
  Matrix init(3, 2);
  for (int c = 0; c < 3; ++c) init.row(c) = low.row(60 + c) + Eigen::RowVector2d(0.01 * diam, 0.0);
  Matrix mov_high(3, 6);
  mov_high.row(0) = high.row(60);  // equals its exemplar
  mov_high.row(1) = high.row(61) + 0.5 * Vector::NullaryExpr(6, [&]() { return g(rng); }).transpose();
  mov_high.row(2) = 0.5 * (high.row(61) + high.row(62));
  for (int run = 0; run < 15; ++run) {
    const AnchoredResult r = anchored_reproject(high, anchor_low, mov_high, init, AnchoredOptions{});
    CHECK(anchor_low == low);
    CHECK(r.kl_final <= r.kl_initial);
    CHECK((r.movable.row(0) - low.row(60)).norm() <= 0.05 * diam);
    CHECK(r.movable.allFinite());
    init = r.movable;
  }
}

TEST_CASE("anchored reprojection argument checks and cancellation") {
  std::mt19937_64 rng(7);
  const Matrix high = blobs(6, 2, 3, 3.0, rng);
  const Matrix low = Matrix::Random(12, 2);
  CHECK_THROWS_AS(anchored_reproject(high, low.topRows(5), high.topRows(1), Matrix::Zero(1, 2), {}), Error);
  CHECK_THROWS_AS(anchored_reproject(high, low, high.topRows(1), Matrix::Zero(2, 2), {}), Error);
  std::atomic<bool> cancel{true};
  const AnchoredResult r = anchored_reproject(high, low, high.topRows(1), Matrix::Zero(1, 2), {}, {}, &cancel);
  CHECK(r.cancelled);
}
