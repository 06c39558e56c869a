#include "zsnav/smo.hpp"

#include "zsnav/linalg.hpp"

#include <cmath>
#include <limits>

namespace zsnav {

namespace {

constexpr double kTau = 1e-12;

}  // namespace

SmoResult solve_smo(const Matrix& q, const Vector& p, const IntVector& y, double upper, const SmoOptions& options) {
  const Index n = p.size();
  require(q.rows() == n && q.cols() == n && y.size() == n, "SMO problem dimensions disagree");
  require(upper > 0.0, "SMO upper bound must be positive");

  SmoResult res;
  Vector& alpha = res.alpha;
  alpha = Vector::Zero(n);
  Vector grad = p;
  const Vector qd = q.diagonal();
  const double inf = std::numeric_limits<double>::infinity();

  auto is_upper = [&](Index i) { return alpha(i) >= upper; };
  auto is_lower = [&](Index i) { return alpha(i) <= 0.0; };

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    // Second-order working set selection (Fan, Chen, Lin 2005).
    double gmax = -inf;
    Index i = -1;
    for (Index t = 0; t < n; ++t) {
      if (y(t) == 1) {
        if (!is_upper(t) && -grad(t) >= gmax) gmax = -grad(t), i = t;
      } else {
        if (!is_lower(t) && grad(t) >= gmax) gmax = grad(t), i = t;
      }
    }
    double gmax2 = -inf;
    Index j = -1;
    double best = inf;
    for (Index t = 0; t < n; ++t) {
      if (y(t) == 1) {
        if (is_lower(t)) continue;
        const double diff = gmax + grad(t);
        if (grad(t) >= gmax2) gmax2 = grad(t);
        if (diff > 0 && i >= 0) {
          double quad = qd(i) + qd(t) - 2.0 * y(i) * q(i, t);
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) best = obj, j = t;
        }
      } else {
        if (is_upper(t)) continue;
        const double diff = gmax - grad(t);
        if (-grad(t) >= gmax2) gmax2 = -grad(t);
        if (diff > 0 && i >= 0) {
          double quad = qd(i) + qd(t) + 2.0 * y(i) * q(i, t);
          const double obj = -(diff * diff) / (quad > 0 ? quad : kTau);
          if (obj <= best) best = obj, j = t;
        }
      }
    }
    res.kkt_gap = gmax + gmax2;
    if (res.kkt_gap < options.tolerance || j < 0) {
      res.converged = true;
      break;
    }

    const double old_i = alpha(i);
    const double old_j = alpha(j);
    if (y(i) != y(j)) {
      double quad = qd(i) + qd(j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) alpha(j) = 0, alpha(i) = diff;
      } else {
        if (alpha(i) < 0) alpha(i) = 0, alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > upper) alpha(i) = upper, alpha(j) = upper - diff;
      } else {
        if (alpha(j) > upper) alpha(j) = upper, alpha(i) = upper + diff;
      }
    } else {
      double quad = qd(i) + qd(j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > upper) {
        if (alpha(i) > upper) alpha(i) = upper, alpha(j) = sum - upper;
      } else {
        if (alpha(j) < 0) alpha(j) = 0, alpha(i) = sum;
      }
      if (sum > upper) {
        if (alpha(j) > upper) alpha(j) = upper, alpha(i) = sum - upper;
      } else {
        if (alpha(i) < 0) alpha(i) = 0, alpha(j) = sum;
      }
    }
    grad += q.col(i) * (alpha(i) - old_i) + q.col(j) * (alpha(j) - old_j);
  }

  double ub = inf, lb = -inf, sum_free = 0.0;
  Index n_free = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (is_upper(t)) {
      if (y(t) == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y(t) == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  res.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  res.objective = 0.5 * alpha.dot(grad + p);
  return res;
}

SvrFit fit_svr(const Matrix& kernel, const Vector& z, double c, double epsilon, const SmoOptions& options) {
  const Index l = z.size();
  require(kernel.rows() == l && kernel.cols() == l, "kernel/target size mismatch");
  require(epsilon >= 0.0, "epsilon must be non-negative");
  Matrix q(2 * l, 2 * l);
  q << kernel, -kernel, -kernel, kernel;
  Vector p(2 * l);
  p << (epsilon - z.array()).matrix(), (epsilon + z.array()).matrix();
  IntVector y(2 * l);
  y << IntVector::Ones(l), -IntVector::Ones(l);

  const SmoResult r = solve_smo(q, p, y, c, options);
  SvrFit fit;
  fit.coef = r.alpha.head(l) - r.alpha.tail(l);
  fit.bias = -r.rho;
  fit.objective = r.objective;
  fit.kkt_gap = r.kkt_gap;
  fit.iterations = r.iterations;
  fit.converged = r.converged;
  return fit;
}

SvcFit fit_svc(const Matrix& kernel, const IntVector& labels, double c, const SmoOptions& options) {
  const Index l = labels.size();
  require(kernel.rows() == l && kernel.cols() == l, "kernel/label size mismatch");
  const Vector yd = labels.cast<double>();
  const Matrix q = (yd * yd.transpose()).cwiseProduct(kernel);
  const SmoResult r = solve_smo(q, -Vector::Ones(l), labels, c, options);
  SvcFit fit;
  fit.coef = r.alpha.cwiseProduct(yd);
  fit.bias = -r.rho;
  fit.w_norm = std::sqrt(std::max(0.0, fit.coef.dot(kernel * fit.coef)));
  fit.kkt_gap = r.kkt_gap;
  fit.converged = r.converged;
  return fit;
}

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma) {
  return (-gamma * pairwise_squared_distances(a, b)).array().exp().matrix();
}

}  // namespace zsnav
