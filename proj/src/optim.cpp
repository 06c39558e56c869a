#include "zsnav/optim.hpp"

#include <cmath>
#include <deque>

namespace zsnav {

LbfgsResult minimize_lbfgs(const Objective& f, Vector x, const LbfgsOptions& options) {
  const Index n = x.size();
  Vector g(n), g_new(n);
  double fx = f(x, g);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  LbfgsResult res;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Two-loop recursion.
    Vector q = g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[static_cast<size_t>(i)] = rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(q);
      q -= a[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += s_hist[i] * (a[i] - b);
    }
    Vector dir = -q;
    double slope = g.dot(dir);
    if (slope >= 0.0) {
      dir = -g;
      slope = -g.squaredNorm();
      s_hist.clear(), y_hist.clear(), rho_hist.clear();
    }

    // Backtracking Armijo search.
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(g.norm(), 1e-300)) : 1.0;
    Vector x_new;
    double f_new = fx;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    const Vector s = x_new - x;
    const Vector yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(yv);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front(), y_hist.pop_front(), rho_hist.pop_front();
      }
    }
    x = x_new;
    fx = f_new;
    g = g_new;
  }
  if (!res.converged) res.converged = g.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance;
  res.x = std::move(x);
  res.value = fx;
  return res;
}

}  // namespace zsnav
