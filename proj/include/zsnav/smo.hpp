#pragma once

#include "zsnav/common.hpp"

namespace zsnav {

// Dual QP in the libsvm form
//   min 0.5 a'Qa + p'a   s.t.  y'a = 0,  0 <= a_i <= C,
// with y_i in {+1,-1} and Q_ij = y_i y_j K_ij. Starts from a = 0.
struct SmoOptions {
  double tolerance = 1e-4;  // stop when the maximal violating pair gap is below this
  long max_iterations = 100000;
};

struct SmoResult {
  Vector alpha;
  double rho = 0.0;  // decision = sum_i coef_i K(x_i, x) - rho
  double objective = 0.0;
  double kkt_gap = 0.0;
  long iterations = 0;
  bool converged = false;
};

SmoResult solve_smo(const Matrix& q, const Vector& p, const IntVector& y, double upper, const SmoOptions& options);

// epsilon-SVR dual on a precomputed kernel; coefficients are alpha - alpha*.
struct SvrFit {
  Vector coef;
  double bias = 0.0;  // prediction = coef' k(x) + bias
  double objective = 0.0;  // 0.5 b'Kb + eps |b|_1 - z'b at b = coef
  double kkt_gap = 0.0;
  long iterations = 0;
  bool converged = false;
};

SvrFit fit_svr(const Matrix& kernel, const Vector& targets, double c, double epsilon, const SmoOptions& options);

// Soft-margin C-SVC dual on a precomputed kernel, w = sum_i coef_i phi(x_i).
struct SvcFit {
  Vector coef;  // alpha_i * y_i
  double bias = 0.0;
  double w_norm = 0.0;
  double kkt_gap = 0.0;
  bool converged = false;
};

SvcFit fit_svc(const Matrix& kernel, const IntVector& labels, double c, const SmoOptions& options);

Matrix rbf_kernel(const Matrix& a, const Matrix& b, double gamma);

}  // namespace zsnav
