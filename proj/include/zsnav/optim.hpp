#pragma once

#include "zsnav/common.hpp"

#include <functional>

namespace zsnav {

// Returns f(x) and writes the gradient into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsOptions {
  int history = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;  // on the max-norm of the gradient
};

struct LbfgsResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

LbfgsResult minimize_lbfgs(const Objective& f, Vector x0, const LbfgsOptions& options);

}  // namespace zsnav
