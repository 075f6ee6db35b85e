#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace ctune {

struct BoxMinimizeOptions {
  double gradient_tolerance = 1e-7;  // on the projected gradient, infinity norm
  std::size_t max_iterations = 200;
  double fd_step = 1e-4;  // central finite-difference step
};

struct BoxMinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;

/// Bound-constrained quasi-Newton minimization (projected BFGS with an
/// Armijo search along the projected path), finite-difference gradients.
/// Intended for the handful of variables a threshold vector has.
///
/// Throws Error(kOptimizerDiverged) if the objective returns a non-finite value.
BoxMinimizeResult minimize_box(const Objective& f, std::vector<double> x0,
                               const std::vector<double>& lower,
                               const std::vector<double>& upper,
                               const BoxMinimizeOptions& opt = {});

}  // namespace ctune
