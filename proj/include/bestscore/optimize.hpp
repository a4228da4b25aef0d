#pragma once

#include <functional>
#include <span>
#include <vector>

namespace bestscore {

// Objective callback: returns f(x) and writes the gradient into `grad`.
// Returning a non-finite value marks x as infeasible; the line search backs off.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct MinimizeOptions {
  double grad_tol = 1e-6;  // on the Euclidean norm of the gradient
  int max_iter = 500;
  // Called after every accepted iterate with (iteration, value, gradient norm).
  std::function<void(int, double, double)> on_iterate;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<double> grad;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // Line search could not make progress before convergence.
  bool stalled = false;
};

// BFGS with a monotone backtracking line search: accepted iterates never
// increase the objective. Once the expected decrease falls below floating
// point resolution of f, a step is accepted on a gradient-norm decrease as
// long as f does not rise by more than a few ulps.
MinimizeResult minimize_bfgs(const Objective& objective, std::vector<double> x0,
                             const MinimizeOptions& options = {});

// Golden-section search for the minimum of a unimodal function on [lo, hi],
// stopping when the bracket is narrower than `tol`.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol);

}  // namespace bestscore
