#include "bestscore/optimize.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace bestscore {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Dense inverse-Hessian approximation, row-major n x n.
struct InverseHessian {
  std::size_t n;
  std::vector<double> h;

  explicit InverseHessian(std::size_t size) : n(size), h(size * size, 0.0) { reset(1.0); }

  void reset(double scale) {
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = scale;
  }

  void apply(std::span<const double> g, std::span<double> out) const {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * g[j];
      out[i] = acc;
    }
  }

  // Standard BFGS update with s = x_new - x, y = g_new - g.
  void update(std::span<const double> s, std::span<const double> y) {
    const double sy = dot(s, y);
    if (!(sy > 1e-300)) return;  // curvature condition failed; keep H
    std::vector<double> hy(n);
    apply(y, hy);
    const double yhy = dot(y, hy);
    const double rho = 1.0 / sy;
    const double coeff = (1.0 + rho * yhy) * rho;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        h[i * n + j] += coeff * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
  }
};

}  // namespace

MinimizeResult minimize_bfgs(const Objective& objective, std::vector<double> x0,
                             const MinimizeOptions& options) {
  const std::size_t n = x0.size();
  MinimizeResult result;
  result.x = std::move(x0);
  result.grad.assign(n, 0.0);
  result.value = objective(result.x, result.grad);
  result.grad_norm = norm(result.grad);
  if (!std::isfinite(result.value) || n == 0) {
    result.converged = n == 0;
    result.stalled = n != 0;
    return result;
  }

  InverseHessian hinv(n);
  hinv.reset(1.0 / std::max(1.0, result.grad_norm));
  bool fresh_hessian = true;

  std::vector<double> direction(n), x_new(n), g_new(n), s(n), y(n);
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;

  while (result.grad_norm > options.grad_tol && result.iterations < options.max_iter) {
    hinv.apply(result.grad, direction);
    for (auto& d : direction) d = -d;
    double slope = dot(result.grad, direction);
    if (!(slope < 0.0)) {
      // Not a descent direction: fall back to steepest descent.
      hinv.reset(1.0 / std::max(1.0, result.grad_norm));
      fresh_hessian = true;
      hinv.apply(result.grad, direction);
      for (auto& d : direction) d = -d;
      slope = dot(result.grad, direction);
    }

    const double f_resolution = 8.0 * std::numeric_limits<double>::epsilon() *
                                std::max(1.0, std::abs(result.value));
    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = result.x[i] + step * direction[i];
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new)) {
        if (f_new <= result.value + kArmijo * step * slope) {
          accepted = true;
          break;
        }
        // Inside the noise floor of f the Armijo test is meaningless; use the
        // gradient as the progress measure instead.
        if (std::abs(step * slope) < f_resolution && f_new <= result.value + f_resolution &&
            norm(g_new) < result.grad_norm) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }

    if (!accepted) {
      if (fresh_hessian) {
        result.stalled = true;
        break;
      }
      hinv.reset(1.0 / std::max(1.0, result.grad_norm));
      fresh_hessian = true;
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - result.x[i];
      y[i] = g_new[i] - result.grad[i];
    }
    if (fresh_hessian) {
      // Shanno-Phua scaling of the initial approximation.
      const double yy = dot(y, y);
      const double sy = dot(s, y);
      if (yy > 0.0 && sy > 0.0) hinv.reset(sy / yy);
      fresh_hessian = false;
    }
    hinv.update(s, y);

    result.x.swap(x_new);
    result.grad.swap(g_new);
    result.value = f_new;
    result.grad_norm = norm(result.grad);
    ++result.iterations;
    if (options.on_iterate) options.on_iterate(result.iterations, result.value, result.grad_norm);
  }
  result.converged = result.grad_norm <= options.grad_tol;
  if (result.converged) result.stalled = false;
  return result;
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                               double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  // Check the endpoints too: the minimum of a monotone objective sits on the
  // boundary, which interior probes only approach.
  double best_x = 0.5 * (a + b);
  double best_f = f(best_x);
  for (double x : {lo, hi}) {
    const double fx = f(x);
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return best_x;
}

}  // namespace bestscore
