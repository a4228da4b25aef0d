#include "bestscore/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "bestscore/error.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

QuadratureRule gauss_hermite_normal(std::size_t n) {
  if (n < 1) throw DataError("Gauss-Hermite rule needs at least one node");
  // Newton iteration on orthonormal Hermite polynomials for the weight
  // exp(-x^2), seeded with the usual asymptotic guesses for the roots.
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  const auto nd = static_cast<double>(n);
  std::vector<double> x(n), w(n);
  double z = 0.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[1];
    } else {
      z = 2.0 * z - x[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const auto jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  QuadratureRule rule{Matrix<double>(n, 1), std::vector<double>(n)};
  const double log_sqrt_pi = 0.5 * std::log(std::numbers::pi);
  for (std::size_t i = 0; i < n; ++i) {
    // Ascending node order.
    const std::size_t src = n - 1 - i;
    rule.nodes(i, 0) = std::numbers::sqrt2 * x[src];
    rule.log_weights[i] = std::log(w[src]) - log_sqrt_pi;
  }
  return rule;
}

QuadratureRule tensor_product(const QuadratureRule& rule, std::size_t dimension) {
  if (rule.dimension() != 1) throw DataError("tensor_product expects a 1-D rule");
  std::size_t points = 1;
  for (std::size_t d = 0; d < dimension; ++d) points *= rule.size();
  QuadratureRule out{Matrix<double>(points, dimension), std::vector<double>(points, 0.0)};
  for (std::size_t p = 0; p < points; ++p) {
    std::size_t rest = p;
    for (std::size_t d = 0; d < dimension; ++d) {
      const std::size_t idx = rest % rule.size();
      rest /= rule.size();
      out.nodes(p, d) = rule.nodes(idx, 0);
      out.log_weights[p] += rule.log_weights[idx];
    }
  }
  return out;
}

QuadratureRule monte_carlo_normal(std::size_t draws, std::size_t dimension, std::uint64_t seed) {
  if (draws < 1) throw DataError("Monte Carlo rule needs at least one draw");
  QuadratureRule out{Matrix<double>(draws, dimension),
                     std::vector<double>(draws, -std::log(static_cast<double>(draws)))};
  Rng rng(seed);
  for (double& v : out.nodes.data()) v = rng.normal();
  return out;
}

}  // namespace bestscore
