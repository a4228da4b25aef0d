#pragma once

#include <cstdint>
#include <vector>

#include "bestscore/matrix.hpp"

namespace bestscore {

// Integration rule for expectations under a standard d-dimensional normal:
// E f(Z) ~= sum_n exp(log_weights[n]) f(nodes.row(n)).
struct QuadratureRule {
  Matrix<double> nodes;  // points x dimension
  std::vector<double> log_weights;
  // When set, a consumer integrating a peaked likelihood may re-centre and
  // rescale the nodes at each posterior mode (adaptive Gauss-Hermite).
  bool adaptive = false;

  std::size_t size() const { return log_weights.size(); }
  std::size_t dimension() const { return nodes.cols(); }
};

// n-point Gauss-Hermite rule rescaled to N(0, 1).
QuadratureRule gauss_hermite_normal(std::size_t n);
// Tensor product of a 1-D rule over `dimension` axes. Dimension 0 gives the
// single empty node with weight 1.
QuadratureRule tensor_product(const QuadratureRule& rule, std::size_t dimension);
// Equal-weight Monte Carlo draws from N(0, I_d).
QuadratureRule monte_carlo_normal(std::size_t draws, std::size_t dimension, std::uint64_t seed);

}  // namespace bestscore
