#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"

#include "bestscore/quadrature.hpp"

using namespace bestscore;

namespace {

double expect(const QuadratureRule& rule, const std::function<double(std::span<const double>)>& f) {
  double s = 0.0;
  for (std::size_t n = 0; n < rule.size(); ++n) s += std::exp(rule.log_weights[n]) * f(rule.nodes.row(n));
  return s;
}

}  // namespace

TEST_CASE("three-point rule") {
  const auto r = gauss_hermite_normal(3);
  REQUIRE(r.size() == 3);
  CHECK(r.nodes(0, 0) == doctest::Approx(-std::sqrt(3.0)));
  CHECK(r.nodes(1, 0) == doctest::Approx(0.0));
  CHECK(r.nodes(2, 0) == doctest::Approx(std::sqrt(3.0)));
  CHECK(std::exp(r.log_weights[0]) == doctest::Approx(1.0 / 6.0));
  CHECK(std::exp(r.log_weights[1]) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("normal moments are exact up to the rule's degree") {
  for (std::size_t n : {5u, 20u, 40u}) {
    const auto r = gauss_hermite_normal(n);
    double double_factorial = 1.0;  // (2p - 1)!!
    for (int p = 0; 2 * p < static_cast<int>(2 * n); ++p) {
      if (p > 0) double_factorial *= 2 * p - 1;
      const double m = expect(r, [&](std::span<const double> z) { return std::pow(z[0], 2 * p); });
      CHECK(m == doctest::Approx(double_factorial).epsilon(1e-9));
      const double odd = expect(r, [&](std::span<const double> z) { return std::pow(z[0], 2 * p + 1); });
      CHECK(std::abs(odd) < 1e-9 * double_factorial * (2 * p + 2));
    }
  }
}

TEST_CASE("tensor products") {
  const auto r = tensor_product(gauss_hermite_normal(10), 2);
  CHECK(r.size() == 100);
  CHECK(r.dimension() == 2);
  CHECK(expect(r, [](std::span<const double> z) { return z[0] * z[0] * z[1] * z[1]; }) ==
        doctest::Approx(1.0));
  CHECK(expect(r, [](std::span<const double> z) { return z[0] * z[1]; }) ==
        doctest::Approx(0.0));
  const auto zero = tensor_product(gauss_hermite_normal(10), 0);
  CHECK(zero.size() == 1);
  CHECK(zero.dimension() == 0);
  CHECK(zero.log_weights[0] == 0.0);
}

TEST_CASE("Monte Carlo rule") {
  const auto r = monte_carlo_normal(20000, 3, 1);
  CHECK(r.size() == 20000);
  CHECK(expect(r, [](std::span<const double>) { return 1.0; }) == doctest::Approx(1.0));
  CHECK(std::abs(expect(r, [](std::span<const double> z) { return z[1]; })) < 0.03);
  CHECK(expect(r, [](std::span<const double> z) { return z[2] * z[2]; }) ==
        doctest::Approx(1.0).epsilon(0.05));
  CHECK(monte_carlo_normal(10, 2, 5).nodes == monte_carlo_normal(10, 2, 5).nodes);
}
