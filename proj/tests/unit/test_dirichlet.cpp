#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"

#include "bestscore/dirichlet.hpp"
#include "bestscore/error.hpp"
#include "bestscore/simulation.hpp"

using namespace bestscore;

namespace {

AnnotationMatrix rows(std::initializer_list<std::initializer_list<int>> r) {
  return AnnotationMatrix::from_counts(Matrix<int>::from_rows(r));
}

// Probability of a count vector under the Polya urn started with alpha balls:
// the probability of one particular draw sequence times the number of
// sequences with those counts.
double polya_urn_probability(const std::vector<double>& alpha, const std::vector<int>& counts) {
  const double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  double p = 1.0;
  int drawn = 0;
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    for (int c = 0; c < counts[k]; ++c) {
      p *= (alpha[k] + c) / (a0 + drawn);
      ++drawn;
    }
  }
  // Multinomial coefficient N! / prod Y_k!.
  double coef = 1.0;
  int n = 0;
  for (int c : counts) {
    for (int j = 1; j <= c; ++j) {
      ++n;
      coef *= static_cast<double>(n) / j;
    }
  }
  return p * coef;
}

AnnotationMatrix simulate(const std::vector<double>& alpha, std::size_t n, int annotators,
                          std::uint64_t seed) {
  ScenarioConfig config;
  config.num_classes = alpha.size();
  config.n_examples = n;
  config.true_prior = {{DirichletPrior(alpha), 1.0}};
  config.annotators = FixedAnnotators{annotators};
  return generate_dataset(config, seed).annotations;
}

}  // namespace

TEST_CASE("prior validation") {
  CHECK_THROWS_AS(DirichletPrior({1.0, 0.0}), DataError);
  CHECK_THROWS_AS(DirichletPrior({1.0, -1.0}), DataError);
  CHECK_THROWS_AS(DirichletPrior({1.0, NAN}), DataError);
  CHECK_THROWS_AS(DirichletPrior({}), DataError);
  DirichletPrior p({4.0, 1.0});
  CHECK(p.concentration() == 5.0);
  CHECK(p.mean() == std::vector<double>{0.8, 0.2});
}

TEST_CASE("dm_nll small cases") {
  DirichletPrior flat({1.0, 1.0});
  CHECK(dm_nll(flat, rows({{1, 0}})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(dm_nll(flat, rows({{2, 0}})) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(dm_nll(flat, rows({{1, 0}, {0, 1}})) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(dm_nll(DirichletPrior({1.0, 1.0, 1.0}), rows({{1, 0}})), DataError);
}

TEST_CASE("dm_nll matches Polya urn enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    std::vector<double> alpha(k);
    for (double& a : alpha) a = std::exp(rng.uniform() * 5.0 - 3.0);
    std::vector<int> counts(k, 0);
    const int n = 1 + static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i) counts[rng.below(k)] += 1;
    const double expected = -std::log(polya_urn_probability(alpha, counts));
    CHECK(dm_row_nll(alpha, counts) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("dm pmf sums to one over all count vectors") {
  const std::vector<double> alpha = {0.3, 2.0, 1.7};
  const int n = 6;
  double total = 0.0;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; a + b <= n; ++b) {
      const std::vector<int> y = {a, b, n - a - b};
      total += std::exp(-dm_row_nll(alpha, y));
    }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dm_nll is finite with zero counts and extreme alpha") {
  for (double a : {1e-8, 1e-3, 1.0, 1e3, 1e8}) {
    DirichletPrior p({a, a * 3, a / 2});
    const double v = dm_nll(p, rows({{0, 0, 40}, {7, 0, 0}, {1, 1, 1}}));
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
}

TEST_CASE("rising factorial helpers") {
  for (double a : {1e-4, 0.3, 1.0, 7.5, 300.0}) {
    for (long long c : {0LL, 1LL, 5LL, 32LL, 33LL, 1000LL}) {
      const double exact = std::lgamma(a + static_cast<double>(c)) - std::lgamma(a);
      CHECK(log_rising_factorial(a, c) == doctest::Approx(exact).epsilon(1e-10));
      const double h = a * 1e-6;
      const double fd = (log_rising_factorial(a + h, c) - log_rising_factorial(a - h, c)) / (2 * h);
      CHECK(digamma_difference(a, c) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("dm_nll_grad matches finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = rng.below(2) ? 5 : 2;
    auto ann = testing::random_annotations(rng, 1 + rng.below(5), k, 1, 50);
    std::vector<double> alpha(k);
    for (double& a : alpha) a = 0.2 * std::exp(rng.uniform() * std::log(50.0));
    const auto grad = dm_nll_grad(DirichletPrior(alpha), ann);
    const auto fd = testing::finite_difference(
        [&](std::span<const double> x) {
          return dm_nll(DirichletPrior(std::vector<double>(x.begin(), x.end())), ann);
        },
        alpha);
    CHECK(testing::relative_error(grad, fd) <= 1e-5);
  }
}

TEST_CASE("gradient is symmetric for symmetric data") {
  const auto g = dm_nll_grad(DirichletPrior({2.0, 2.0}), rows({{3, 1}, {1, 3}, {2, 2}}));
  CHECK(g[0] == doctest::Approx(g[1]).epsilon(1e-14));
}

TEST_CASE("fit_prior recovers a known prior") {
  const auto ann = simulate({2.0, 5.0, 3.0}, 5000, 10, 1);
  const auto fit = fit_prior(ann);
  CHECK(fit.converged);
  CHECK(fit.gradient_norm <= 1e-6);
  const std::vector<double> truth = {2.0, 5.0, 3.0};
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(fit.prior[k] / truth[k] - 1.0) < 0.15);
  // First-order optimality in alpha space, up to the log-parameter chain rule.
  const auto g = dm_nll_grad(fit.prior, ann);
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(g[k] * fit.prior[k]) <= 1e-6);
  CHECK(fit.final_nll == doctest::Approx(dm_nll(fit.prior, ann)).epsilon(1e-14));
}

TEST_CASE("fit_prior on symmetric data gives nearly equal components") {
  const auto ann = simulate({1.5, 1.5, 1.5, 1.5}, 4000, 8, 2);
  const auto fit = fit_prior(ann);
  const auto a = fit.prior.alpha();
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  CHECK(*hi / *lo < 1.05);
}

TEST_CASE("fit_prior iterates never increase the objective beyond rounding") {
  const auto ann = simulate({0.4, 1.0, 2.0}, 3000, 5, 3);
  std::vector<double> values;
  FitOptions opts;
  opts.on_iterate = [&](int, double nll) { values.push_back(nll); };
  const auto fit = fit_prior(ann, opts);
  REQUIRE(values.size() >= 2);
  for (std::size_t i = 1; i < values.size(); ++i)
    CHECK(values[i] <= values[i - 1] + 8 * 2.3e-16 * std::abs(values[i - 1]));
  CHECK(fit.iterations == static_cast<int>(values.size()));
}

TEST_CASE("fit_prior accepts an explicit start and respects max_iter") {
  const auto ann = simulate({1.0, 2.0}, 500, 6, 4);
  FitOptions opts;
  opts.init = DirichletPrior({1.0, 1.0});
  opts.max_iter = 1;
  const auto fit = fit_prior(ann, opts);
  CHECK(fit.iterations <= 1);
  CHECK_FALSE(fit.converged);
  FitOptions bad;
  bad.init = DirichletPrior({1.0, 1.0, 1.0});
  CHECK_THROWS_AS(fit_prior(ann, bad), DataError);
}

TEST_CASE("fit_prior on unanimous data grows the concentration") {
  Matrix<int> counts(200, 2, 0);
  for (std::size_t i = 0; i < 200; ++i) counts(i, 0) = 20;
  counts(0, 1) = 1;  // one dissent keeps class 1 from having zero total
  const auto fit = fit_prior(AnnotationMatrix::from_counts(counts));
  CHECK(fit.prior[0] / fit.prior.concentration() > 0.99);
  CHECK(std::isfinite(fit.final_nll));
}

TEST_CASE("fit_prior warns about classes nobody chose") {
  const auto fit = fit_prior(rows({{3, 1, 0}, {1, 2, 0}, {0, 4, 0}, {2, 2, 0}}));
  REQUIRE(fit.warnings.size() == 1);
  CHECK(fit.warnings[0].find("2") != std::string::npos);
  CHECK(fit.prior[2] < fit.prior[0]);
  CHECK_THROWS_AS(fit_prior(rows({{1, 2}})), DataError);  // needs two examples
}

TEST_CASE("moment initialization") {
  const auto ann = simulate({2.0, 5.0, 3.0}, 5000, 10, 6);
  const auto init = moment_initialization(ann);
  // Right mean; concentration within a factor of two.
  CHECK(init.mean()[1] == doctest::Approx(0.5).epsilon(0.05));
  CHECK(init.concentration() > 5.0);
  CHECK(init.concentration() < 20.0);
  // Identical rows carry no spread information: fall back to ones.
  const auto flat = moment_initialization(rows({{1, 1}, {1, 1}}));
  CHECK(flat.alpha()[0] == 1.0);
}

TEST_CASE("posterior parameters") {
  const std::vector<int> y30 = {3, 0};
  CHECK(posterior_params(DirichletPrior({1.0, 1.0}), y30) == DirichletPrior({4.0, 1.0}));
  const std::vector<int> y100 = {1, 0, 0};
  CHECK(posterior_params(DirichletPrior({0.5, 0.5, 0.5}), y100) ==
        DirichletPrior({1.5, 0.5, 0.5}));
  CHECK(DirichletPrior({4.0, 1.0}).mean() == std::vector<double>{0.8, 0.2});
  CHECK_THROWS_AS(posterior_params(DirichletPrior({1.0, 1.0}), y100), DataError);

  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a = {rng.uniform() * 3, rng.uniform() * 3, rng.uniform() * 3};
    std::vector<int> y = {int(rng.below(5)), int(rng.below(5)), 1};
    const auto post = posterior_params(DirichletPrior(a), y);
    const double total = a[0] + a[1] + a[2] + y[0] + y[1] + y[2];
    for (std::size_t k = 0; k < 3; ++k) CHECK(post.mean()[k] == doctest::Approx((a[k] + y[k]) / total));
  }
}

TEST_CASE("sampling concentrates for large alpha") {
  Rng rng(1);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) sum += sample_dirichlet(DirichletPrior({1e6, 1e6}), rng).theta[0];
  CHECK(std::abs(sum / 10000 - 0.5) < 0.002);
}

TEST_CASE("sample mean matches the analytic mean") {
  const DirichletPrior p({4.0, 1.0});
  Rng rng(2);
  const int n = 10000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_dirichlet(p, rng).theta[0];
  // Var of a Beta(4, 1) coordinate: ab / ((a+b)^2 (a+b+1)).
  const double se = std::sqrt(4.0 / (25.0 * 6.0) / n);
  CHECK(std::abs(s / n - 0.8) < 3 * se);
}

TEST_CASE("draws lie on the simplex, including tiny concentrations") {
  Rng rng(4);
  for (auto alpha : {std::vector<double>{0.01, 0.02, 0.005}, std::vector<double>{1e-4, 1e-4},
                     std::vector<double>{3.0, 0.5, 0.5, 100.0}}) {
    for (int i = 0; i < 500; ++i) {
      const auto d = sample_dirichlet(DirichletPrior(alpha), rng);
      double s = 0.0;
      for (double v : d.theta) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("sampling is deterministic per seed and draw index") {
  const DirichletPrior p({0.5, 1.5, 2.5});
  CHECK(sample_dirichlet(p, 42, 7).theta == sample_dirichlet(p, 42, 7).theta);
  CHECK(sample_dirichlet(p, 42, 7).theta != sample_dirichlet(p, 42, 8).theta);
  Rng a(9), b(9);
  for (int i = 0; i < 10; ++i) CHECK(sample_dirichlet(p, a).theta == sample_dirichlet(p, b).theta);
}
