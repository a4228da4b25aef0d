#pragma once

// Dirichlet-multinomial likelihood, empirical-Bayes prior fitting, conjugate
// posteriors and Dirichlet sampling.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bestscore/annotations.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

// Concentration vector of a Dirichlet distribution. Every entry is strictly
// positive and finite.
class DirichletPrior {
 public:
  explicit DirichletPrior(std::vector<double> alpha);

  std::span<const double> alpha() const { return alpha_; }
  std::size_t size() const { return alpha_.size(); }
  double operator[](std::size_t k) const { return alpha_[k]; }
  double concentration() const;
  std::vector<double> mean() const;

  friend bool operator==(const DirichletPrior&, const DirichletPrior&) = default;

 private:
  std::vector<double> alpha_;
};

// One point on the probability simplex.
struct PosteriorDraw {
  std::vector<double> theta;
};

struct FitOptions {
  std::optional<DirichletPrior> init;  // method of moments when absent
  double tol = 1e-6;                   // on the gradient norm w.r.t. log(alpha)
  int max_iter = 500;
  // Observes (iteration, negative log-likelihood) after every accepted step.
  std::function<void(int, double)> on_iterate;
};

struct FitReport {
  DirichletPrior prior{{1.0}};
  double final_nll = 0.0;  // nats
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  std::vector<std::string> warnings;
};

// Negative log-likelihood (nats) of the annotations under the
// Dirichlet-multinomial with concentration alpha, i.e. the multinomial with
// its class probabilities integrated out against Dirichlet(alpha). Uses the
// standard pmf including the multinomial coefficient, so zero counts are fine.
double dm_nll(const DirichletPrior& alpha, const AnnotationMatrix& annotations);

// Gradient of dm_nll with respect to alpha.
std::vector<double> dm_nll_grad(const DirichletPrior& alpha, const AnnotationMatrix& annotations);

// Single-row forms used by the likelihood layer. `grad` receives d/d alpha.
double dm_row_nll(std::span<const double> alpha, std::span<const int> counts);
double dm_row_nll_grad(std::span<const double> alpha, std::span<const int> counts,
                       std::span<double> grad);

// Method-of-moments starting point, all ones when the moments are degenerate.
DirichletPrior moment_initialization(const AnnotationMatrix& annotations);

// Empirical-Bayes maximum likelihood for alpha. Optimizes over log(alpha)
// with BFGS; returns the best iterate even when it does not converge.
FitReport fit_prior(const AnnotationMatrix& annotations, const FitOptions& options = {});

// Conjugate update: alpha + counts.
DirichletPrior posterior_params(const DirichletPrior& prior, std::span<const int> counts);

PosteriorDraw sample_dirichlet(const DirichletPrior& params, Rng& rng);
// Reproducible draw keyed by (seed, draw_index).
PosteriorDraw sample_dirichlet(const DirichletPrior& params, std::uint64_t seed,
                               std::uint64_t draw_index);
// Allocation-free variant; `out` must have the same length as `alpha`.
void sample_dirichlet_into(std::span<const double> alpha, Rng& rng, std::span<double> out);

// Log of Gamma(a + c) / Gamma(a), and its derivative in a.
double log_rising_factorial(double a, long long c);
double digamma_difference(double a, long long c);

}  // namespace bestscore
