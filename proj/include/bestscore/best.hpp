#pragma once

// Estimating the oracle classifier's score on a dataset.
//
// The oracle knows each example's true label distribution but not the
// realized annotations. Its score is estimated by empirical Bayes: fit a
// Dirichlet prior to the annotation counts, then repeatedly draw every
// example's label distribution from its conjugate posterior, score those
// draws as predictions, and average over rounds.

#include <cstdint>
#include <optional>

#include "bestscore/annotations.hpp"
#include "bestscore/dirichlet.hpp"
#include "bestscore/metrics.hpp"

namespace bestscore {

inline constexpr std::size_t kDefaultRounds = 10'000;
inline constexpr std::size_t kMaxRounds = 10'000'000;

struct BestOptions {
  std::size_t rounds = kDefaultRounds;
  std::uint64_t seed = 0;
  // Fitted from the same annotations when absent.
  std::optional<DirichletPrior> prior;
  FitOptions fit;
  // Worker threads for the rounds; 0 means hardware concurrency. The result
  // does not depend on this.
  unsigned threads = 0;
};

struct BestEstimate {
  MetricConfig metric;
  double score = 0.0;      // mean over rounds
  double std_error = 0.0;  // Monte Carlo standard error of the mean
  std::size_t rounds = 0;
  std::uint64_t seed = 0;
  DirichletPrior prior{{1.0}};
  std::optional<FitReport> fit;  // set when the prior was fitted here
};

// One Monte Carlo round. Example i draws its distribution from
// Dirichlet(prior + Y_i) using a stream keyed by (seed, hash of its id,
// round), so reordering examples does not change the result.
double oracle_round(const AnnotationMatrix& annotations, const DirichletPrior& prior,
                    const MetricConfig& metric, std::uint64_t seed, std::uint64_t round);

BestEstimate best_score(const AnnotationMatrix& annotations, const MetricConfig& metric,
                        const BestOptions& options = {});

// Several metrics scored on the same posterior draws. Each estimate equals
// what best_score would return for that metric alone with the same options.
std::vector<BestEstimate> best_scores(const AnnotationMatrix& annotations,
                                      const std::vector<MetricConfig>& metrics,
                                      const BestOptions& options = {});

// Score of the oracle that knows the true distributions `thetas` (one row
// per example, on the simplex). Only available in simulations.
double true_oracle_score(const Matrix<double>& thetas, const AnnotationMatrix& annotations,
                         const MetricConfig& metric);

}  // namespace bestscore
