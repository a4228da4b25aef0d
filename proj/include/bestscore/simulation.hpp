#pragma once

// Synthetic validation of the oracle-score estimator: draw label
// distributions from a known prior, draw annotations from them, and compare
// the estimate (which only sees the annotations) with the score of the
// oracle that knows the true distributions.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bestscore/annotations.hpp"
#include "bestscore/best.hpp"
#include "bestscore/dirichlet.hpp"
#include "bestscore/matrix.hpp"

namespace bestscore {

enum class ScenarioKind { fitted_prior, fixed_annotators, mixture_prior };

ScenarioKind parse_scenario(std::string_view name);  // anecdotes | annotators | mixture
std::string scenario_name(ScenarioKind kind);

struct MixtureComponent {
  DirichletPrior prior;
  double weight = 1.0;
};

// How many annotations each example receives.
struct FixedAnnotators {
  int count = 3;
};
struct EmpiricalAnnotators {
  std::vector<long long> totals;  // resampled uniformly
};
struct LogNormalAnnotators {
  double median = 8.0;
  double sigma = 1.32;
};
using AnnotatorLaw = std::variant<FixedAnnotators, EmpiricalAnnotators, LogNormalAnnotators>;

struct ScenarioConfig {
  ScenarioKind kind = ScenarioKind::fixed_annotators;
  std::size_t num_classes = 5;
  std::size_t n_examples = 20'000;
  AnnotatorLaw annotators = FixedAnnotators{3};
  std::vector<MixtureComponent> true_prior;
  std::size_t rounds = kDefaultRounds;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  // Throws DataError on an invalid configuration.
  void validate() const;
};

// Stand-in for the real corpus: class proportions follow the published
// label frequencies, annotation counts are log-normal with median 8 and mean
// about 19. With a reference matrix, the prior is fitted to it and the
// counts are resampled from its row totals instead.
ScenarioConfig anecdotes_scenario(std::uint64_t seed,
                                  const std::optional<AnnotationMatrix>& reference = std::nullopt);
ScenarioConfig annotators_scenario(std::uint64_t seed, int annotators = 3);
ScenarioConfig mixture_scenario(std::uint64_t seed);

struct SimulatedDataset {
  Matrix<double> thetas;  // hidden true label distributions
  AnnotationMatrix annotations;
  std::vector<std::size_t> components;  // mixture component per example
};

SimulatedDataset generate_dataset(const ScenarioConfig& config, std::uint64_t seed);

struct MetricComparison {
  MetricKind metric = MetricKind::accuracy;
  double true_oracle = 0.0;
  BestEstimate estimate;
  double relative_error = 0.0;
  bool absolute = false;  // true oracle was 0; relative_error holds |difference|
};

struct ScenarioReport {
  ScenarioConfig config;
  DirichletPrior fitted_prior{{1.0}};
  std::vector<MetricComparison> metrics;  // accuracy, macro_f1, xentropy_soft
};

// Generates a dataset, scores the true oracle from the hidden distributions,
// and estimates the same scores from the annotations alone.
ScenarioReport run_scenario(const ScenarioConfig& config);

}  // namespace bestscore
