#include "bestscore/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bestscore/error.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

namespace {

// Stream salts, so dataset generation and estimation never share draws.
constexpr std::uint64_t kGenerateSalt = 0x5eed'da7aULL;
constexpr std::uint64_t kEstimateSalt = 0xe571'3a7eULL;

int draw_annotator_count(const AnnotatorLaw& law, Rng& rng) {
  return std::visit(
      [&](const auto& l) -> int {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, FixedAnnotators>) {
          return l.count;
        } else if constexpr (std::is_same_v<L, EmpiricalAnnotators>) {
          return static_cast<int>(l.totals[rng.below(l.totals.size())]);
        } else {
          const double n = std::round(l.median * std::exp(l.sigma * rng.normal()));
          return static_cast<int>(std::clamp(n, 1.0, 1e6));
        }
      },
      law);
}

std::size_t draw_index(std::span<const double> cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  for (std::size_t k = 0; k + 1 < cumulative.size(); ++k)
    if (u < cumulative[k]) return k;
  return cumulative.size() - 1;
}

}  // namespace

ScenarioKind parse_scenario(std::string_view name) {
  if (name == "anecdotes" || name == "fitted_prior") return ScenarioKind::fitted_prior;
  if (name == "annotators" || name == "fixed_annotators") return ScenarioKind::fixed_annotators;
  if (name == "mixture" || name == "mixture_prior") return ScenarioKind::mixture_prior;
  throw UsageError("unknown scenario '" + std::string(name) +
                   "' (expected anecdotes, annotators or mixture)");
}

std::string scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::fitted_prior: return "anecdotes";
    case ScenarioKind::fixed_annotators: return "annotators";
    case ScenarioKind::mixture_prior: return "mixture";
  }
  return "unknown";
}

void ScenarioConfig::validate() const {
  if (num_classes < 2) throw DataError("scenario needs at least 2 classes");
  if (n_examples < 2) throw DataError("scenario needs at least 2 examples");
  if (true_prior.empty()) throw DataError("scenario needs at least one prior component");
  double total = 0.0;
  for (const auto& c : true_prior) {
    if (c.prior.size() != num_classes) throw DataError("prior component has the wrong K");
    if (!(c.weight >= 0.0)) throw DataError("mixture weights must be nonnegative");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("mixture weights must sum to 1");
  std::visit(
      [](const auto& l) {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, FixedAnnotators>) {
          if (l.count < 1) throw DataError("annotator count must be at least 1");
        } else if constexpr (std::is_same_v<L, EmpiricalAnnotators>) {
          if (l.totals.empty()) throw DataError("empirical annotator law needs totals");
          for (long long t : l.totals)
            if (t < 1) throw DataError("empirical annotator totals must be at least 1");
        } else {
          if (!(l.median >= 1.0) || !(l.sigma >= 0.0))
            throw DataError("log-normal annotator law needs median >= 1 and sigma >= 0");
        }
      },
      annotators);
  if (rounds < 1 || rounds > kMaxRounds) throw DataError("rounds out of range");
}

ScenarioConfig anecdotes_scenario(std::uint64_t seed,
                                  const std::optional<AnnotationMatrix>& reference) {
  ScenarioConfig config;
  config.kind = ScenarioKind::fitted_prior;
  config.seed = seed;
  if (reference) {
    const FitReport fit = fit_prior(*reference);
    config.num_classes = reference->num_classes();
    config.n_examples = reference->size();
    config.true_prior = {{fit.prior, 1.0}};
    config.annotators = EmpiricalAnnotators{reference->totals()};
  } else {
    config.num_classes = 5;
    config.true_prior = {{DirichletPrior({0.6, 1.1, 0.1, 0.2, 0.05}), 1.0}};
    config.annotators = LogNormalAnnotators{};
  }
  return config;
}

ScenarioConfig annotators_scenario(std::uint64_t seed, int annotators) {
  ScenarioConfig config;
  config.kind = ScenarioKind::fixed_annotators;
  config.seed = seed;
  config.true_prior = {{DirichletPrior({0.6, 1.1, 0.1, 0.2, 0.05}), 1.0}};
  config.annotators = FixedAnnotators{annotators};
  return config;
}

ScenarioConfig mixture_scenario(std::uint64_t seed) {
  ScenarioConfig config;
  config.kind = ScenarioKind::mixture_prior;
  config.seed = seed;
  // One component leans hard toward class 1; the other is flat over the
  // simplex, so its mean is uniform.
  config.true_prior = {{DirichletPrior({0.5, 5.0, 0.5, 0.5, 0.5}), 0.5},
                       {DirichletPrior({1.0, 1.0, 1.0, 1.0, 1.0}), 0.5}};
  config.annotators = LogNormalAnnotators{};
  return config;
}

SimulatedDataset generate_dataset(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t k = config.num_classes;
  std::vector<double> weights;
  for (const auto& c : config.true_prior) weights.push_back(c.weight);
  std::vector<double> cumulative_weights(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative_weights.begin());

  SimulatedDataset out;
  out.thetas = Matrix<double>(config.n_examples, k);
  out.components.resize(config.n_examples);
  Matrix<int> counts(config.n_examples, k, 0);
  std::vector<double> cumulative(k);
  for (std::size_t i = 0; i < config.n_examples; ++i) {
    Rng rng(derive_seed(seed, i, kGenerateSalt));
    const std::size_t comp = draw_index(cumulative_weights, rng);
    out.components[i] = comp;
    auto theta = out.thetas.row(i);
    sample_dirichlet_into(config.true_prior[comp].prior.alpha(), rng, theta);
    const int n = draw_annotator_count(config.annotators, rng);
    std::partial_sum(theta.begin(), theta.end(), cumulative.begin());
    auto row = counts.row(i);
    for (int a = 0; a < n; ++a) ++row[draw_index(cumulative, rng)];
  }
  out.annotations = AnnotationMatrix::from_counts(std::move(counts));
  return out;
}

ScenarioReport run_scenario(const ScenarioConfig& config) {
  config.validate();
  const SimulatedDataset data = generate_dataset(config, config.seed);

  const std::vector<MetricConfig> metrics = {{MetricKind::accuracy, config.num_classes},
                                           {MetricKind::macro_f1, config.num_classes},
                                           {MetricKind::xentropy_soft, config.num_classes}};
  // The estimator sees the annotations only; the prior is refit from them.
  BestOptions options;
  options.rounds = config.rounds;
  options.seed = derive_seed(config.seed, kEstimateSalt);
  options.threads = config.threads;
  const auto estimates = best_scores(data.annotations, metrics, options);

  ScenarioReport report;
  report.config = config;
  report.fitted_prior = estimates.front().prior;
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    MetricComparison cmp;
    cmp.metric = metrics[m].kind;
    cmp.true_oracle = true_oracle_score(data.thetas, data.annotations, metrics[m]);
    cmp.estimate = estimates[m];
    const double diff = std::abs(cmp.estimate.score - cmp.true_oracle);
    if (cmp.true_oracle == 0.0) {
      cmp.relative_error = diff;
      cmp.absolute = true;
    } else {
      cmp.relative_error = diff / std::abs(cmp.true_oracle);
    }
    report.metrics.push_back(std::move(cmp));
  }
  return report;
}

}  // namespace bestscore
