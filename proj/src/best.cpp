#include "bestscore/best.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "bestscore/error.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

namespace {

// Precomputed per-example posteriors and stream keys for repeated rounds.
class OracleSampler {
 public:
  OracleSampler(const AnnotationMatrix& annotations, const DirichletPrior& prior,
                const std::vector<MetricConfig>& metrics, std::uint64_t seed)
      : annotations_(annotations), seed_(seed),
        posterior_(annotations.size(), annotations.num_classes()),
        keys_(annotations.size()) {
    if (prior.size() != annotations.num_classes())
      throw DataError("class count mismatch: prior has K=" + std::to_string(prior.size()) +
                      ", annotations have K=" + std::to_string(annotations.num_classes()));
    for (const auto& m : metrics) {
      scorers_.emplace_back(annotations, m);
      any_hard_ = any_hard_ || is_hard(m.kind);
    }
    for (std::size_t i = 0; i < annotations.size(); ++i) {
      auto row = annotations.row(i);
      auto post = posterior_.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) post[j] = prior[j] + row[j];
      keys_[i] = stable_hash(annotations.ids()[i]);
    }
  }

  std::size_t num_metrics() const { return scorers_.size(); }

  // Scores every metric on one set of posterior draws.
  void round(std::uint64_t r, std::span<double> out) const {
    const std::size_t n = annotations_.size();
    std::vector<double> theta(annotations_.num_classes());
    std::vector<std::size_t> labels(any_hard_ ? n : 0);
    std::vector<double> sums(scorers_.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng(derive_seed(seed_, keys_[i], r));
      sample_dirichlet_into(posterior_.row(i), rng, theta);
      if (any_hard_) labels[i] = argmax_label(theta);
      for (std::size_t m = 0; m < scorers_.size(); ++m)
        if (!is_hard(scorers_[m].metric().kind)) sums[m] += scorers_[m].example_term(i, theta);
    }
    for (std::size_t m = 0; m < scorers_.size(); ++m)
      out[m] = is_hard(scorers_[m].metric().kind) ? scorers_[m].score_labels(labels)
                                                  : sums[m] / static_cast<double>(n);
  }

 private:
  const AnnotationMatrix& annotations_;
  std::vector<Scorer> scorers_;
  bool any_hard_ = false;
  std::uint64_t seed_;
  Matrix<double> posterior_;
  std::vector<std::uint64_t> keys_;
};

}  // namespace

double oracle_round(const AnnotationMatrix& annotations, const DirichletPrior& prior,
                    const MetricConfig& metric, std::uint64_t seed, std::uint64_t round) {
  double score = 0.0;
  OracleSampler(annotations, prior, {metric}, seed).round(round, {&score, 1});
  return score;
}

std::vector<BestEstimate> best_scores(const AnnotationMatrix& annotations,
                                      const std::vector<MetricConfig>& metrics,
                                      const BestOptions& options) {
  if (options.rounds < 1 || options.rounds > kMaxRounds)
    throw DataError("rounds must be in [1, " + std::to_string(kMaxRounds) + "]");
  if (annotations.size() == 0) throw DataError("cannot estimate a score on an empty dataset");
  if (metrics.empty()) return {};

  DirichletPrior prior{{1.0}};
  std::optional<FitReport> fit;
  if (options.prior) {
    prior = *options.prior;
  } else {
    fit = fit_prior(annotations, options.fit);
    prior = fit->prior;
  }

  const OracleSampler sampler(annotations, prior, metrics, options.seed);
  const std::size_t n_metrics = metrics.size();
  const std::size_t rounds = options.rounds;
  // scores[r * n_metrics + m]
  std::vector<double> scores(rounds * n_metrics);
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::min<std::size_t>(rounds, 256)));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r)
      sampler.round(r, std::span<double>(scores).subspan(r * n_metrics, n_metrics));
  };
  if (threads == 1) {
    run(0, rounds);
  } else {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (rounds + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(rounds, t * chunk);
      const std::size_t end = std::min(rounds, begin + chunk);
      workers.emplace_back(run, begin, end);
    }
  }

  // Reduce in round order so the result is independent of the thread count.
  std::vector<BestEstimate> estimates;
  for (std::size_t m = 0; m < n_metrics; ++m) {
    BestEstimate e;
    e.metric = metrics[m];
    e.rounds = rounds;
    e.seed = options.seed;
    e.prior = prior;
    e.fit = fit;
    double mean = 0.0;
    for (std::size_t r = 0; r < rounds; ++r) mean += scores[r * n_metrics + m];
    mean /= static_cast<double>(rounds);
    double ss = 0.0;
    for (std::size_t r = 0; r < rounds; ++r) {
      const double d = scores[r * n_metrics + m] - mean;
      ss += d * d;
    }
    e.score = mean;
    if (rounds > 1)
      e.std_error = std::sqrt(ss / static_cast<double>(rounds - 1) / static_cast<double>(rounds));
    estimates.push_back(std::move(e));
  }
  return estimates;
}

BestEstimate best_score(const AnnotationMatrix& annotations, const MetricConfig& metric,
                        const BestOptions& options) {
  return best_scores(annotations, {metric}, options).front();
}

double true_oracle_score(const Matrix<double>& thetas, const AnnotationMatrix& annotations,
                         const MetricConfig& metric) {
  if (thetas.rows() != annotations.size() || thetas.cols() != annotations.num_classes())
    throw DataError("true distributions do not match the annotations' shape");
  for (std::size_t i = 0; i < thetas.rows(); ++i) {
    double sum = 0.0;
    for (double p : thetas.row(i)) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw DataError("true distribution off the simplex");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DataError("true distribution off the simplex");
  }
  return Scorer(annotations, metric).score(thetas);
}

}  // namespace bestscore
