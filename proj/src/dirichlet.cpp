#include "bestscore/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>

#include "bestscore/error.hpp"
#include "bestscore/optimize.hpp"

namespace bestscore {

namespace {

constexpr long long kDirectSumLimit = 32;

void check_alpha(std::span<const double> alpha) {
  if (alpha.empty()) throw DataError("Dirichlet parameters must be non-empty");
  for (double a : alpha)
    if (!(a > 0.0) || !std::isfinite(a))
      throw DataError("Dirichlet parameters must be positive and finite");
}

void check_width(std::size_t alpha_size, std::size_t k) {
  if (alpha_size != k)
    throw DataError("class count mismatch: prior has K=" + std::to_string(alpha_size) +
                    ", annotations have K=" + std::to_string(k));
}

// Histogram form of an annotation matrix. The Dirichlet-multinomial
// likelihood depends on the data only through, per class, how many rows hold
// each count value and, across rows, how many rows have each total. Grouping
// makes each evaluation cost O(distinct values) instead of O(rows * K), and
// the iteration order over the histograms is fixed.
struct CountHistogram {
  std::vector<std::vector<std::pair<long long, long long>>> per_class;  // (count, rows)
  std::vector<std::pair<long long, long long>> totals;                  // (N, rows)
  std::vector<long long> class_totals;
  double log_multinomial = 0.0;  // sum_i log N_i! - sum_ik log Y_ik!

  explicit CountHistogram(const AnnotationMatrix& annotations) {
    const std::size_t k = annotations.num_classes();
    std::vector<std::map<long long, long long>> cls(k);
    std::map<long long, long long> tot;
    class_totals.assign(k, 0);
    for (std::size_t i = 0; i < annotations.size(); ++i) {
      auto row = annotations.row(i);
      for (std::size_t j = 0; j < k; ++j) {
        if (row[j] > 0) ++cls[j][row[j]];
        class_totals[j] += row[j];
        log_multinomial -= std::lgamma(row[j] + 1.0);
      }
      ++tot[annotations.totals()[i]];
      log_multinomial += std::lgamma(annotations.totals()[i] + 1.0);
    }
    per_class.resize(k);
    for (std::size_t j = 0; j < k; ++j) per_class[j].assign(cls[j].begin(), cls[j].end());
    totals.assign(tot.begin(), tot.end());
  }

  double nll(std::span<const double> alpha) const {
    const double a_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double loglik = log_multinomial;
    for (const auto& [n, rows] : totals) loglik -= rows * log_rising_factorial(a_sum, n);
    for (std::size_t j = 0; j < per_class.size(); ++j)
      for (const auto& [c, rows] : per_class[j]) loglik += rows * log_rising_factorial(alpha[j], c);
    return -loglik;
  }

  void grad(std::span<const double> alpha, std::span<double> out) const {
    const double a_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double shared = 0.0;
    for (const auto& [n, rows] : totals) shared += rows * digamma_difference(a_sum, n);
    for (std::size_t j = 0; j < per_class.size(); ++j) {
      double own = 0.0;
      for (const auto& [c, rows] : per_class[j]) own += rows * digamma_difference(alpha[j], c);
      out[j] = shared - own;
    }
  }
};

}  // namespace

// ---------------------------------------------------------------------------

DirichletPrior::DirichletPrior(std::vector<double> alpha) : alpha_(std::move(alpha)) {
  check_alpha(alpha_);
}

double DirichletPrior::concentration() const {
  return std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
}

std::vector<double> DirichletPrior::mean() const {
  const double total = concentration();
  std::vector<double> m(alpha_.size());
  std::ranges::transform(alpha_, m.begin(), [total](double a) { return a / total; });
  return m;
}

double log_rising_factorial(double a, long long c) {
  if (c == 0) return 0.0;
  if (c <= kDirectSumLimit) {
    double acc = 0.0;
    for (long long j = 0; j < c; ++j) acc += std::log(a + static_cast<double>(j));
    return acc;
  }
  return std::lgamma(a + static_cast<double>(c)) - std::lgamma(a);
}

double digamma_difference(double a, long long c) {
  if (c == 0) return 0.0;
  if (c <= kDirectSumLimit) {
    double acc = 0.0;
    for (long long j = 0; j < c; ++j) acc += 1.0 / (a + static_cast<double>(j));
    return acc;
  }
  return boost::math::digamma(a + static_cast<double>(c)) - boost::math::digamma(a);
}

double dm_row_nll(std::span<const double> alpha, std::span<const int> counts) {
  double a_sum = 0.0;
  long long n = 0;
  double loglik = 0.0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    a_sum += alpha[j];
    n += counts[j];
    loglik += log_rising_factorial(alpha[j], counts[j]) - std::lgamma(counts[j] + 1.0);
  }
  loglik += std::lgamma(n + 1.0) - log_rising_factorial(a_sum, n);
  return -loglik;
}

double dm_row_nll_grad(std::span<const double> alpha, std::span<const int> counts,
                       std::span<double> grad) {
  double a_sum = 0.0;
  long long n = 0;
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    a_sum += alpha[j];
    n += counts[j];
  }
  const double shared = digamma_difference(a_sum, n);
  for (std::size_t j = 0; j < alpha.size(); ++j)
    grad[j] = shared - digamma_difference(alpha[j], counts[j]);
  return dm_row_nll(alpha, counts);
}

double dm_nll(const DirichletPrior& alpha, const AnnotationMatrix& annotations) {
  check_width(alpha.size(), annotations.num_classes());
  return CountHistogram(annotations).nll(alpha.alpha());
}

std::vector<double> dm_nll_grad(const DirichletPrior& alpha, const AnnotationMatrix& annotations) {
  check_width(alpha.size(), annotations.num_classes());
  std::vector<double> g(alpha.size());
  CountHistogram(annotations).grad(alpha.alpha(), g);
  return g;
}

DirichletPrior moment_initialization(const AnnotationMatrix& annotations) {
  const std::size_t k = annotations.num_classes();
  const std::size_t n = annotations.size();
  std::vector<double> fallback(k, 1.0);
  if (n < 2) return DirichletPrior(fallback);

  std::vector<double> mean(k, 0.0), sq(k, 0.0);
  double mean_inv_n = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double total = static_cast<double>(annotations.totals()[i]);
    mean_inv_n += 1.0 / total;
    auto row = annotations.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = row[j] / total;
      mean[j] += p;
      sq[j] += p * p;
    }
  }
  mean_inv_n /= static_cast<double>(n);
  std::vector<double> precisions;
  for (std::size_t j = 0; j < k; ++j) {
    mean[j] /= static_cast<double>(n);
    const double var = sq[j] / static_cast<double>(n) - mean[j] * mean[j];
    const double bern = mean[j] * (1.0 - mean[j]);
    if (bern <= 0.0 || var <= 0.0) continue;
    // Var(Y/N) = m(1-m) [E(1/N) + (1 - E(1/N)) / (s + 1)] for the
    // Dirichlet-multinomial with precision s.
    if (mean_inv_n >= 1.0) continue;
    const double inv_s1 = (var / bern - mean_inv_n) / (1.0 - mean_inv_n);
    if (inv_s1 > 0.0 && inv_s1 < 1.0) precisions.push_back(1.0 / inv_s1 - 1.0);
  }
  if (precisions.empty()) return DirichletPrior(fallback);
  std::ranges::sort(precisions);
  const double s = precisions[precisions.size() / 2];
  if (!std::isfinite(s) || s <= 0.0) return DirichletPrior(fallback);
  std::vector<double> alpha(k);
  for (std::size_t j = 0; j < k; ++j) alpha[j] = std::max(s * mean[j], 1e-3);
  return DirichletPrior(alpha);
}

FitReport fit_prior(const AnnotationMatrix& annotations, const FitOptions& options) {
  if (annotations.size() < 2) throw DataError("fit_prior needs at least 2 examples");
  if (!(options.tol > 0.0)) throw DataError("fit_prior tolerance must be positive");
  const std::size_t k = annotations.num_classes();
  const DirichletPrior init = options.init ? *options.init : moment_initialization(annotations);
  check_width(init.size(), k);

  const CountHistogram hist(annotations);
  FitReport report;
  for (std::size_t j = 0; j < k; ++j)
    if (hist.class_totals[j] == 0)
      report.warnings.push_back("class " + std::to_string(j) +
                                " was never chosen; its concentration is driven toward zero");

  std::vector<double> alpha(k);
  Objective objective = [&](std::span<const double> eta, std::span<double> grad) {
    for (std::size_t j = 0; j < k; ++j) alpha[j] = std::exp(eta[j]);
    for (double a : alpha)
      if (!(a > 0.0) || !std::isfinite(a)) return std::numeric_limits<double>::infinity();
    hist.grad(alpha, grad);
    for (std::size_t j = 0; j < k; ++j) grad[j] *= alpha[j];  // chain rule through exp
    return hist.nll(alpha);
  };

  std::vector<double> eta(k);
  std::ranges::transform(init.alpha(), eta.begin(), [](double a) { return std::log(a); });

  MinimizeOptions mopts;
  mopts.grad_tol = options.tol;
  mopts.max_iter = options.max_iter;
  if (options.on_iterate)
    mopts.on_iterate = [&](int it, double value, double) { options.on_iterate(it, value); };
  const MinimizeResult result = minimize_bfgs(objective, eta, mopts);

  std::vector<double> fitted(k);
  std::ranges::transform(result.x, fitted.begin(), [](double e) { return std::exp(e); });
  report.prior = DirichletPrior(fitted);
  report.final_nll = result.value;
  report.iterations = result.iterations;
  report.converged = result.converged;
  report.gradient_norm = result.grad_norm;
  if (!result.converged) {
    report.warnings.push_back(result.stalled
                                  ? "line search made no further progress before convergence"
                                  : "iteration limit reached before convergence");
  }
  return report;
}

DirichletPrior posterior_params(const DirichletPrior& prior, std::span<const int> counts) {
  check_width(prior.size(), counts.size());
  std::vector<double> alpha(prior.alpha().begin(), prior.alpha().end());
  for (std::size_t j = 0; j < alpha.size(); ++j) alpha[j] += counts[j];
  return DirichletPrior(std::move(alpha));
}

void sample_dirichlet_into(std::span<const double> alpha, Rng& rng, std::span<double> out) {
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < alpha.size(); ++j) {
    out[j] = rng.log_gamma_variate(alpha[j]);
    max_log = std::max(max_log, out[j]);
  }
  double sum = 0.0;
  for (double& v : out) {
    v = std::exp(v - max_log);
    sum += v;
  }
  for (double& v : out) v /= sum;
}

PosteriorDraw sample_dirichlet(const DirichletPrior& params, Rng& rng) {
  PosteriorDraw draw{std::vector<double>(params.size())};
  sample_dirichlet_into(params.alpha(), rng, draw.theta);
  return draw;
}

PosteriorDraw sample_dirichlet(const DirichletPrior& params, std::uint64_t seed,
                               std::uint64_t draw_index) {
  Rng rng(derive_seed(seed, draw_index));
  return sample_dirichlet(params, rng);
}

}  // namespace bestscore
