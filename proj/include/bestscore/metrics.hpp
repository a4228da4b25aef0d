#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bestscore/annotations.hpp"
#include "bestscore/matrix.hpp"

namespace bestscore {

enum class MetricKind { xentropy_soft, accuracy, macro_f1, total_variation };

struct MetricConfig {
  MetricKind kind = MetricKind::xentropy_soft;
  std::size_t num_classes = 2;

  MetricConfig() = default;
  MetricConfig(MetricKind kind, std::size_t num_classes);
};

// Accepts the canonical names plus "xentropy", "f1", "tv".
MetricKind parse_metric(std::string_view name);
std::string metric_name(MetricKind kind);
// Hard metrics score argmax labels rather than probability vectors.
bool is_hard(MetricKind kind);

struct MetricValue {
  double value = 0.0;
  std::optional<std::vector<double>> per_example;
};

// Index of the largest count; ties go to the lowest index.
std::size_t majority_label(std::span<const int> counts);
// Same tie rule for probability vectors.
std::size_t argmax_label(std::span<const double> probs);

std::vector<std::size_t> majority_labels(const AnnotationMatrix& annotations);
std::vector<std::size_t> argmax_labels(const Matrix<double>& probs);

// Mean over examples of -sum_j (Y_ij/N_i) log max(p_ij, 1e-12), in nats.
MetricValue cross_entropy_soft(const AlignedEval& eval);
// Mean over examples of 0.5 * sum_j |p_ij - Y_ij/N_i|.
MetricValue total_variation(const AlignedEval& eval);
MetricValue accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold);
// Unweighted mean of per-class F1 over all K classes. A class that is never
// predicted and never gold scores 0.
MetricValue macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                     std::size_t num_classes);

// Scores probability rows against annotations with one metric. Hard metrics
// compare argmax predictions with majority labels. Gold-side quantities are
// computed once, so repeated scoring (Monte Carlo rounds) is cheap.
class Scorer {
 public:
  Scorer(const AnnotationMatrix& annotations, MetricConfig metric);

  double score(const Matrix<double>& probs) const;
  double score_labels(std::span<const std::size_t> predicted) const;
  // Contribution of one example to a distributional metric (xentropy or TV).
  double example_term(std::size_t i, std::span<const double> probs) const;

  const MetricConfig& metric() const { return metric_; }
  const std::vector<std::size_t>& gold_labels() const { return gold_; }

 private:
  const AnnotationMatrix* annotations_;
  MetricConfig metric_;
  std::vector<std::size_t> gold_;
};

// Dispatches one metric over an aligned evaluation set.
MetricValue evaluate(const AlignedEval& eval, MetricKind kind);

// Entropy (nats) of a probability vector.
double entropy(std::span<const double> probs);

}  // namespace bestscore
