#include "bestscore/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "bestscore/error.hpp"

namespace bestscore {

namespace {

constexpr double kLogFloor = 1e-12;

void check_eval(const AlignedEval& eval) {
  if (eval.annotations.num_classes() != eval.predictions.num_classes())
    throw DataError("class count mismatch between annotations and predictions");
  if (eval.annotations.size() != eval.predictions.size())
    throw DataError("example count mismatch between annotations and predictions");
  if (eval.annotations.size() == 0) throw DataError("cannot score an empty dataset");
}

double xentropy_term(std::span<const int> counts, double total, std::span<const double> probs) {
  double acc = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j)
    if (counts[j] > 0) acc -= counts[j] / total * std::log(std::max(probs[j], kLogFloor));
  return acc;
}

double tv_term(std::span<const int> counts, double total, std::span<const double> probs) {
  double acc = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) acc += std::abs(probs[j] - counts[j] / total);
  return 0.5 * acc;
}

}  // namespace

MetricConfig::MetricConfig(MetricKind kind_, std::size_t num_classes_)
    : kind(kind_), num_classes(num_classes_) {
  if (num_classes < 2) throw DataError("metrics need at least 2 classes");
}

MetricKind parse_metric(std::string_view name) {
  if (name == "xentropy_soft" || name == "xentropy") return MetricKind::xentropy_soft;
  if (name == "accuracy") return MetricKind::accuracy;
  if (name == "macro_f1" || name == "f1") return MetricKind::macro_f1;
  if (name == "total_variation" || name == "tv") return MetricKind::total_variation;
  throw UsageError("unknown metric '" + std::string(name) +
                   "' (expected xentropy, accuracy, macro_f1 or total_variation)");
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::xentropy_soft: return "xentropy_soft";
    case MetricKind::accuracy: return "accuracy";
    case MetricKind::macro_f1: return "macro_f1";
    case MetricKind::total_variation: return "total_variation";
  }
  return "unknown";
}

bool is_hard(MetricKind kind) {
  return kind == MetricKind::accuracy || kind == MetricKind::macro_f1;
}

std::size_t majority_label(std::span<const int> counts) {
  return static_cast<std::size_t>(std::ranges::max_element(counts) - counts.begin());
}

std::size_t argmax_label(std::span<const double> probs) {
  return static_cast<std::size_t>(std::ranges::max_element(probs) - probs.begin());
}

std::vector<std::size_t> majority_labels(const AnnotationMatrix& annotations) {
  std::vector<std::size_t> labels(annotations.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = majority_label(annotations.row(i));
  return labels;
}

std::vector<std::size_t> argmax_labels(const Matrix<double>& probs) {
  std::vector<std::size_t> labels(probs.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = argmax_label(probs.row(i));
  return labels;
}

MetricValue cross_entropy_soft(const AlignedEval& eval) {
  check_eval(eval);
  const auto& a = eval.annotations;
  std::vector<double> per(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    per[i] = xentropy_term(a.row(i), static_cast<double>(a.totals()[i]),
                           eval.predictions.values().row(i));
    sum += per[i];
  }
  return {sum / static_cast<double>(a.size()), std::move(per)};
}

MetricValue total_variation(const AlignedEval& eval) {
  check_eval(eval);
  const auto& a = eval.annotations;
  std::vector<double> per(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    per[i] = tv_term(a.row(i), static_cast<double>(a.totals()[i]),
                     eval.predictions.values().row(i));
    sum += per[i];
  }
  return {sum / static_cast<double>(a.size()), std::move(per)};
}

MetricValue accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size())
    throw DataError("label vectors differ in length: " + std::to_string(predicted.size()) +
                    " vs " + std::to_string(gold.size()));
  if (gold.empty()) throw DataError("cannot score an empty label vector");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return {static_cast<double>(hits) / static_cast<double>(gold.size()), std::nullopt};
}

MetricValue macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                     std::size_t num_classes) {
  if (predicted.size() != gold.size())
    throw DataError("label vectors differ in length: " + std::to_string(predicted.size()) +
                    " vs " + std::to_string(gold.size()));
  if (num_classes == 0) throw DataError("macro_f1 needs at least one class");
  std::vector<long long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (predicted[i] >= num_classes || gold[i] >= num_classes)
      throw DataError("label out of range [0, " + std::to_string(num_classes) + ")");
    if (predicted[i] == gold[i]) {
      ++tp[gold[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[gold[i]];
    }
  }
  std::vector<double> per(num_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    // 2PR/(P+R) written without the divisions, so empty classes give 0.
    const long long denom = 2 * tp[c] + fp[c] + fn[c];
    per[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    sum += per[c];
  }
  return {sum / static_cast<double>(num_classes), std::move(per)};
}

Scorer::Scorer(const AnnotationMatrix& annotations, MetricConfig metric)
    : annotations_(&annotations), metric_(metric) {
  if (metric_.num_classes != annotations.num_classes())
    throw DataError("class count mismatch: metric has K=" + std::to_string(metric_.num_classes) +
                    ", annotations have K=" + std::to_string(annotations.num_classes()));
  if (is_hard(metric_.kind)) gold_ = majority_labels(annotations);
}

double Scorer::example_term(std::size_t i, std::span<const double> probs) const {
  const double total = static_cast<double>(annotations_->totals()[i]);
  if (metric_.kind == MetricKind::total_variation)
    return tv_term(annotations_->row(i), total, probs);
  return xentropy_term(annotations_->row(i), total, probs);
}

double Scorer::score_labels(std::span<const std::size_t> predicted) const {
  if (metric_.kind == MetricKind::accuracy) return accuracy(predicted, gold_).value;
  return macro_f1(predicted, gold_, metric_.num_classes).value;
}

double Scorer::score(const Matrix<double>& probs) const {
  if (probs.rows() != annotations_->size() || probs.cols() != annotations_->num_classes())
    throw DataError("prediction matrix shape does not match the annotations");
  if (is_hard(metric_.kind)) return score_labels(argmax_labels(probs));
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) sum += example_term(i, probs.row(i));
  return sum / static_cast<double>(probs.rows());
}

MetricValue evaluate(const AlignedEval& eval, MetricKind kind) {
  check_eval(eval);
  switch (kind) {
    case MetricKind::xentropy_soft: return cross_entropy_soft(eval);
    case MetricKind::total_variation: return total_variation(eval);
    case MetricKind::accuracy:
      return accuracy(argmax_labels(eval.predictions.values()), majority_labels(eval.annotations));
    case MetricKind::macro_f1:
      return macro_f1(argmax_labels(eval.predictions.values()), majority_labels(eval.annotations),
                      eval.annotations.num_classes());
  }
  throw DataError("unknown metric");
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace bestscore
