#include "bestscore/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bestscore/error.hpp"
#include "bestscore/optimize.hpp"

namespace bestscore {

namespace {

constexpr double kProbabilityFloor = 1e-12;
constexpr double kLogTemperatureBound = 5.0;
constexpr double kLogTemperatureTol = 1e-6;

void check_shape(const LogitBatch& z, const AnnotationMatrix& annotations) {
  if (z.cols() != annotations.num_classes())
    throw DataError("class count mismatch: logits have K=" + std::to_string(z.cols()) +
                    ", annotations have K=" + std::to_string(annotations.num_classes()));
  if (z.rows() != annotations.size())
    throw DataError("row count mismatch: " + std::to_string(z.rows()) + " logit rows for " +
                    std::to_string(annotations.size()) + " examples");
}

// log softmax of one row.
void log_softmax(std::span<const double> z, std::span<double> out) {
  const double m = *std::ranges::max_element(z);
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] - lse;
}

// Shared body of the soft and counts losses: row i is weighted by
// weight(i) / N_i on top of its counts.
template <class RowWeight>
LossResult categorical_loss(const LogitBatch& z, const AnnotationMatrix& annotations,
                            RowWeight weight) {
  check_shape(z, annotations);
  const std::size_t k = z.cols();
  LossResult result{0.0, Matrix<double>(z.rows(), k)};
  std::vector<double> logp(k);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    log_softmax(z.z().row(i), logp);
    auto counts = annotations.row(i);
    const double n = static_cast<double>(annotations.totals()[i]);
    const double w = weight(n);
    auto g = result.grad.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      const double target = counts[j] / n;
      if (counts[j] > 0) result.value -= w * target * logp[j];
      g[j] = w * (std::exp(logp[j]) - target);
    }
  }
  return result;
}

}  // namespace

void softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::ranges::max_element(logits);
  double sum = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp(logits[j] - m);
    sum += out[j];
  }
  for (double& v : out) v /= sum;
}

Matrix<double> softmax_rows(const Matrix<double>& logits) {
  Matrix<double> out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) softmax(logits.row(i), out.row(i));
  return out;
}

LogitBatch::LogitBatch(Matrix<double> z) : z_(std::move(z)) {
  for (double v : z_.data())
    if (!std::isfinite(v)) throw DataError("logits must be finite");
  if (!z_.empty() && z_.cols() == 0) throw DataError("logits need at least one class");
}

LogitBatch LogitBatch::from_probabilities(const Matrix<double>& probs) {
  Matrix<double> z(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.data().size(); ++i)
    z.data()[i] = std::log(std::max(probs.data()[i], kProbabilityFloor));
  return LogitBatch(std::move(z));
}

PredictionSet softmax_point_estimate(const LogitBatch& z) {
  std::vector<std::string> ids(z.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  return PredictionSet(std::move(ids), softmax_rows(z.z()), PredictionKind::probabilities);
}

Matrix<double> dirichlet_mean_rows(const LogitBatch& z) {
  Matrix<double> out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto alpha = out.row(i);
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
      alpha[j] = std::exp(z.z()(i, j));
      total += alpha[j];
    }
    for (double& a : alpha) a /= total;
  }
  return out;
}

LossResult loss_soft(const LogitBatch& z, const AnnotationMatrix& annotations) {
  return categorical_loss(z, annotations, [](double) { return 1.0; });
}

LossResult loss_counts(const LogitBatch& z, const AnnotationMatrix& annotations) {
  return categorical_loss(z, annotations, [](double n) { return n; });
}

LossResult loss_dirichlet_multinomial(const LogitBatch& z, const AnnotationMatrix& annotations) {
  check_shape(z, annotations);
  const std::size_t k = z.cols();
  LossResult result{0.0, Matrix<double>(z.rows(), k)};
  std::vector<double> alpha(k);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zi = z.z().row(i);
    for (std::size_t j = 0; j < k; ++j) {
      alpha[j] = std::exp(zi[j]);
      if (!(alpha[j] > 0.0) || !std::isfinite(alpha[j]))
        throw DataError("logit " + std::to_string(zi[j]) +
                        " is outside the range where exp(z) is a valid concentration");
    }
    auto g = result.grad.row(i);
    result.value += dm_row_nll_grad(alpha, annotations.row(i), g);
    for (std::size_t j = 0; j < k; ++j) g[j] *= alpha[j];  // d alpha / d z = alpha
  }
  return result;
}

TemperatureScaler::TemperatureScaler(double temperature) : t_(temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    throw DataError("temperature must be positive and finite");
}

double tempered_soft_cross_entropy(const LogitBatch& z, const AnnotationMatrix& annotations,
                                   double temperature) {
  check_shape(z, annotations);
  const std::size_t k = z.cols();
  std::vector<double> scaled(k), logp(k);
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zi = z.z().row(i);
    for (std::size_t j = 0; j < k; ++j) scaled[j] = zi[j] / temperature;
    log_softmax(scaled, logp);
    auto counts = annotations.row(i);
    const double n = static_cast<double>(annotations.totals()[i]);
    for (std::size_t j = 0; j < k; ++j)
      if (counts[j] > 0) total -= counts[j] / n * logp[j];
  }
  return total / static_cast<double>(z.rows());
}

TemperatureScaler fit_temperature(const LogitBatch& z, const AnnotationMatrix& annotations) {
  check_shape(z, annotations);
  if (z.rows() < 2) throw DataError("temperature fitting needs at least 2 examples");
  auto objective = [&](double log_t) {
    const double value = tempered_soft_cross_entropy(z, annotations, std::exp(log_t));
    if (!std::isfinite(value)) throw DataError("calibration objective is not finite");
    return value;
  };
  const double log_t = golden_section_minimize(objective, -kLogTemperatureBound,
                                                kLogTemperatureBound, kLogTemperatureTol);
  if (objective(log_t) > objective(0.0)) return TemperatureScaler(1.0);
  return TemperatureScaler(std::exp(log_t));
}

PredictionSet apply_temperature(const LogitBatch& z, const TemperatureScaler& scaler,
                                std::vector<std::string> ids) {
  if (ids.empty()) {
    ids.resize(z.rows());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  }
  Matrix<double> scaled = z.z();
  for (double& v : scaled.data()) v /= scaler.temperature();
  return PredictionSet(std::move(ids), softmax_rows(scaled), PredictionKind::probabilities);
}

double class_marginal_density(const DirichletPrior& alpha, std::size_t k, double x) {
  if (k >= alpha.size()) throw DataError("class index out of range");
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double a = alpha[k];
  const double b = alpha.concentration() - a;
  if (b <= 0.0) return 0.0;
  const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta);
}

}  // namespace bestscore
