#pragma once

// Training likelihoods over annotation counts, softmax point estimates and
// temperature-scaling calibration.
//
// A model emits logits z_i. Read as a softmax layer they give class
// probabilities; read as a Dirichlet-multinomial layer, alpha_i = exp(z_i)
// gives a distribution over class probabilities whose mean is the softmax.

#include <span>

#include "bestscore/annotations.hpp"
#include "bestscore/dirichlet.hpp"
#include "bestscore/matrix.hpp"

namespace bestscore {

// Numerically stable softmax of one row (max-shifted).
void softmax(std::span<const double> logits, std::span<double> out);
Matrix<double> softmax_rows(const Matrix<double>& logits);

// Row-wise logits; entries must be finite.
class LogitBatch {
 public:
  explicit LogitBatch(Matrix<double> z);
  // Log-probabilities (clamped at 1e-12) as logits.
  static LogitBatch from_probabilities(const Matrix<double>& probs);

  const Matrix<double>& z() const { return z_; }
  std::size_t rows() const { return z_.rows(); }
  std::size_t cols() const { return z_.cols(); }

 private:
  Matrix<double> z_;
};

struct LossResult {
  double value = 0.0;
  Matrix<double> grad;  // d value / d z, same shape as the logits
};

PredictionSet softmax_point_estimate(const LogitBatch& z);
// Mean of Dirichlet(exp(z_i)) per row: exp(z_ij) / sum_k exp(z_ik), computed
// without the max shift.
Matrix<double> dirichlet_mean_rows(const LogitBatch& z);

// Cross-entropy against the normalized counts: -sum_ij (Y_ij/N_i) log p_ij.
LossResult loss_soft(const LogitBatch& z, const AnnotationMatrix& annotations);
// Cross-entropy against raw counts: -sum_ij Y_ij log p_ij.
LossResult loss_counts(const LogitBatch& z, const AnnotationMatrix& annotations);
// Dirichlet-multinomial negative log-likelihood with alpha_i = exp(z_i).
LossResult loss_dirichlet_multinomial(const LogitBatch& z, const AnnotationMatrix& annotations);

class TemperatureScaler {
 public:
  explicit TemperatureScaler(double temperature);
  double temperature() const { return t_; }

 private:
  double t_;
};

// Fits T minimizing the mean soft cross-entropy of softmax(z / T) over
// log T in [-5, 5] (golden section, tolerance 1e-6 in log T). Never returns a
// temperature that fits worse than T = 1.
TemperatureScaler fit_temperature(const LogitBatch& z, const AnnotationMatrix& annotations);
PredictionSet apply_temperature(const LogitBatch& z, const TemperatureScaler& scaler,
                                std::vector<std::string> ids = {});

// Mean per-example soft cross-entropy of softmax(z / T).
double tempered_soft_cross_entropy(const LogitBatch& z, const AnnotationMatrix& annotations,
                                   double temperature);

// Density at x of the Beta marginal of class k under Dirichlet(alpha), i.e.
// the distribution of one class probability.
double class_marginal_density(const DirichletPrior& alpha, std::size_t k, double x);

}  // namespace bestscore
