#pragma once

// Latent trait analysis of dense binary annotations: each annotator's
// response vector is modeled as independent Bernoulli answers given a
// standard normal latent vector z, P(y_q = 1 | z) = sigmoid(W_q . z + b_q),
// with z integrated out. Goodness of fit is measured by the deviance against
// the saturated model (every observed response vector gets its empirical
// frequency), relative to the independent model (d = 0).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bestscore/matrix.hpp"
#include "bestscore/quadrature.hpp"

namespace bestscore {

// Complete 0/1 response vectors, one row per annotator.
class ResponseTable {
 public:
  ResponseTable(Matrix<int> responses, std::vector<std::string> question_names = {},
                std::size_t dropped_rows = 0);

  std::size_t annotators() const { return responses_.rows(); }
  std::size_t questions() const { return responses_.cols(); }
  const Matrix<int>& responses() const { return responses_; }
  const std::vector<std::string>& question_names() const { return names_; }
  // Incomplete rows discarded while loading.
  std::size_t dropped_rows() const { return dropped_; }

 private:
  Matrix<int> responses_;
  std::vector<std::string> names_;
  std::size_t dropped_;
};

// CSV of 0/1 entries; an optional first line of question names. Rows with
// missing entries (empty, NA) are dropped and counted.
ResponseTable read_responses(std::istream& in);

struct LatentTraitModel {
  Matrix<double> loadings;  // questions x traits
  std::vector<double> intercepts;

  std::size_t traits() const { return loadings.cols(); }
  std::size_t questions() const { return intercepts.size(); }
};

struct LatentFitOptions {
  std::size_t quadrature_nodes = 20;  // per dimension, for 1 or 2 traits
  std::size_t mc_draws = 1000;        // for 3 or more traits
  std::uint64_t seed = 0;
  double tol = 1e-7;  // gradient norm of the mean log-likelihood
  int max_iter = 2000;
  // Starting point. Missing trait columns are filled with small random
  // loadings; by default all loadings are random and intercepts come from
  // the independent model.
  std::optional<LatentTraitModel> init;
};

struct LatentFit {
  LatentTraitModel model;
  double loglik = 0.0;  // nats, summed over annotators
  int iterations = 0;
  bool converged = false;
};

// The integration rule used for `traits` dimensions: the single empty node
// for 0, tensor Gauss-Hermite for 1-2 (re-centred per response pattern),
// Monte Carlo beyond.
QuadratureRule latent_rule(std::size_t traits, const LatentFitOptions& options);

// Maximum marginal likelihood. d = 0 is the independent model, fitted in
// closed form. Loadings follow a sign convention: the first nonzero loading
// of each trait is positive.
LatentFit fit_latent(const ResponseTable& responses, std::size_t traits,
                     const LatentFitOptions& options = {});

double marginal_loglik(const LatentTraitModel& model, const ResponseTable& responses,
                       const QuadratureRule& rule);

// Gradient of marginal_loglik with respect to the loadings and intercepts,
// laid out like the model.
LatentTraitModel loglik_gradient(const LatentTraitModel& model, const ResponseTable& responses,
                                 const QuadratureRule& rule);

// Posterior mean of the latent vector for every annotator (rows follow the
// response table).
Matrix<double> project_annotators(const LatentTraitModel& model, const ResponseTable& responses,
                                  const QuadratureRule& rule);

double saturated_loglik(const ResponseTable& responses);

struct DevianceReport {
  double loglik_model = 0.0;
  double loglik_saturated = 0.0;
  double loglik_null = 0.0;
  double deviance = 0.0;       // 2 (saturated - model)
  double null_deviance = 0.0;  // 2 (saturated - null)
  double percent_explained = 0.0;
  double percent_residual = 100.0;
};

// Deviance summary for a model with the given log-likelihood. The null
// log-likelihood is computed by fitting and evaluating the d = 0 model.
DevianceReport deviance_from_loglik(double loglik_model, const ResponseTable& responses);
DevianceReport deviance(const LatentTraitModel& model, const ResponseTable& responses,
                        const LatentFitOptions& options = {});

}  // namespace bestscore
