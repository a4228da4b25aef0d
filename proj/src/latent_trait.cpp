#include "bestscore/latent_trait.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <set>

#include "bestscore/annotations.hpp"
#include "bestscore/error.hpp"
#include "bestscore/optimize.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

namespace {

constexpr double kFrequencyClamp = 1e-12;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Distinct response vectors with multiplicities, in lexicographic order.
struct PatternSet {
  Matrix<int> patterns;
  std::vector<double> counts;
  std::vector<std::size_t> row_to_pattern;

  explicit PatternSet(const ResponseTable& table) {
    std::map<std::vector<int>, std::size_t> index;
    std::vector<std::vector<int>> rows;
    for (std::size_t a = 0; a < table.annotators(); ++a) {
      auto r = table.responses().row(a);
      index.emplace(std::vector<int>(r.begin(), r.end()), 0);
    }
    std::size_t next = 0;
    for (auto& [row, idx] : index) {
      idx = next++;
      patterns.append_row(std::span<const int>(row));
      counts.push_back(0.0);
    }
    row_to_pattern.resize(table.annotators());
    for (std::size_t a = 0; a < table.annotators(); ++a) {
      auto r = table.responses().row(a);
      const std::size_t p = index.at(std::vector<int>(r.begin(), r.end()));
      row_to_pattern[a] = p;
      counts[p] += 1.0;
    }
  }
};

// Per (question, node) tables for a set of latent points: log P(y=1),
// log P(y=0) and P(y=1).
struct NodeTables {
  std::vector<double> l1, l0, sig;

  void fill(std::span<const double> loadings, std::span<const double> intercepts,
            const Matrix<double>& nodes) {
    const std::size_t m = intercepts.size(), d = nodes.cols(), count = nodes.rows();
    l1.resize(m * count);
    l0.resize(m * count);
    sig.resize(m * count);
    for (std::size_t q = 0; q < m; ++q) {
      for (std::size_t n = 0; n < count; ++n) {
        double s = intercepts[q];
        for (std::size_t t = 0; t < d; ++t) s += loadings[q * d + t] * nodes(n, t);
        const double sp = softplus(s);
        l1[q * count + n] = s - sp;
        l0[q * count + n] = -sp;
        sig[q * count + n] = std::exp(s - sp);
      }
    }
  }
};

using Mat2 = std::array<std::array<double, 2>, 2>;

// Where an adaptive rule sits for one response pattern: nodes z = mu + L u
// for standard nodes u, with mu the posterior mode, P the negative Hessian
// of the log posterior there, C its Cholesky factor and L = C^{-T}.
struct Centre {
  std::array<double, 2> mu{};
  Mat2 P{}, C{}, L{};
  Matrix<double> nodes;
  std::vector<double> log_weights;
};

Centre recentre(std::span<const int> y, std::span<const double> loadings,
                std::span<const double> intercepts, const QuadratureRule& rule) {
  const std::size_t m = intercepts.size(), d = rule.dimension();
  Centre c;
  std::array<double, 2> grad{}, step{}, trial{};

  auto log_post = [&](const std::array<double, 2>& z) {
    double v = 0.0;
    for (std::size_t t = 0; t < d; ++t) v -= 0.5 * z[t] * z[t];
    for (std::size_t q = 0; q < m; ++q) {
      double s = intercepts[q];
      for (std::size_t t = 0; t < d; ++t) s += loadings[q * d + t] * z[t];
      v += y[q] ? s - softplus(s) : -softplus(s);
    }
    return v;
  };
  auto derivatives = [&](const std::array<double, 2>& z) {
    for (std::size_t t = 0; t < d; ++t) {
      grad[t] = -z[t];
      for (std::size_t u = 0; u < d; ++u) c.P[t][u] = t == u ? 1.0 : 0.0;
    }
    for (std::size_t q = 0; q < m; ++q) {
      const double* w = loadings.data() + q * d;
      double s = intercepts[q];
      for (std::size_t t = 0; t < d; ++t) s += w[t] * z[t];
      const double p = 1.0 / (1.0 + std::exp(-s));
      for (std::size_t t = 0; t < d; ++t) {
        grad[t] += (y[q] - p) * w[t];
        for (std::size_t u = 0; u < d; ++u) c.P[t][u] += p * (1.0 - p) * w[t] * w[u];
      }
    }
  };

  // The log posterior is strictly concave, so damped Newton converges.
  double value = log_post(c.mu);
  for (int it = 0; it < 100; ++it) {
    derivatives(c.mu);
    if (d == 1) {
      step[0] = grad[0] / c.P[0][0];
    } else {
      const double det = c.P[0][0] * c.P[1][1] - c.P[0][1] * c.P[1][0];
      step[0] = (c.P[1][1] * grad[0] - c.P[0][1] * grad[1]) / det;
      step[1] = (c.P[0][0] * grad[1] - c.P[1][0] * grad[0]) / det;
    }
    double scale = 1.0, next = value;
    for (int halving = 0; halving < 50; ++halving, scale *= 0.5) {
      for (std::size_t t = 0; t < d; ++t) trial[t] = c.mu[t] + scale * step[t];
      next = log_post(trial);
      if (next >= value) break;
    }
    if (next < value) break;
    double moved = 0.0;
    for (std::size_t t = 0; t < d; ++t) moved = std::max(moved, std::abs(trial[t] - c.mu[t]));
    c.mu = trial;
    value = next;
    if (moved <= 1e-13 * (1.0 + std::abs(c.mu[0]) + std::abs(c.mu[1]))) break;
  }
  derivatives(c.mu);

  double log_det_l = 0.0;
  if (d == 1) {
    c.C[0][0] = std::sqrt(c.P[0][0]);
    c.L[0][0] = 1.0 / c.C[0][0];
  } else {
    c.C[0][0] = std::sqrt(c.P[0][0]);
    c.C[1][0] = c.P[1][0] / c.C[0][0];
    c.C[1][1] = std::sqrt(c.P[1][1] - c.C[1][0] * c.C[1][0]);
    c.L[0][0] = 1.0 / c.C[0][0];
    c.L[0][1] = -c.C[1][0] / (c.C[0][0] * c.C[1][1]);
    c.L[1][1] = 1.0 / c.C[1][1];
  }
  for (std::size_t t = 0; t < d; ++t) log_det_l += std::log(c.L[t][t]);

  c.nodes = Matrix<double>(rule.size(), d);
  c.log_weights.resize(rule.size());
  for (std::size_t n = 0; n < rule.size(); ++n) {
    double shift = log_det_l;
    for (std::size_t t = 0; t < d; ++t) {
      double z = c.mu[t];
      for (std::size_t u = t; u < d; ++u) z += c.L[t][u] * rule.nodes(n, u);
      c.nodes(n, t) = z;
      shift += 0.5 * (rule.nodes(n, t) * rule.nodes(n, t) - z * z);
    }
    c.log_weights[n] = rule.log_weights[n] + shift;
  }
  return c;
}

// Adds to `grad` the part of the log-likelihood gradient that flows through
// the parameter dependence of an adaptive centre: the mode moves by
// P^{-1} dF (F the score in z, which vanishes at the mode), and L follows
// the Cholesky factor of P. `g1` and `g2` are posterior averages over the
// nodes of grad_z log p(z) and of grad_z log p(z) u', respectively.
void add_centre_gradient(std::span<const int> y, std::span<const double> loadings,
                         std::span<const double> intercepts, const Centre& c,
                         const std::array<double, 2>& g1, const Mat2& g2, double weight,
                         std::span<double> grad) {
  const std::size_t m = intercepts.size(), d = c.nodes.cols();
  Mat2 pinv{};
  if (d == 1) {
    pinv[0][0] = 1.0 / c.P[0][0];
  } else {
    const double det = c.P[0][0] * c.P[1][1] - c.P[0][1] * c.P[1][0];
    pinv = {{{c.P[1][1] / det, -c.P[0][1] / det}, {-c.P[1][0] / det, c.P[0][0] / det}}};
  }
  std::vector<double> kappa(m), curve(m), resid(m);
  // T[t][u][v] = sum_q kappa_q (1 - 2 sigma_q) w_qt w_qu w_qv: how P moves
  // with the mode.
  double T[2][2][2] = {};
  for (std::size_t q = 0; q < m; ++q) {
    const double* w = loadings.data() + q * d;
    double s = intercepts[q];
    for (std::size_t t = 0; t < d; ++t) s += w[t] * c.mu[t];
    const double p = 1.0 / (1.0 + std::exp(-s));
    kappa[q] = p * (1.0 - p);
    curve[q] = kappa[q] * (1.0 - 2.0 * p);
    resid[q] = y[q] - p;
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v) T[t][u][v] += curve[q] * w[t] * w[u] * w[v];
  }

  // One parameter: direct score derivative dF, direct change in P (dP
  // without the mode's motion), and the direct change in s_q.
  auto contribute = [&](std::size_t index, std::size_t q, const std::array<double, 2>& dF,
                        Mat2 dP, double ds_direct) {
    const double* w = loadings.data() + q * d;
    std::array<double, 2> dmu{};
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u) dmu[t] += pinv[t][u] * dF[u];
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u) {
        for (std::size_t v = 0; v < d; ++v) dP[t][u] += T[t][u][v] * dmu[v];
        dP[t][u] += curve[q] * ds_direct * w[t] * w[u];
      }
    // dC = C Phi(L' dP L), dL = -L dC' L.
    Mat2 X{}, phi{}, dC{}, dL{};
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) X[t][u] += c.L[a][t] * dP[a][b] * c.L[b][u];
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u <= t; ++u) phi[t][u] = t == u ? 0.5 * X[t][u] : X[t][u];
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t a = 0; a < d; ++a) dC[t][u] += c.C[t][a] * phi[a][u];
    for (std::size_t t = 0; t < d; ++t)
      for (std::size_t u = 0; u < d; ++u)
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) dL[t][u] -= c.L[t][a] * dC[b][a] * c.L[b][u];

    double extra = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      extra += g1[t] * dmu[t];
      for (std::size_t u = 0; u < d; ++u) {
        extra += g2[t][u] * dL[t][u];
        extra -= 0.5 * pinv[t][u] * dP[u][t];
      }
    }
    grad[index] += weight * extra;
  };

  for (std::size_t q = 0; q < m; ++q) {
    const double* w = loadings.data() + q * d;
    for (std::size_t t = 0; t < d; ++t) {
      std::array<double, 2> dF{};
      for (std::size_t u = 0; u < d; ++u) dF[u] = -kappa[q] * c.mu[t] * w[u];
      dF[t] += resid[q];
      Mat2 dP{};
      for (std::size_t u = 0; u < d; ++u) {
        dP[t][u] += kappa[q] * w[u];
        dP[u][t] += kappa[q] * w[u];
      }
      contribute(q * d + t, q, dF, dP, c.mu[t]);
    }
    std::array<double, 2> dF{};
    for (std::size_t u = 0; u < d; ++u) dF[u] = -kappa[q] * w[u];
    contribute(m * d + q, q, dF, Mat2{}, 1.0);
  }
}

// Marginal log-likelihood over patterns; accumulates the gradient with
// respect to (loadings row-major, intercepts) into `grad` when it is
// non-empty, and posterior latent means into `means` when non-null.
// Adaptive rules are re-centred per pattern and differentiated through the
// centring.
double evaluate(const PatternSet& data, std::span<const double> loadings,
                std::span<const double> intercepts, const QuadratureRule& rule,
                std::span<double> grad, Matrix<double>* means = nullptr) {
  const std::size_t m = intercepts.size();
  const std::size_t d = rule.dimension();
  const std::size_t count = rule.size();
  const bool adaptive = rule.adaptive && d > 0;
  if (adaptive && d > 2) throw DataError("adaptive quadrature supports at most 2 traits");

  NodeTables tables;
  if (!adaptive) tables.fill(loadings, intercepts, rule.nodes);

  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
  if (means) *means = Matrix<double>(data.patterns.rows(), d);

  std::vector<double> ll(count);
  double total = 0.0;
  for (std::size_t p = 0; p < data.patterns.rows(); ++p) {
    auto y = data.patterns.row(p);
    Centre centre;
    if (adaptive) {
      centre = recentre(y, loadings, intercepts, rule);
      tables.fill(loadings, intercepts, centre.nodes);
    }
    const Matrix<double>& nodes = adaptive ? centre.nodes : rule.nodes;
    const std::vector<double>& log_weights = adaptive ? centre.log_weights : rule.log_weights;

    for (std::size_t n = 0; n < count; ++n) ll[n] = log_weights[n];
    for (std::size_t q = 0; q < m; ++q) {
      const double* src = (y[q] ? tables.l1.data() : tables.l0.data()) + q * count;
      for (std::size_t n = 0; n < count; ++n) ll[n] += src[n];
    }
    const double peak = *std::ranges::max_element(ll);
    double sum = 0.0;
    for (double v : ll) sum += std::exp(v - peak);
    const double lse = peak + std::log(sum);
    total += data.counts[p] * lse;
    if (!want_grad && !means) continue;

    // ll now holds posterior node weights.
    for (double& v : ll) v = std::exp(v - lse);
    if (means) {
      for (std::size_t n = 0; n < count; ++n)
        for (std::size_t t = 0; t < d; ++t) (*means)(p, t) += ll[n] * nodes(n, t);
    }
    if (!want_grad) continue;
    // Score in z at every node, for the centring terms.
    std::vector<double> zscore;
    if (adaptive) {
      zscore.assign(count * d, 0.0);
      for (std::size_t n = 0; n < count; ++n)
        for (std::size_t t = 0; t < d; ++t) zscore[n * d + t] = -nodes(n, t);
    }
    for (std::size_t q = 0; q < m; ++q) {
      const double* s = tables.sig.data() + q * count;
      double gb = 0.0;
      double* gw = grad.data() + q * d;
      for (std::size_t n = 0; n < count; ++n) {
        const double r = y[q] - s[n];
        const double g = data.counts[p] * ll[n] * r;
        gb += g;
        for (std::size_t t = 0; t < d; ++t) gw[t] += g * nodes(n, t);
        if (adaptive)
          for (std::size_t t = 0; t < d; ++t) zscore[n * d + t] += r * loadings[q * d + t];
      }
      grad[m * d + q] += gb;
    }
    if (adaptive) {
      std::array<double, 2> g1{};
      Mat2 g2{};
      for (std::size_t n = 0; n < count; ++n)
        for (std::size_t t = 0; t < d; ++t) {
          const double v = ll[n] * zscore[n * d + t];
          g1[t] += v;
          for (std::size_t u = 0; u < d; ++u) g2[t][u] += v * rule.nodes(n, u);
        }
      add_centre_gradient(y, loadings, intercepts, centre, g1, g2, data.counts[p], grad);
    }
  }
  return total;
}

LatentTraitModel independent_model(const ResponseTable& table) {
  const std::size_t m = table.questions();
  LatentTraitModel model{Matrix<double>(m, 0), std::vector<double>(m)};
  for (std::size_t q = 0; q < m; ++q) {
    double ones = 0.0;
    for (std::size_t a = 0; a < table.annotators(); ++a) ones += table.responses()(a, q);
    // Clamped so a question everyone answers the same way keeps a finite
    // intercept.
    const double freq = std::clamp(ones / static_cast<double>(table.annotators()),
                                   kFrequencyClamp, 1.0 - kFrequencyClamp);
    model.intercepts[q] = std::log(freq / (1.0 - freq));
  }
  return model;
}

void apply_sign_convention(LatentTraitModel& model) {
  for (std::size_t t = 0; t < model.traits(); ++t) {
    for (std::size_t q = 0; q < model.questions(); ++q) {
      const double w = model.loadings(q, t);
      if (std::abs(w) <= 1e-12) continue;
      if (w < 0.0)
        for (std::size_t r = 0; r < model.questions(); ++r) model.loadings(r, t) = -model.loadings(r, t);
      break;
    }
  }
}

}  // namespace

ResponseTable::ResponseTable(Matrix<int> responses, std::vector<std::string> question_names,
                             std::size_t dropped_rows)
    : responses_(std::move(responses)), names_(std::move(question_names)), dropped_(dropped_rows) {
  if (responses_.cols() < 2) throw DataError("latent trait analysis needs at least 2 questions");
  if (responses_.rows() < 1) throw DataError("no complete response rows");
  if (!names_.empty() && names_.size() != responses_.cols())
    throw DataError("question names do not match the number of columns");
  for (int v : responses_.data())
    if (v != 0 && v != 1) throw DataError("responses must be 0 or 1");
  std::set<std::vector<int>> distinct;
  for (std::size_t a = 0; a < responses_.rows() && distinct.size() < 2; ++a) {
    auto r = responses_.row(a);
    distinct.emplace(r.begin(), r.end());
  }
  if (distinct.size() < 2) throw DataError("need at least 2 distinct response vectors");
}

ResponseTable read_responses(std::istream& in) {
  Matrix<int> rows;
  std::vector<std::string> names;
  std::size_t width = 0;
  std::size_t dropped = 0;
  std::string text;
  std::size_t line = 0;
  auto missing = [](const std::string& f) {
    return f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan";
  };
  while (std::getline(in, text)) {
    ++line;
    auto fields = split_csv_line(text);
    for (auto& f : fields) {
      const auto b = f.find_first_not_of(" \t");
      const auto e = f.find_last_not_of(" \t");
      f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
    }
    if (fields.size() == 1 && fields[0].empty()) continue;
    const bool numeric = std::ranges::all_of(fields, [&](const std::string& f) {
      return f == "0" || f == "1" || missing(f);
    });
    if (width == 0 && !numeric && names.empty() && rows.empty()) {
      names = fields;
      width = fields.size();
      continue;
    }
    if (width == 0) width = fields.size();
    if (fields.size() != width || std::ranges::any_of(fields, missing)) {
      ++dropped;
      continue;
    }
    std::vector<int> row;
    for (const auto& f : fields) {
      if (f != "0" && f != "1")
        throw DataError("line " + std::to_string(line) + ": response '" + f + "' is not 0 or 1");
      row.push_back(f == "1");
    }
    rows.append_row(std::span<const int>(row));
  }
  return ResponseTable(std::move(rows), std::move(names), dropped);
}

QuadratureRule latent_rule(std::size_t traits, const LatentFitOptions& options) {
  if (traits == 0) return tensor_product(gauss_hermite_normal(1), 0);
  if (traits <= 2) {
    if (options.quadrature_nodes < 5)
      throw DataError("use at least 5 quadrature nodes per dimension");
    QuadratureRule rule = tensor_product(gauss_hermite_normal(options.quadrature_nodes), traits);
    rule.adaptive = true;
    return rule;
  }
  return monte_carlo_normal(options.mc_draws, traits, derive_seed(options.seed, traits, 0x9c));
}

double marginal_loglik(const LatentTraitModel& model, const ResponseTable& responses,
                       const QuadratureRule& rule) {
  if (model.questions() != responses.questions())
    throw DataError("model and responses have different numbers of questions");
  if (model.traits() != rule.dimension())
    throw DataError("integration rule dimension does not match the number of traits");
  return evaluate(PatternSet(responses), model.loadings.data(), model.intercepts, rule, {});
}

LatentTraitModel loglik_gradient(const LatentTraitModel& model, const ResponseTable& responses,
                                 const QuadratureRule& rule) {
  if (model.questions() != responses.questions() || model.traits() != rule.dimension())
    throw DataError("model does not match the responses or the integration rule");
  const std::size_t w_size = model.loadings.data().size();
  std::vector<double> grad(w_size + model.questions());
  evaluate(PatternSet(responses), model.loadings.data(), model.intercepts, rule, grad);
  LatentTraitModel out{Matrix<double>(model.questions(), model.traits()),
                       std::vector<double>(grad.begin() + static_cast<std::ptrdiff_t>(w_size),
                                           grad.end())};
  std::copy(grad.begin(), grad.begin() + static_cast<std::ptrdiff_t>(w_size),
            out.loadings.data().begin());
  return out;
}

Matrix<double> project_annotators(const LatentTraitModel& model, const ResponseTable& responses,
                                  const QuadratureRule& rule) {
  if (model.questions() != responses.questions() || model.traits() != rule.dimension())
    throw DataError("model does not match the responses or the integration rule");
  const PatternSet data(responses);
  Matrix<double> pattern_means;
  evaluate(data, model.loadings.data(), model.intercepts, rule, {}, &pattern_means);
  Matrix<double> out(responses.annotators(), model.traits());
  for (std::size_t a = 0; a < responses.annotators(); ++a) {
    auto src = pattern_means.row(data.row_to_pattern[a]);
    std::ranges::copy(src, out.row(a).begin());
  }
  return out;
}

LatentFit fit_latent(const ResponseTable& responses, std::size_t traits,
                     const LatentFitOptions& options) {
  const std::size_t m = responses.questions();
  if (traits > m) throw DataError("more traits than questions");
  const QuadratureRule rule = latent_rule(traits, options);
  const LatentTraitModel null_model = independent_model(responses);
  if (traits == 0) {
    return {null_model, marginal_loglik(null_model, responses, rule), 0, true};
  }

  // Starting point.
  LatentTraitModel start{Matrix<double>(m, traits), null_model.intercepts};
  Rng rng(derive_seed(options.seed, traits, 0x1a7e));
  for (double& w : start.loadings.data()) w = 0.5 * rng.normal();
  if (options.init) {
    const auto& init = *options.init;
    if (init.questions() != m) throw DataError("initial model has the wrong number of questions");
    start.intercepts = init.intercepts;
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t t = 0; t < std::min(traits, init.traits()); ++t)
        start.loadings(q, t) = init.loadings(q, t);
    // Extra traits start small so the fit begins near the initial model.
    for (std::size_t q = 0; q < m; ++q)
      for (std::size_t t = init.traits(); t < traits; ++t) start.loadings(q, t) *= 0.2;
  }

  const PatternSet data(responses);
  const double n = static_cast<double>(responses.annotators());
  const std::size_t w_size = m * traits;
  std::vector<double> x(start.loadings.data().begin(), start.loadings.data().end());
  x.insert(x.end(), start.intercepts.begin(), start.intercepts.end());

  Objective objective = [&](std::span<const double> v, std::span<double> grad) {
    const double ll = evaluate(data, v.subspan(0, w_size), v.subspan(w_size), rule, grad);
    for (double& g : grad) g = -g / n;
    return -ll / n;
  };
  MinimizeOptions mopts;
  mopts.grad_tol = options.tol;
  mopts.max_iter = options.max_iter;
  const MinimizeResult result = minimize_bfgs(objective, std::move(x), mopts);
  x = result.x;

  LatentFit fit;
  fit.model.loadings = Matrix<double>(m, traits);
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(w_size),
            fit.model.loadings.data().begin());
  fit.model.intercepts.assign(x.begin() + static_cast<std::ptrdiff_t>(w_size), x.end());
  apply_sign_convention(fit.model);
  fit.loglik = marginal_loglik(fit.model, responses, rule);
  fit.iterations = result.iterations;
  fit.converged = result.converged;
  return fit;
}

double saturated_loglik(const ResponseTable& responses) {
  const PatternSet data(responses);
  const double n = static_cast<double>(responses.annotators());
  double ll = 0.0;
  for (double c : data.counts) ll += c * std::log(c / n);
  return ll;
}

DevianceReport deviance_from_loglik(double loglik_model, const ResponseTable& responses) {
  DevianceReport r;
  r.loglik_model = loglik_model;
  r.loglik_saturated = saturated_loglik(responses);
  const LatentFit null_fit = fit_latent(responses, 0);
  r.loglik_null = null_fit.loglik;
  r.deviance = 2.0 * (r.loglik_saturated - r.loglik_model);
  r.null_deviance = 2.0 * (r.loglik_saturated - r.loglik_null);
  // With no null deviance there is nothing to explain; report 0.
  r.percent_explained = r.null_deviance > 0.0 ? 100.0 * (1.0 - r.deviance / r.null_deviance) : 0.0;
  r.percent_residual = 100.0 - r.percent_explained;
  return r;
}

DevianceReport deviance(const LatentTraitModel& model, const ResponseTable& responses,
                        const LatentFitOptions& options) {
  const QuadratureRule rule = latent_rule(model.traits(), options);
  return deviance_from_loglik(marginal_loglik(model, responses, rule), responses);
}

}  // namespace bestscore
