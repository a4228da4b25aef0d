#include "bestscore/divisiveness.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "json.hpp"

#include "bestscore/error.hpp"
#include "bestscore/random.hpp"

namespace bestscore {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// |log LR|, with both LR = 0 and LR = +inf mapping to +inf.
double extremity(FeatureCounts counts, ClassTotals totals) {
  return std::abs(std::log(likelihood_ratio(counts, totals)));
}

// Distribution of the number of a feature's carriers that land in the less
// ethical class when labels are shuffled: Hypergeometric(population,
// less, carriers).
class HypergeometricTable {
 public:
  HypergeometricTable(long long population, long long less, long long carriers)
      : lo_(std::max(0LL, carriers - (population - less))), hi_(std::min(carriers, less)) {
    auto log_choose = [](long long n, long long k) {
      return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
    };
    const long long more = population - less;
    std::vector<double> logp;
    for (long long k = lo_; k <= hi_; ++k)
      logp.push_back(log_choose(less, k) + log_choose(more, carriers - k) -
                     log_choose(population, carriers));
    const double peak = *std::ranges::max_element(logp);
    cdf_.resize(logp.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < logp.size(); ++i) {
      acc += std::exp(logp[i] - peak);
      cdf_[i] = acc;
    }
  }

  long long lo() const { return lo_; }
  long long hi() const { return hi_; }

  long long sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                              static_cast<std::ptrdiff_t>(cdf_.size()) - 1);
    return lo_ + idx;
  }

 private:
  long long lo_, hi_;
  std::vector<double> cdf_;
};

}  // namespace

BinaryLabeledItems::BinaryLabeledItems(std::vector<LabeledItem> items) : items_(std::move(items)) {
  std::set<std::string> vocab;
  std::unordered_set<std::string> ids;
  for (const auto& item : items_) {
    if (!item.id.empty() && !ids.insert(item.id).second)
      throw DataError("duplicate item id '" + item.id + "'");
    (item.label == EthicsClass::less_ethical ? totals_.less : totals_.more) += 1;
    // A feature listed twice on one item counts once.
    std::set<std::string> distinct(item.features.begin(), item.features.end());
    for (const auto& f : distinct) {
      auto& c = counts_[f];
      (item.label == EthicsClass::less_ethical ? c.in_less : c.in_more) += 1;
      vocab.insert(f);
    }
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
}

FeatureCounts BinaryLabeledItems::counts(const std::string& feature) const {
  auto it = counts_.find(feature);
  if (it == counts_.end()) throw DataError("feature '" + feature + "' is not in the vocabulary");
  return it->second;
}

BinaryLabeledItems read_items(std::istream& in) {
  std::vector<LabeledItem> items;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    const std::string where = "line " + std::to_string(line) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + "expected a JSON object");
    LabeledItem item;
    if (obj.contains("id")) {
      const auto& id = obj["id"];
      item.id = id.is_string() ? id.get<std::string>() : id.dump();
    }
    if (!obj.contains("class") || !obj["class"].is_string())
      throw DataError(where + "missing string field 'class'");
    const std::string cls = obj["class"].get<std::string>();
    if (cls == "less" || cls == "less_ethical") {
      item.label = EthicsClass::less_ethical;
    } else if (cls == "more" || cls == "more_ethical") {
      item.label = EthicsClass::more_ethical;
    } else {
      throw DataError(where + "class must be 'less' or 'more', got '" + cls + "'");
    }
    if (!obj.contains("features") || !obj["features"].is_array())
      throw DataError(where + "missing array field 'features'");
    for (const auto& f : obj["features"]) {
      if (!f.is_string()) throw DataError(where + "features must be strings");
      item.features.push_back(f.get<std::string>());
    }
    items.push_back(std::move(item));
  }
  return BinaryLabeledItems(std::move(items));
}

double likelihood_ratio(FeatureCounts counts, ClassTotals totals) {
  if (totals.less < 1 || totals.more < 1) throw DataError("class totals must be at least 1");
  if (counts.in_less < 0 || counts.in_more < 0 || counts.in_less > totals.less ||
      counts.in_more > totals.more)
    throw DataError("feature counts exceed class totals");
  if (counts.in_less == 0 && counts.in_more == 0) return 1.0;
  if (counts.in_more == 0) return kInf;
  return (static_cast<double>(counts.in_less) / static_cast<double>(totals.less)) /
         (static_cast<double>(counts.in_more) / static_cast<double>(totals.more));
}

PermTestResult permutation_test(const BinaryLabeledItems& items, const std::string& feature,
                                const PermTestOptions& options) {
  if (options.n_samples < 1) throw DataError("permutation test needs at least one sample");
  const FeatureCounts observed = items.counts(feature);
  const ClassTotals totals = items.class_totals();

  PermTestResult result;
  result.feature = feature;
  result.lr = likelihood_ratio(observed, totals);
  result.worse = observed.in_less;
  result.better = observed.in_more;
  result.total = observed.in_less + observed.in_more;

  const long long carriers = result.total;
  const HypergeometricTable table(totals.less + totals.more, totals.less, carriers);
  // Which permuted outcomes are at least as extreme as the observed one.
  const double threshold = extremity(observed, totals);
  const double slack = 1e-12 * std::max(1.0, std::isfinite(threshold) ? threshold : 1.0);
  std::vector<char> extreme;
  for (long long k = table.lo(); k <= table.hi(); ++k) {
    const double e = extremity({k, carriers - k}, totals);
    extreme.push_back(std::isinf(threshold) ? std::isinf(e) : e >= threshold - slack);
  }

  Rng rng(derive_seed(options.seed, stable_hash(feature)));
  std::size_t hits = 0;
  for (std::size_t s = 0; s < options.n_samples; ++s)
    hits += extreme[static_cast<std::size_t>(table.sample(rng) - table.lo())];

  const auto n = static_cast<double>(options.n_samples);
  result.p_raw = options.conservative ? (static_cast<double>(hits) + 1.0) / (n + 1.0)
                                      : static_cast<double>(hits) / n;
  result.p_adjusted = result.p_raw;
  return result;
}

HolmResult holm_bonferroni(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0, 1)");
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("p values must be in [0, 1]");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return p_values[a] < p_values[b];
  });
  HolmResult out{std::vector<bool>(m, false), std::vector<double>(m, 1.0)};
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const std::size_t i = order[rank];
    const double scaled = std::min(1.0, static_cast<double>(m - rank) * p_values[i]);
    running = std::max(running, scaled);
    out.p_adjusted[i] = running;
    out.rejected[i] = running <= alpha;
  }
  return out;
}

std::vector<PermTestResult> permutation_tests(const BinaryLabeledItems& items,
                                              const PermTestOptions& options,
                                              std::vector<std::string> features) {
  if (features.empty()) features = items.vocabulary();
  std::vector<PermTestResult> results;
  results.reserve(features.size());
  for (const auto& f : features) results.push_back(permutation_test(items, f, options));

  std::vector<double> p(results.size());
  std::ranges::transform(results, p.begin(), [](const PermTestResult& r) { return r.p_raw; });
  const HolmResult holm = holm_bonferroni(p, options.alpha);
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].p_adjusted = holm.p_adjusted[i];
    results[i].rejected = holm.rejected[i];
  }
  std::ranges::stable_sort(results, [](const PermTestResult& a, const PermTestResult& b) {
    if (a.lr != b.lr) return a.lr < b.lr;
    return a.feature < b.feature;
  });
  return results;
}

}  // namespace bestscore
