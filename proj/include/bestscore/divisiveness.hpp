#pragma once

// Association between binary item features (e.g. an action's root verb) and
// a binary class outcome: likelihood-ratio statistic, Monte Carlo
// permutation test, Holm-Bonferroni correction.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace bestscore {

enum class EthicsClass { less_ethical, more_ethical };

struct LabeledItem {
  std::string id;
  EthicsClass label = EthicsClass::less_ethical;
  std::vector<std::string> features;
};

struct FeatureCounts {
  long long in_less = 0;  // items of the less ethical class carrying the feature
  long long in_more = 0;
};

struct ClassTotals {
  long long less = 0;
  long long more = 0;
};

class BinaryLabeledItems {
 public:
  explicit BinaryLabeledItems(std::vector<LabeledItem> items);

  const std::vector<LabeledItem>& items() const { return items_; }
  // Sorted distinct features.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  ClassTotals class_totals() const { return totals_; }
  // Throws DataError for a feature outside the vocabulary.
  FeatureCounts counts(const std::string& feature) const;

 private:
  std::vector<LabeledItem> items_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, FeatureCounts> counts_;
  ClassTotals totals_;
};

// JSONL: {"id": ..., "class": "less"|"more", "features": ["wanting", ...]}
BinaryLabeledItems read_items(std::istream& in);

// (in_less / less_total) / (in_more / more_total). +inf when only the less
// ethical class carries the feature, 1 when neither does.
double likelihood_ratio(FeatureCounts counts, ClassTotals totals);

struct PermTestResult {
  std::string feature;
  double lr = 1.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  bool rejected = false;
  long long better = 0;  // occurrences in the more ethical class
  long long worse = 0;   // occurrences in the less ethical class
  long long total = 0;
};

struct PermTestOptions {
  std::size_t n_samples = 100'000;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  // (extreme + 1) / (n + 1) instead of extreme / n; never returns 0.
  bool conservative = false;
};

// Two-tailed Monte Carlo permutation test of one feature. A permutation is
// as extreme as the data when |log LR| is at least the observed |log LR|
// (infinities compare as maximal). The p value can be exactly 0. The stream
// is derived from (seed, feature), so results do not depend on item order or
// on which other features are tested.
//
// Shuffling class labels only changes the statistic through how many of the
// feature's carriers land in the less ethical class, and that count is
// hypergeometric. Each permutation is drawn from that distribution directly.
PermTestResult permutation_test(const BinaryLabeledItems& items, const std::string& feature,
                                const PermTestOptions& options = {});

struct HolmResult {
  std::vector<bool> rejected;
  std::vector<double> p_adjusted;
};

// Step-down Holm-Bonferroni. Adjusted p values are running maxima of
// (m - k + 1) p_(k) clipped to 1; a hypothesis is rejected iff its adjusted p
// is at most alpha.
HolmResult holm_bonferroni(std::span<const double> p_values, double alpha);

// Tests every feature in `features` (the whole vocabulary when empty),
// applies the correction across them, and sorts by LR ascending.
std::vector<PermTestResult> permutation_tests(const BinaryLabeledItems& items,
                                              const PermTestOptions& options,
                                              std::vector<std::string> features = {});

}  // namespace bestscore
