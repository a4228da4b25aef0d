#include <cmath>
#include <numeric>

#include "doctest.h"
#include "support.hpp"

#include "bestscore/error.hpp"
#include "bestscore/metrics.hpp"

using namespace bestscore;

namespace {

AlignedEval make_eval(Matrix<int> counts, Matrix<double> probs) {
  auto a = AnnotationMatrix::from_counts(std::move(counts));
  PredictionSet p(a.ids(), std::move(probs), PredictionKind::probabilities);
  return align(a, p);
}

Matrix<double> random_probs(Rng& rng, std::size_t n, std::size_t k) {
  Matrix<double> p(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += p(i, j) = rng.uniform();
    for (std::size_t j = 0; j < k; ++j) p(i, j) /= s;
  }
  return p;
}

double tv(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("metric names") {
  CHECK(parse_metric("xentropy") == MetricKind::xentropy_soft);
  CHECK(parse_metric("xentropy_soft") == MetricKind::xentropy_soft);
  CHECK(parse_metric("accuracy") == MetricKind::accuracy);
  CHECK(parse_metric("f1") == MetricKind::macro_f1);
  CHECK(parse_metric("macro_f1") == MetricKind::macro_f1);
  CHECK(parse_metric("tv") == MetricKind::total_variation);
  CHECK_THROWS_AS(parse_metric("auc"), UsageError);
  CHECK(metric_name(MetricKind::macro_f1) == "macro_f1");
  CHECK(is_hard(MetricKind::accuracy));
  CHECK_FALSE(is_hard(MetricKind::total_variation));
  CHECK_THROWS_AS(MetricConfig(MetricKind::accuracy, 1), DataError);
}

TEST_CASE("uniform predictions score ln K") {
  Rng rng(1);
  for (std::size_t k : {2u, 5u}) {
    auto ann = testing::random_annotations(rng, 100, k, 1, 20);
    Matrix<double> uniform(100, k, 1.0 / static_cast<double>(k));
    auto eval = align(ann, PredictionSet(ann.ids(), uniform, PredictionKind::probabilities));
    CHECK(cross_entropy_soft(eval).value ==
          doctest::Approx(std::log(static_cast<double>(k))).epsilon(1e-12));
  }
}

TEST_CASE("cross-entropy of the label distribution is its entropy") {
  auto eval = make_eval(Matrix<int>::from_rows({{3, 1}}), Matrix<double>::from_rows({{0.75, 0.25}}));
  const double expected = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
  CHECK(cross_entropy_soft(eval).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.5623).epsilon(1e-4));
}

TEST_CASE("zero probabilities are clamped, not infinite") {
  auto eval = make_eval(Matrix<int>::from_rows({{1, 0}}), Matrix<double>::from_rows({{0.0, 1.0}}));
  CHECK(cross_entropy_soft(eval).value == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("cross-entropy is at least the label entropy") {
  Rng rng(2);
  auto ann = testing::random_annotations(rng, 200, 4, 1, 15);
  auto probs = random_probs(rng, 200, 4);
  auto eval = align(ann, PredictionSet(ann.ids(), probs, PredictionKind::probabilities));
  const auto per = cross_entropy_soft(eval).per_example.value();
  for (std::size_t i = 0; i < ann.size(); ++i) {
    std::vector<double> q(4);
    for (std::size_t j = 0; j < 4; ++j) q[j] = ann.row(i)[j] / double(ann.totals()[i]);
    CHECK(per[i] >= entropy(q) - 1e-12);
  }
}

TEST_CASE("majority label and tie-break") {
  CHECK(majority_label(std::vector<int>{0, 7, 0, 0, 0}) == 1);
  CHECK(majority_label(std::vector<int>{3, 3}) == 0);
  CHECK(majority_label(std::vector<int>{0, 0, 5}) == 2);
  CHECK(argmax_label(std::vector<double>{0.4, 0.4, 0.2}) == 0);
}

TEST_CASE("accuracy") {
  using V = std::vector<std::size_t>;
  CHECK(accuracy(V{0, 1, 2}, V{0, 1, 2}).value == 1.0);
  CHECK(accuracy(V{1, 0}, V{0, 1}).value == 0.0);
  CHECK(accuracy(V{0, 1, 1, 0}, V{0, 1, 1, 1}).value == 0.75);
  CHECK_THROWS_AS(accuracy(V{0}, V{0, 1}), DataError);
}

TEST_CASE("macro F1") {
  using V = std::vector<std::size_t>;
  CHECK(macro_f1(V{0, 1, 2}, V{0, 1, 2}, 3).value == 1.0);
  CHECK(macro_f1(V{0, 0, 0, 0}, V{0, 0, 1, 1}, 2).value == doctest::Approx(1.0 / 3.0));
  CHECK(macro_f1(V{1, 1, 1}, V{1, 1, 1}, 5).value == doctest::Approx(0.2));
  CHECK_THROWS_AS(macro_f1(V{0, 5}, V{0, 1}, 3), DataError);
}

TEST_CASE("macro F1 against a direct precision and recall computation") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(4), n = 1 + rng.below(60);
    std::vector<std::size_t> pred(n), gold(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = rng.below(k), gold[i] = rng.below(k);
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double tp = 0, np = 0, ng = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += pred[i] == c && gold[i] == c;
        np += pred[i] == c;
        ng += gold[i] == c;
      }
      const double precision = np > 0 ? tp / np : 0.0;
      const double recall = ng > 0 ? tp / ng : 0.0;
      sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    }
    CHECK(macro_f1(pred, gold, k).value == doctest::Approx(sum / double(k)).epsilon(1e-12));
  }
}

TEST_CASE("hard metrics are invariant under relabeling classes") {
  Rng rng(4);
  const std::size_t k = 4, n = 100;
  std::vector<std::size_t> pred(n), gold(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = rng.below(k), gold[i] = rng.below(k);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  std::vector<std::size_t> pred2(n), gold2(n);
  for (std::size_t i = 0; i < n; ++i) pred2[i] = perm[pred[i]], gold2[i] = perm[gold[i]];
  CHECK(macro_f1(pred, gold, k).value == doctest::Approx(macro_f1(pred2, gold2, k).value));
  CHECK(accuracy(pred, gold).value == accuracy(pred2, gold2).value);
}

TEST_CASE("total variation") {
  auto same = make_eval(Matrix<int>::from_rows({{1, 3}}), Matrix<double>::from_rows({{0.25, 0.75}}));
  CHECK(total_variation(same).value == doctest::Approx(0.0));
  auto disjoint = make_eval(Matrix<int>::from_rows({{0, 2}}), Matrix<double>::from_rows({{1.0, 0.0}}));
  CHECK(total_variation(disjoint).value == doctest::Approx(1.0));
  auto half = make_eval(Matrix<int>::from_rows({{1, 1}}), Matrix<double>::from_rows({{0.8, 0.2}}));
  CHECK(total_variation(half).value == doctest::Approx(0.3));
}

TEST_CASE("total variation is a metric on random triples") {
  Rng rng(5);
  auto p = random_probs(rng, 200, 5);
  for (std::size_t i = 0; i + 2 < 200; i += 3) {
    auto a = p.row(i), b = p.row(i + 1), c = p.row(i + 2);
    CHECK(tv(a, b) == doctest::Approx(tv(b, a)));
    CHECK(tv(a, c) <= tv(a, b) + tv(b, c) + 1e-15);
  }
}

TEST_CASE("metrics do not depend on example order") {
  Rng rng(6);
  auto ann = testing::random_annotations(rng, 80, 3, 1, 9);
  auto probs = random_probs(rng, 80, 3);
  PredictionSet preds(ann.ids(), probs, PredictionKind::probabilities);

  std::vector<std::size_t> order(80);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::vector<std::string> ids;
  Matrix<int> counts;
  for (auto i : order) {
    ids.push_back(ann.ids()[i]);
    counts.append_row(ann.row(i));
  }
  AnnotationMatrix shuffled(ids, counts);
  for (MetricKind m : {MetricKind::xentropy_soft, MetricKind::accuracy, MetricKind::macro_f1,
                       MetricKind::total_variation}) {
    CHECK(evaluate(align(ann, preds), m).value ==
          doctest::Approx(evaluate(align(shuffled, preds), m).value).epsilon(1e-12));
  }
}

TEST_CASE("scorer agrees with the free functions") {
  Rng rng(7);
  auto ann = testing::random_annotations(rng, 60, 3, 1, 9);
  auto probs = random_probs(rng, 60, 3);
  auto eval = align(ann, PredictionSet(ann.ids(), probs, PredictionKind::probabilities));
  for (MetricKind m : {MetricKind::xentropy_soft, MetricKind::accuracy, MetricKind::macro_f1,
                       MetricKind::total_variation}) {
    Scorer s(ann, MetricConfig(m, 3));
    CHECK(s.score(probs) == doctest::Approx(evaluate(eval, m).value).epsilon(1e-12));
  }
}

TEST_CASE("entropy") {
  CHECK(entropy(std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK(entropy(std::vector<double>{1.0, 0.0}) == 0.0);
}
