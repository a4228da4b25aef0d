#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "bestscore/annotations.hpp"
#include "bestscore/error.hpp"

using namespace bestscore;
using testing::TempFile;

namespace {

AnnotationLoad read_jsonl(const std::string& text, bool drop_empty = false) {
  std::istringstream in(text);
  return read_annotations(in, Format::jsonl, drop_empty);
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("jsonl row keeps counts and totals") {
  auto load = read_jsonl(R"({"id":"a1","counts":[0,7,0,0,0]})" "\n");
  const auto& m = load.matrix;
  REQUIRE(m.size() == 1);
  CHECK(m.num_classes() == 5);
  CHECK(m.totals()[0] == 7);
  CHECK(m.counts()(0, 1) == 7);
  CHECK(m.ids()[0] == "a1");
}

TEST_CASE("row order is preserved and blank lines are skipped") {
  auto m = read_jsonl("{\"id\":\"z\",\"counts\":[1,0]}\n\n{\"id\":\"a\",\"counts\":[0,2]}\n").matrix;
  REQUIRE(m.size() == 2);
  CHECK(m.ids() == std::vector<std::string>{"z", "a"});
}

TEST_CASE("inconsistent K is rejected with the line number") {
  const auto msg = error_of([] {
    read_jsonl("{\"id\":\"a1\",\"counts\":[0,7,0,0,0]}\n{\"id\":\"a2\",\"counts\":[1,1]}\n");
  });
  CHECK(msg.find("line 2") != std::string::npos);
}

TEST_CASE("zero-annotation rows are an error unless dropped") {
  const std::string text = "{\"id\":\"a1\",\"counts\":[1,0]}\n{\"id\":\"a3\",\"counts\":[0,0]}\n";
  CHECK_THROWS_AS(read_jsonl(text), DataError);
  auto load = read_jsonl(text, true);
  CHECK(load.dropped_empty == 1);
  CHECK(load.matrix.size() == 1);
}

TEST_CASE("malformed input is reported with its line") {
  CHECK(error_of([] { read_jsonl("{\"id\":\"a\",\"counts\":[1]}\n{not json\n"); })
            .find("line 2") != std::string::npos);
  CHECK_THROWS_AS(read_jsonl("{\"id\":\"a\",\"counts\":[1,-1]}\n"), DataError);
  CHECK_THROWS_AS(read_jsonl("{\"id\":\"a\",\"counts\":[1.5,1]}\n"), DataError);
  CHECK_THROWS_AS(read_jsonl("{\"id\":\"a\"}\n"), DataError);
  CHECK_THROWS_AS(read_jsonl(""), DataError);
}

TEST_CASE("duplicate ids are rejected") {
  const auto msg = error_of([] {
    read_jsonl("{\"id\":\"a\",\"counts\":[1,0]}\n{\"id\":\"a\",\"counts\":[0,1]}\n");
  });
  CHECK(msg.find("duplicate") != std::string::npos);
}

TEST_CASE("csv annotations") {
  std::istringstream in("id,c0,c1,c2\nx,1,2,0\n\"y,1\",0,0,3\n");
  auto m = read_annotations(in, Format::csv).matrix;
  REQUIRE(m.size() == 2);
  CHECK(m.ids()[1] == "y,1");
  CHECK(m.totals()[1] == 3);
  std::istringstream bad("id,c0,c1\nx,1\n");
  CHECK_THROWS_AS(read_annotations(bad, Format::csv), DataError);
}

TEST_CASE("totals equal row sums") {
  Rng rng(3);
  auto m = testing::random_annotations(rng, 200, 4, 1, 30);
  for (std::size_t i = 0; i < m.size(); ++i) {
    long long s = 0;
    for (int c : m.row(i)) s += c;
    CHECK(s == m.totals()[i]);
  }
}

TEST_CASE("load, write, load is the identity in both formats") {
  Rng rng(11);
  auto m = testing::random_annotations(rng, 50, 3, 1, 12);
  for (Format f : {Format::jsonl, Format::csv}) {
    std::stringstream buf;
    write_annotations(buf, m, f);
    auto back = read_annotations(buf, f).matrix;
    CHECK(back.ids() == m.ids());
    CHECK(back.counts() == m.counts());
  }
}

TEST_CASE("file loaders pick the format from the extension") {
  TempFile csv("id,c0,c1\na,1,1\n", ".csv");
  CHECK(format_for_path(csv.path()) == Format::csv);
  CHECK(load_annotations(csv.path(), Format::csv).size() == 1);
  CHECK(format_for_path("x.jsonl") == Format::jsonl);
  CHECK_THROWS_AS(load_annotations("/nonexistent/file.jsonl", Format::jsonl), DataError);
  CHECK_THROWS_AS(parse_format("xml"), UsageError);
}

TEST_CASE("probability predictions") {
  std::istringstream ok(R"({"id":"a1","probs":[0.2,0.2,0.2,0.2,0.2]})");
  auto p = read_predictions(ok, Format::jsonl);
  CHECK(p.kind() == PredictionKind::probabilities);
  CHECK(p.num_classes() == 5);
  CHECK(p.values()(0, 3) == doctest::Approx(0.2));

  std::istringstream bad(R"({"id":"a1","probs":[0.7,0.4]})");
  CHECK_THROWS_AS(read_predictions(bad, Format::jsonl), DataError);

  std::istringstream negative(R"({"id":"a1","probs":[1.2,-0.2]})");
  CHECK_THROWS_AS(read_predictions(negative, Format::jsonl), DataError);

  // Within 1e-6 of summing to 1: accepted and renormalized exactly.
  std::istringstream close(R"({"id":"a1","probs":[0.5000004,0.5]})");
  auto c = read_predictions(close, Format::jsonl);
  CHECK(c.values()(0, 0) + c.values()(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("logit predictions convert by softmax") {
  std::istringstream in(R"({"id":"a1","logits":[0.0,0.0]})");
  auto p = read_predictions(in, Format::jsonl, PredictionKind::logits);
  CHECK(p.kind() == PredictionKind::logits);
  auto probs = p.probabilities();
  CHECK(probs(0, 0) == doctest::Approx(0.5));
  CHECK(probs(0, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(PredictionSet({"a"}, Matrix<double>::from_rows({{0.0, INFINITY}}),
                                PredictionKind::logits),
                  DataError);
}

TEST_CASE("declared kind must match the file") {
  std::istringstream in(R"({"id":"a1","logits":[0.0,0.0]})");
  CHECK_THROWS_AS(read_predictions(in, Format::jsonl, PredictionKind::probabilities), DataError);
}

TEST_CASE("csv predictions") {
  std::istringstream probs("id,p0,p1\na,0.25,0.75\n");
  CHECK(read_predictions(probs, Format::csv).kind() == PredictionKind::probabilities);
  std::istringstream logits("id,z0,z1\na,3,-1\n");
  CHECK(read_predictions(logits, Format::csv).kind() == PredictionKind::logits);
}

TEST_CASE("align reorders predictions into annotation order") {
  AnnotationMatrix a({"a1", "a2"}, Matrix<int>::from_rows({{1, 0}, {0, 2}}));
  PredictionSet p({"a2", "a1"}, Matrix<double>::from_rows({{0.1, 0.9}, {0.8, 0.2}}),
                  PredictionKind::probabilities);
  auto eval = align(a, p);
  CHECK(eval.predictions.ids() == a.ids());
  CHECK(eval.predictions.values()(0, 0) == doctest::Approx(0.8));
  CHECK(eval.predictions.values()(1, 1) == doctest::Approx(0.9));

  // Idempotent.
  auto again = align(eval.annotations, eval.predictions);
  CHECK(again.predictions.values() == eval.predictions.values());
}

TEST_CASE("align names the missing id") {
  AnnotationMatrix a({"a1", "a2"}, Matrix<int>::from_rows({{1, 0}, {0, 2}}));
  PredictionSet p({"a1"}, Matrix<double>::from_rows({{0.5, 0.5}}), PredictionKind::probabilities);
  CHECK(error_of([&] { align(a, p); }).find("a2") != std::string::npos);

  PredictionSet extra({"a1", "a2", "b9"},
                      Matrix<double>::from_rows({{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}),
                      PredictionKind::probabilities);
  CHECK(error_of([&] { align(a, extra); }).find("b9") != std::string::npos);
}

TEST_CASE("align rejects a class count mismatch") {
  AnnotationMatrix a({"a1"}, Matrix<int>::from_rows({{1, 0, 0, 0, 0}}));
  PredictionSet p({"a1"}, Matrix<double>::from_rows({{0.5, 0.5}}), PredictionKind::probabilities);
  CHECK_THROWS_AS(align(a, p), DataError);
}

TEST_CASE("align converts logits") {
  AnnotationMatrix a({"a1"}, Matrix<int>::from_rows({{1, 0}}));
  PredictionSet p({"a1"}, Matrix<double>::from_rows({{std::log(3.0), 0.0}}), PredictionKind::logits);
  auto eval = align(a, p);
  CHECK(eval.predictions.kind() == PredictionKind::probabilities);
  CHECK(eval.predictions.values()(0, 0) == doctest::Approx(0.75));
}

TEST_CASE("class names from a list or an index map") {
  TempFile list(R"(["author","other","everybody","nobody","info"])", ".json");
  CHECK(load_class_names(list.path()).at(1) == "other");
  TempFile map(R"({"1":"b","0":"a"})", ".json");
  CHECK(load_class_names(map.path()) == std::vector<std::string>{"a", "b"});
  TempFile gap(R"({"0":"a","2":"c"})", ".json");
  CHECK_THROWS_AS(load_class_names(gap.path()), DataError);

  AnnotationMatrix a({"a1"}, Matrix<int>::from_rows({{1, 0}}));
  CHECK_THROWS_AS(a.with_class_names({"only one"}), DataError);
}

TEST_CASE("csv line splitting") {
  CHECK(split_csv_line("a,b,,c") == std::vector<std::string>{"a", "b", "", "c"});
  CHECK(split_csv_line(R"("x,y","he said ""hi""",z)") ==
        std::vector<std::string>{"x,y", "he said \"hi\"", "z"});
  CHECK(split_csv_line("a,b\r") == std::vector<std::string>{"a", "b"});
}
