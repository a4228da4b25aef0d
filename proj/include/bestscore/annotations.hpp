#pragma once

// Annotation count matrices, model predictions, and their alignment.
//
// Annotations are per-example class tallies (how many annotators chose each
// class). Predictions are per-example probability vectors or logits. Both
// load from JSONL (canonical) or CSV with a fixed header:
//
//   annotations JSONL  {"id":"a1","counts":[0,7,0,0,0]}
//   predictions JSONL  {"id":"a1","probs":[...]}  or  {"id":"a1","logits":[...]}
//   annotations CSV    id,c0,...,c{K-1}
//   predictions CSV    id,p0,...,p{K-1}   (z0,... is accepted for logits)

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bestscore/matrix.hpp"

namespace bestscore {

enum class Format { jsonl, csv };

Format parse_format(std::string_view name);
// ".csv" maps to csv, anything else to jsonl.
Format format_for_path(const std::filesystem::path& path);

class AnnotationMatrix {
 public:
  AnnotationMatrix() = default;
  // Validates every invariant; throws DataError naming the offending row.
  AnnotationMatrix(std::vector<std::string> ids, Matrix<int> counts,
                   std::vector<std::string> class_names = {});

  // Convenience for generated data: ids are "0", "1", ...
  static AnnotationMatrix from_counts(Matrix<int> counts);

  std::size_t size() const { return ids_.size(); }
  std::size_t num_classes() const { return counts_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix<int>& counts() const { return counts_; }
  const std::vector<long long>& totals() const { return totals_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  std::span<const int> row(std::size_t i) const { return counts_.row(i); }

  AnnotationMatrix with_class_names(std::vector<std::string> names) const;

 private:
  std::vector<std::string> ids_;
  Matrix<int> counts_;
  std::vector<long long> totals_;
  std::vector<std::string> class_names_;
};

enum class PredictionKind { probabilities, logits };

class PredictionSet {
 public:
  PredictionSet() = default;
  // Probability rows must lie in [0,1] and sum to 1 within 1e-6; accepted rows
  // are renormalized exactly. Logit rows must be finite.
  PredictionSet(std::vector<std::string> ids, Matrix<double> values, PredictionKind kind);

  std::size_t size() const { return ids_.size(); }
  std::size_t num_classes() const { return values_.cols(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Matrix<double>& values() const { return values_; }
  PredictionKind kind() const { return kind_; }

  // Row-wise softmax for logits; the stored values for probabilities.
  Matrix<double> probabilities() const;
  PredictionSet as_probabilities() const;

 private:
  std::vector<std::string> ids_;
  Matrix<double> values_;
  PredictionKind kind_ = PredictionKind::probabilities;
};

struct AlignedEval {
  AnnotationMatrix annotations;
  PredictionSet predictions;  // probabilities, rows in annotation id order
};

// Reorders predictions into the annotations' id order and converts logits to
// probabilities. Throws DataError naming any id missing from either side.
AlignedEval align(const AnnotationMatrix& annotations, const PredictionSet& predictions);

struct AnnotationLoad {
  AnnotationMatrix matrix;
  std::size_t dropped_empty = 0;
};

// Zero-annotation rows are an error unless drop_empty is set, in which case
// they are skipped and counted.
AnnotationLoad read_annotations(std::istream& in, Format format, bool drop_empty = false);
AnnotationMatrix load_annotations(const std::filesystem::path& path, Format format);
AnnotationLoad load_annotations(const std::filesystem::path& path, Format format,
                                bool drop_empty);

PredictionSet read_predictions(std::istream& in, Format format,
                               std::optional<PredictionKind> kind = std::nullopt);
PredictionSet load_predictions(const std::filesystem::path& path, Format format,
                               std::optional<PredictionKind> kind = std::nullopt);

void write_annotations(std::ostream& out, const AnnotationMatrix& annotations, Format format);
void write_predictions(std::ostream& out, const PredictionSet& predictions, Format format);

// classes.json: either ["author", "other", ...] or {"0": "author", ...}.
std::vector<std::string> load_class_names(const std::filesystem::path& path);

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace bestscore
