#include "bestscore/annotations.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "bestscore/error.hpp"
#include "bestscore/losses.hpp"

namespace bestscore {

using nlohmann::json;

namespace {

constexpr double kRowSumTolerance = 1e-6;

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

int parse_count(std::string_view text, std::size_t line) {
  text = trim(text);
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw DataError(at_line(line) + "not an integer count: '" + std::string(text) + "'");
  return value;
}

double parse_real(std::string_view text, std::size_t line) {
  text = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw DataError(at_line(line) + "not a number: '" + std::string(text) + "'");
  return value;
}

// Collects rows while enforcing consistent width and unique ids.
template <class T>
struct RowCollector {
  std::vector<std::string> ids;
  Matrix<T> values;
  std::unordered_set<std::string> seen;

  void add(std::string id, std::span<const T> row, std::size_t line) {
    if (!values.empty() && row.size() != values.cols())
      throw DataError(at_line(line) + "inconsistent number of classes: expected " +
                      std::to_string(values.cols()) + ", got " + std::to_string(row.size()));
    if (!seen.insert(id).second) throw DataError(at_line(line) + "duplicate id '" + id + "'");
    values.append_row(row);
    ids.push_back(std::move(id));
  }
};

std::string json_id(const json& obj, std::size_t line) {
  auto it = obj.find("id");
  if (it == obj.end()) throw DataError(at_line(line) + "missing field 'id'");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw DataError(at_line(line) + "field 'id' must be a string");
}

json parse_json_line(const std::string& text, std::size_t line) {
  try {
    json obj = json::parse(text);
    if (!obj.is_object()) throw DataError(at_line(line) + "expected a JSON object");
    return obj;
  } catch (const json::parse_error& e) {
    throw DataError(at_line(line) + "malformed JSON (" + e.what() + ")");
  }
}

std::string format_real(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

Format parse_format(std::string_view name) {
  if (name == "jsonl") return Format::jsonl;
  if (name == "csv") return Format::csv;
  throw UsageError("unknown format '" + std::string(name) + "' (expected jsonl or csv)");
}

Format format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? Format::csv : Format::jsonl;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

// ---------------------------------------------------------------------------
// AnnotationMatrix

AnnotationMatrix::AnnotationMatrix(std::vector<std::string> ids, Matrix<int> counts,
                                   std::vector<std::string> class_names)
    : ids_(std::move(ids)), counts_(std::move(counts)), class_names_(std::move(class_names)) {
  if (ids_.size() != counts_.rows())
    throw DataError("annotation ids and count rows differ in length");
  if (!class_names_.empty() && class_names_.size() != counts_.cols())
    throw DataError("expected " + std::to_string(counts_.cols()) + " class names, got " +
                    std::to_string(class_names_.size()));
  std::unordered_set<std::string_view> seen;
  totals_.resize(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) throw DataError("duplicate id '" + ids_[i] + "'");
    long long total = 0;
    for (int c : counts_.row(i)) {
      if (c < 0) throw DataError("example '" + ids_[i] + "': negative count");
      total += c;
    }
    if (total == 0) throw DataError("example '" + ids_[i] + "': zero-annotation row");
    totals_[i] = total;
  }
}

AnnotationMatrix AnnotationMatrix::from_counts(Matrix<int> counts) {
  std::vector<std::string> ids(counts.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  return AnnotationMatrix(std::move(ids), std::move(counts));
}

AnnotationMatrix AnnotationMatrix::with_class_names(std::vector<std::string> names) const {
  return AnnotationMatrix(ids_, counts_, std::move(names));
}

// ---------------------------------------------------------------------------
// PredictionSet

PredictionSet::PredictionSet(std::vector<std::string> ids, Matrix<double> values,
                             PredictionKind kind)
    : ids_(std::move(ids)), values_(std::move(values)), kind_(kind) {
  if (ids_.size() != values_.rows())
    throw DataError("prediction ids and value rows differ in length");
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) throw DataError("duplicate id '" + ids_[i] + "'");
    auto row = values_.row(i);
    for (double v : row)
      if (!std::isfinite(v)) throw DataError("example '" + ids_[i] + "': non-finite value");
    if (kind_ == PredictionKind::logits) continue;
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0 || v > 1.0)
        throw DataError("example '" + ids_[i] + "': probability " + format_real(v) +
                        " outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance)
      throw DataError("example '" + ids_[i] + "': probabilities sum to " + format_real(sum));
    for (double& v : row) v /= sum;
  }
}

Matrix<double> PredictionSet::probabilities() const {
  if (kind_ == PredictionKind::probabilities) return values_;
  return softmax_rows(values_);
}

PredictionSet PredictionSet::as_probabilities() const {
  if (kind_ == PredictionKind::probabilities) return *this;
  return PredictionSet(ids_, softmax_rows(values_), PredictionKind::probabilities);
}

// ---------------------------------------------------------------------------
// Alignment

AlignedEval align(const AnnotationMatrix& annotations, const PredictionSet& predictions) {
  if (annotations.num_classes() != predictions.num_classes())
    throw DataError("class count mismatch: annotations have K=" +
                    std::to_string(annotations.num_classes()) + ", predictions have K=" +
                    std::to_string(predictions.num_classes()));
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) index.emplace(predictions.ids()[i], i);

  const Matrix<double> probs = predictions.probabilities();
  Matrix<double> ordered(annotations.size(), annotations.num_classes());
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& id = annotations.ids()[i];
    auto it = index.find(id);
    if (it == index.end()) throw DataError("annotation id '" + id + "' has no prediction");
    std::ranges::copy(probs.row(it->second), ordered.row(i).begin());
  }
  if (predictions.size() != annotations.size()) {
    std::unordered_set<std::string_view> annotation_ids(annotations.ids().begin(),
                                                        annotations.ids().end());
    for (const auto& id : predictions.ids())
      if (!annotation_ids.contains(id))
        throw DataError("prediction id '" + id + "' has no annotations");
  }
  return {annotations, PredictionSet(annotations.ids(), std::move(ordered),
                                     PredictionKind::probabilities)};
}

// ---------------------------------------------------------------------------
// Readers

AnnotationLoad read_annotations(std::istream& in, Format format, bool drop_empty) {
  RowCollector<int> rows;
  std::size_t dropped = 0;
  std::string text;
  std::size_t line = 0;

  auto accept = [&](std::string id, std::vector<int> counts) {
    long long total = 0;
    for (int c : counts) {
      if (c < 0) throw DataError(at_line(line) + "negative count");
      total += c;
    }
    if (counts.empty()) throw DataError(at_line(line) + "empty count vector");
    if (!rows.values.empty() && counts.size() != rows.values.cols())
      throw DataError(at_line(line) + "inconsistent number of classes: expected " +
                      std::to_string(rows.values.cols()) + ", got " +
                      std::to_string(counts.size()));
    if (total == 0) {
      if (!drop_empty) throw DataError(at_line(line) + "zero-annotation row '" + id + "'");
      ++dropped;
      return;
    }
    rows.add(std::move(id), counts, line);
  };

  if (format == Format::jsonl) {
    while (std::getline(in, text)) {
      ++line;
      if (blank(text)) continue;
      json obj = parse_json_line(text, line);
      std::string id = json_id(obj, line);
      auto it = obj.find("counts");
      if (it == obj.end() || !it->is_array())
        throw DataError(at_line(line) + "missing array field 'counts'");
      std::vector<int> counts;
      for (const auto& v : *it) {
        if (!v.is_number_integer()) throw DataError(at_line(line) + "counts must be integers");
        counts.push_back(v.get<int>());
      }
      accept(std::move(id), std::move(counts));
    }
  } else {
    std::size_t width = 0;
    while (std::getline(in, text)) {
      ++line;
      if (blank(text)) continue;
      auto fields = split_csv_line(text);
      if (width == 0) {
        if (fields.size() < 2 || trim(fields[0]) != "id")
          throw DataError(at_line(line) + "expected header id,c0,...");
        for (std::size_t j = 1; j < fields.size(); ++j)
          if (trim(fields[j]) != "c" + std::to_string(j - 1))
            throw DataError(at_line(line) + "unexpected header column '" + fields[j] + "'");
        width = fields.size();
        continue;
      }
      if (fields.size() != width)
        throw DataError(at_line(line) + "expected " + std::to_string(width) + " fields, got " +
                        std::to_string(fields.size()));
      std::vector<int> counts;
      for (std::size_t j = 1; j < fields.size(); ++j) counts.push_back(parse_count(fields[j], line));
      accept(std::string(trim(fields[0])), std::move(counts));
    }
    if (width == 0) throw DataError("missing CSV header");
  }
  if (rows.ids.empty())
    throw DataError(dropped ? "every example has zero annotations" : "no annotated examples");
  return {AnnotationMatrix(std::move(rows.ids), std::move(rows.values)), dropped};
}

AnnotationMatrix load_annotations(const std::filesystem::path& path, Format format) {
  return load_annotations(path, format, false).matrix;
}

AnnotationLoad load_annotations(const std::filesystem::path& path, Format format,
                                bool drop_empty) {
  auto in = open_or_throw(path);
  try {
    return read_annotations(in, format, drop_empty);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PredictionSet read_predictions(std::istream& in, Format format,
                               std::optional<PredictionKind> kind) {
  RowCollector<double> rows;
  std::optional<PredictionKind> seen_kind = kind;
  std::string text;
  std::size_t line = 0;

  auto check_kind = [&](PredictionKind k) {
    if (seen_kind && *seen_kind != k)
      throw DataError(at_line(line) + (k == PredictionKind::logits
                                           ? "found logits where probabilities were expected"
                                           : "found probabilities where logits were expected"));
    seen_kind = k;
  };

  if (format == Format::jsonl) {
    while (std::getline(in, text)) {
      ++line;
      if (blank(text)) continue;
      json obj = parse_json_line(text, line);
      std::string id = json_id(obj, line);
      const bool has_probs = obj.contains("probs");
      const bool has_logits = obj.contains("logits");
      if (has_probs == has_logits)
        throw DataError(at_line(line) + "need exactly one of 'probs' or 'logits'");
      check_kind(has_probs ? PredictionKind::probabilities : PredictionKind::logits);
      const json& arr = has_probs ? obj["probs"] : obj["logits"];
      if (!arr.is_array()) throw DataError(at_line(line) + "prediction values must be an array");
      std::vector<double> values;
      for (const auto& v : arr) {
        if (!v.is_number()) throw DataError(at_line(line) + "non-numeric prediction value");
        values.push_back(v.get<double>());
      }
      if (values.empty()) throw DataError(at_line(line) + "empty prediction vector");
      rows.add(std::move(id), values, line);
    }
  } else {
    std::size_t width = 0;
    while (std::getline(in, text)) {
      ++line;
      if (blank(text)) continue;
      auto fields = split_csv_line(text);
      if (width == 0) {
        if (fields.size() < 2 || trim(fields[0]) != "id")
          throw DataError(at_line(line) + "expected header id,p0,...");
        const std::string_view first = trim(fields[1]);
        const char prefix = first.empty() ? '?' : first[0];
        if (prefix != 'p' && prefix != 'z')
          throw DataError(at_line(line) + "unexpected header column '" + fields[1] + "'");
        for (std::size_t j = 1; j < fields.size(); ++j)
          if (trim(fields[j]) != std::string(1, prefix) + std::to_string(j - 1))
            throw DataError(at_line(line) + "unexpected header column '" + fields[j] + "'");
        if (prefix == 'z') check_kind(PredictionKind::logits);
        width = fields.size();
        continue;
      }
      if (fields.size() != width)
        throw DataError(at_line(line) + "expected " + std::to_string(width) + " fields, got " +
                        std::to_string(fields.size()));
      std::vector<double> values;
      for (std::size_t j = 1; j < fields.size(); ++j) values.push_back(parse_real(fields[j], line));
      rows.add(std::string(trim(fields[0])), values, line);
    }
    if (width == 0) throw DataError("missing CSV header");
  }
  return PredictionSet(std::move(rows.ids), std::move(rows.values),
                       seen_kind.value_or(PredictionKind::probabilities));
}

PredictionSet load_predictions(const std::filesystem::path& path, Format format,
                               std::optional<PredictionKind> kind) {
  auto in = open_or_throw(path);
  try {
    return read_predictions(in, format, kind);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Writers

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

void write_annotations(std::ostream& out, const AnnotationMatrix& annotations, Format format) {
  const std::size_t k = annotations.num_classes();
  if (format == Format::csv) {
    out << "id";
    for (std::size_t j = 0; j < k; ++j) out << ",c" << j;
    out << '\n';
  }
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    auto row = annotations.row(i);
    if (format == Format::jsonl) {
      json obj = {{"id", annotations.ids()[i]},
                  {"counts", std::vector<int>(row.begin(), row.end())}};
      out << obj.dump() << '\n';
    } else {
      out << csv_field(annotations.ids()[i]);
      for (int c : row) out << ',' << c;
      out << '\n';
    }
  }
}

void write_predictions(std::ostream& out, const PredictionSet& predictions, Format format) {
  const bool logits = predictions.kind() == PredictionKind::logits;
  const std::size_t k = predictions.num_classes();
  if (format == Format::csv) {
    out << "id";
    for (std::size_t j = 0; j < k; ++j) out << ',' << (logits ? 'z' : 'p') << j;
    out << '\n';
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto row = predictions.values().row(i);
    if (format == Format::jsonl) {
      json obj = {{"id", predictions.ids()[i]},
                  {logits ? "logits" : "probs", std::vector<double>(row.begin(), row.end())}};
      out << obj.dump() << '\n';
    } else {
      out << csv_field(predictions.ids()[i]);
      for (double v : row) out << ',' << format_real(v);
      out << '\n';
    }
  }
}

std::vector<std::string> load_class_names(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  std::vector<std::string> names;
  if (doc.is_array()) {
    for (const auto& v : doc) {
      if (!v.is_string()) throw DataError(path.string() + ": class names must be strings");
      names.push_back(v.get<std::string>());
    }
    return names;
  }
  if (!doc.is_object()) throw DataError(path.string() + ": expected an array or object");
  names.resize(doc.size());
  for (const auto& [key, value] : doc.items()) {
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec != std::errc{} || ptr != key.data() + key.size() || index >= names.size())
      throw DataError(path.string() + ": class index '" + key + "' is not in [0, K)");
    if (!value.is_string()) throw DataError(path.string() + ": class names must be strings");
    names[index] = value.get<std::string>();
  }
  return names;
}

}  // namespace bestscore
