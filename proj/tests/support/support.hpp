#pragma once

// Shared helpers for the test binaries.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "bestscore/annotations.hpp"
#include "bestscore/matrix.hpp"
#include "bestscore/random.hpp"

namespace testing {

// A file in the temp directory that is removed when it goes out of scope.
class TempFile {
 public:
  explicit TempFile(const std::string& contents, const std::string& suffix = ".jsonl") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bestscore_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++) + suffix);
    std::ofstream(path_, std::ios::binary) << contents;
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Central differences of f at x, one coordinate at a time.
inline std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                             std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + h;
    const double up = f(x);
    x[k] = saved - h;
    const double down = f(x);
    x[k] = saved;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// max |a - b| / max(max |a|, max |b|), 0 when both are 0.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

// Random annotation matrix with per-row totals in [n_lo, n_hi].
inline bestscore::AnnotationMatrix random_annotations(bestscore::Rng& rng, std::size_t rows,
                                                      std::size_t k, int n_lo, int n_hi) {
  bestscore::Matrix<int> counts(rows, k, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    const int n = n_lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_hi - n_lo + 1)));
    for (int a = 0; a < n; ++a) counts(i, rng.below(k)) += 1;
  }
  return bestscore::AnnotationMatrix::from_counts(std::move(counts));
}

}  // namespace testing
