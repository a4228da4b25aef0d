#pragma once

#include <stdexcept>
#include <string>

namespace bestscore {

// Bad input data: malformed files, shape mismatches, invalid parameters.
// The CLI maps this to exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line. The CLI maps this to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bestscore
