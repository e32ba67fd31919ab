// Copyright 2026 The mimicenh Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MIMICENH_COMMON_H_
#define MIMICENH_COMMON_H_

#include <stdexcept>
#include <string>

namespace mimicenh {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError / ValidationError -> 2, DataError -> 3, NumericError -> 4.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mimicenh

#endif  // MIMICENH_COMMON_H_
