#pragma once

#include <stdexcept>
#include <string>

namespace shiftcp {

// Invalid arguments, malformed files, or violated preconditions. CLI exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: divergence, degenerate weights, zero density,
// bandwidth selection with no finite candidate. CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem or serialization failure. CLI exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shiftcp
