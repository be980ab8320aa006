#pragma once

#include <stdexcept>
#include <string>

namespace xmodal {

// Malformed input files, violated preconditions, inconsistent shapes.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered during training or a gradient step.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad command-line or config usage (unknown keys, unparsable values).
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace xmodal
