#pragma once

#include <stdexcept>
#include <string>

namespace dmmvh {

// Dimension or length mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid hyper-parameter or option combination.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Out-of-domain argument that is not a shape problem (empty batch, |phi| > K).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation on an object that is not ready for it (e.g. searching an empty index).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A NaN or Inf was produced or read.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset, checkpoint or CSV could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dmmvh
