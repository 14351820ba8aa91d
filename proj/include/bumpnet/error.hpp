#pragma once

#include <stdexcept>
#include <string>

namespace bumpnet {

/// Bad input: wrong dimensions, malformed configuration, invalid geometry.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure: non-finite losses, divergence, failed factorizations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace bumpnet
