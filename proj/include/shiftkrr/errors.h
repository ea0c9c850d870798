#pragma once

#include <stdexcept>
#include <string>

namespace shiftkrr {

/// Precondition violated by caller-supplied data or parameters.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine failed where the math says it cannot (e.g. Cholesky of
/// K + n*lambda*I). Signals an internal error, never repaired silently.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A truncated eigenvalue spectrum is too short to answer the query.
class TruncationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require(bool condition, const std::string &message) {
  if (!condition) {
    throw InvalidArgument(message);
  }
}

}  // namespace shiftkrr
