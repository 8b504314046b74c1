#pragma once

#include <stdexcept>
#include <string>

namespace phi4q {

/// Bad input: parameters out of range, malformed configs, shape mismatches.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation that was well-posed but failed numerically.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Root search found no sign change on its bracket.
class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An operator expected to commute with the mode parities does not.
class SymmetryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}
}  // namespace detail

}  // namespace phi4q
