#pragma once

#include <stdexcept>
#include <string>

namespace msyn {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated (layer mismatch, bad index,
/// reading an unexplored transition where one is required, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared while integrating an ODE.
class IntegrationDivergence : public Error {
 public:
  using Error::Error;
};

/// Malformed controller / transition-table file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid problem configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The layer switching protocol exceeded its recursion cap.
class NonTermination : public Error {
 public:
  using Error::Error;
};

}  // namespace msyn
