#pragma once

#include <stdexcept>
#include <string>

namespace tta {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on arguments was violated (empty input, bad count, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A domain invariant does not hold (non-orthogonal rotation, trace != 1, ...).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed file or wire content.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A sequence has zero variance where a correlation was requested.
class DegenerateSequence : public Error {
 public:
  using Error::Error;
};

/// A target von Mises path is identically zero, so relative errors are undefined.
class ZeroTargetMax : public Error {
 public:
  using Error::Error;
};

/// Every step was excluded by the division guard.
class AllStepsExcluded : public Error {
 public:
  using Error::Error;
};

class NonConvergence : public Error {
 public:
  using Error::Error;
};

class ExternalModelError : public Error {
 public:
  enum class Kind { spawn, io, timeout, malformed, id_mismatch, length, non_finite, process_exit };

  ExternalModelError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace tta
