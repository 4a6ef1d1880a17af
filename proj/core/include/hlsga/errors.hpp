#pragma once

#include <stdexcept>
#include <string>

namespace hlsga {

/// Root of every error thrown by the library. Callers that only need to
/// report failures can catch this; the subclasses exist so tests and the CLI
/// can tell the failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic number, bad record length).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or truncated files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must agree do not (e.g. image and label counts).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside its mathematical domain (negative weight decay, NaN).
class DomainError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for the dense Hessian / LP path.
class ScaleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The LP solver reached a state that is impossible for a well-posed input.
class LpError : public Error {
 public:
  using Error::Error;
};

}  // namespace hlsga
