#pragma once

#include <stdexcept>
#include <string>

namespace hippoasym {

/// Base exception for every recoverable failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input violates an operation's precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (singular system, no convergence, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hippoasym
