#pragma once

#include <stdexcept>
#include <string>

namespace ebench {

// Base for every error the toolkit raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed files, out-of-range values, precondition
// violations on user-supplied data. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A named entity (study, session, triplet) does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A request that is well-formed but conflicts with current state, e.g. a
// rating submitted out of order or against a completed session.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Checkpoint or config mismatch on load.
class CheckpointError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failure inside a pluggable backend (embedding, distance, flow, decoder).
class BackendError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] void throw_validation(const std::string& what);

}  // namespace ebench
