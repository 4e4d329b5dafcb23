#pragma once

#include <stdexcept>
#include <string>

namespace dimtp {

// Thrown when an operation needs more input samples than it was given
// (e.g. velocity estimation from a single-point trajectory).
struct InsufficientDataError : std::runtime_error {
  explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an operation is invoked before its prerequisites were produced
// (e.g. label assignment before prototypes were fitted).
struct InvalidStateError : std::runtime_error {
  explicit InvalidStateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dimtp
