#pragma once

#include <stdexcept>
#include <string>

namespace vilab {

/// Bad user input: malformed config, dimension mismatch, invalid CLI flags.
/// Maps to exit code 1 at the CLI boundary.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A computation produced a non-finite value or hit a domain violation
/// (log of a non-positive number, exploding loss). Maps to exit code 2.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vilab
