#pragma once

#include <stdexcept>
#include <string>

namespace pdsplit {

// Shape or dimension mismatch between operands.
struct ShapeError : std::invalid_argument {
  explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid scalar parameter (negative weight, bad bounds, zero step size, ...).
struct ParamError : std::invalid_argument {
  explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A requested operation is not available for the given problem structure
// (e.g. closed-form dual prox on a composite without one).
struct CapabilityError : std::logic_error {
  explicit CapabilityError(const std::string& msg) : std::logic_error(msg) {}
};

// Malformed or inconsistent run configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterates left the finite range.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Ill-posed numeric request (zero reference norm in a ratio metric, ...).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pdsplit
