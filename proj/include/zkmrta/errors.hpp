#pragma once

#include <stdexcept>
#include <string>

namespace zkmrta {

// Invalid dimensions, rates or names in a configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed input to an analysis routine (empty matrix, bad fraction).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Normal matrix of a ridge problem is not positive definite.
struct SingularError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A policy broke the engine contract, e.g. acted outside its menu.
struct ProtocolViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace zkmrta
