#pragma once

#include <stdexcept>
#include <string>

namespace oed {

/// Non-finite value produced by a numerical update.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a model function.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Markov chain approximation probability bound violated.
struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed configuration, with the offending line (0 when not tied to a line).
struct ConfigError : std::runtime_error {
  ConfigError(const std::string& msg, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line(line) {}
  int line;
};

/// Corrupt or mismatched file content.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace oed
