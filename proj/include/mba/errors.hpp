#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mba {

/// Violated precondition of an API call (shape mismatch, wrong plan head, ...).
class ContractError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid user configuration: grid too small for a stencil, bad CFL, bad case file.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unrealizable calculation plan.
class PlanError : public ConfigError {
  public:
    PlanError(const std::string& what, std::ptrdiff_t line = -1)
        : ConfigError(line >= 0 ? "plan line " + std::to_string(line + 1) + ": " + what : what),
          line_(line) {}

    /// Zero-based offending line, or -1 when the plan as a whole is invalid.
    std::ptrdiff_t line() const noexcept { return line_; }

  private:
    std::ptrdiff_t line_;
};

/// Non-finite values or breakdown inside a numerical kernel.
class NumericalError : public std::runtime_error {
  public:
    NumericalError(const std::string& what, std::ptrdiff_t position = -1)
        : std::runtime_error(position >= 0 ? what + " (at position " + std::to_string(position) + ")"
                                           : what),
          position_(position) {}

    std::ptrdiff_t position() const noexcept { return position_; }

  private:
    std::ptrdiff_t position_;
};

/// Physically inadmissible primal state (nonpositive density or pressure).
class StateError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

}  // namespace mba
