#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kam {

// Base of all library errors.  `kind()` is a stable machine-readable tag used
// by the CLI when emitting structured error reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Mismatched dimensions or indices outside the declared cutoffs.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error("dimension_mismatch", message) {}
};

// A constructor-time invariant does not hold (asymmetric Hessian, low-degree
// terms in a cubic remainder, oversized normalized perturbation, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error("validation", message) {}
};

// An exact resonance omega.k = 0 was found while certifying a frequency.
class ResonantFrequencyError : public Error {
 public:
  ResonantFrequencyError(const std::string& message, std::vector<int> k)
      : Error("resonant_frequency", message), k_(std::move(k)) {}
  const std::vector<int>& resonant_mode() const noexcept { return k_; }

 private:
  std::vector<int> k_;
};

// A divisor omega.k fell below the configured floor while solving the
// linearized conjugacy equation.
class SmallDivisorError : public Error {
 public:
  SmallDivisorError(const std::string& message, std::vector<int> k)
      : Error("small_divisor", message), k_(std::move(k)) {}
  const std::vector<int>& offending_mode() const noexcept { return k_; }

 private:
  std::vector<int> k_;
};

// A right-hand side that must average to zero does not.
class ZeroMeanError : public Error {
 public:
  explicit ZeroMeanError(const std::string& message)
      : Error("zero_mean_violation", message) {}
};

// Singular or out-of-radius twist (frequency-map Hessian) data.
class TwistError : public Error {
 public:
  explicit TwistError(const std::string& message) : Error("twist", message) {}
};

// A Neumann series or fixed-point iteration failed to contract.
class ContractionError : public Error {
 public:
  explicit ContractionError(const std::string& message)
      : Error("contraction", message) {}
};

// A weighted coefficient norm is not finite-representable.
class MajorantOverflowError : public Error {
 public:
  explicit MajorantOverflowError(const std::string& message)
      : Error("majorant_overflow", message) {}
};

// Malformed run configuration or series file.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

// A numerical trajectory left the analyticity domain or became non-finite.
class IntegratorError : public Error {
 public:
  explicit IntegratorError(const std::string& message)
      : Error("integrator_blowup", message) {}
};

}  // namespace kam
