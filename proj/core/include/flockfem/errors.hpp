#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace flockfem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input (mesh sizes, configuration values, file contents).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A linear solve hit a (numerically) singular pivot or missed its residual
/// tolerance.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// The time step exceeds the configured CFL ratio in strict mode.
class CflViolation : public Error {
 public:
  CflViolation(const std::string& what, double k, double h)
      : Error(what), k_(k), h_(h) {}
  double k() const noexcept { return k_; }
  double h() const noexcept { return h_; }

 private:
  double k_;
  double h_;
};

/// rho convolved with the kernel dropped below the configured floor, so the
/// Favre average is no longer well defined.
class FloorViolation : public Error {
 public:
  FloorViolation(const std::string& what, double min_value, double location)
      : Error(what), min_value_(min_value), location_(location) {}
  double min_value() const noexcept { return min_value_; }
  double location() const noexcept { return location_; }

 private:
  double min_value_;
  double location_;
};

/// A runtime monitor tripped (rho_phi below floor or |du/dx| above cap).
class BlowUpSuspected : public Error {
 public:
  BlowUpSuspected(const std::string& what, std::string quantity, double value,
                  double location)
      : Error(what), quantity_(std::move(quantity)), value_(value),
        location_(location) {}
  const std::string& quantity() const noexcept { return quantity_; }
  double value() const noexcept { return value_; }
  double location() const noexcept { return location_; }

 private:
  std::string quantity_;
  double value_;
  double location_;
};

/// A decay-rate fit was asked for on fewer than three samples or on a series
/// that reaches zero.
class DegenerateSeries : public Error {
 public:
  using Error::Error;
};

}  // namespace flockfem
