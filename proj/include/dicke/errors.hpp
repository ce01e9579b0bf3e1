#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dicke {

// Argument outside an operation's domain (N <= 0, non-hermitian input, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// State whose norm drifted outside the configured tolerance.
class StaleState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedOrder : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Microscopic parameters violating the Raman matching conditions.
class InvalidConfiguration : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Negative effective cavity frequency.
class Instability : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class OutOfRegime : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Mean spin too short to define a direction.
class UndefinedDirection : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NoValidSample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Base for failures of the time integrators.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NormDriftDiagnostics {
  double time = 0.0;
  std::size_t step = 0;
  double norm = 0.0;
  double tolerance = 0.0;
};

class NormDrift : public NumericalFailure {
 public:
  explicit NormDrift(const NormDriftDiagnostics& d);
  const NormDriftDiagnostics& diagnostics() const noexcept { return diag_; }

 private:
  NormDriftDiagnostics diag_;
};

class StepOverflow : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

}  // namespace dicke
