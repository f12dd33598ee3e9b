#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace spfit {

/// Base class of all library errors. `code()` is a stable machine-readable
/// tag used by the CLI when emitting error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct InvalidHyperparameterError : Error {
  explicit InvalidHyperparameterError(const std::string& m) : Error("invalid_hyperparameter", m) {}
};

struct EmptyInputError : Error {
  explicit EmptyInputError(const std::string& m) : Error("empty_input", m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error("data_error", m) {}
};

struct InsufficientReplicationError : Error {
  explicit InsufficientReplicationError(const std::string& m)
      : Error("insufficient_replication", m) {}
};

struct IllConditionedError : Error {
  explicit IllConditionedError(const std::string& m) : Error("ill_conditioned", m) {}
};

struct InvalidDofError : Error {
  explicit InvalidDofError(const std::string& m) : Error("invalid_dof", m) {}
};

struct OptimizationFailureError : Error {
  explicit OptimizationFailureError(const std::string& m) : Error("optimization_failure", m) {}
};

struct RejectionExhaustedError : Error {
  explicit RejectionExhaustedError(const std::string& m) : Error("rejection_exhausted", m) {}
};

struct DegenerateTruncationError : Error {
  explicit DegenerateTruncationError(const std::string& m)
      : Error("degenerate_truncation", m) {}
};

struct BlowUpError : Error {
  explicit BlowUpError(const std::string& m) : Error("ode_blow_up", m) {}
};

struct SingularityError : Error {
  explicit SingularityError(const std::string& m) : Error("ode_singularity", m) {}
};

struct ExtrapolationError : Error {
  explicit ExtrapolationError(const std::string& m) : Error("extrapolation", m) {}
};

struct EnsembleQualityError : Error {
  explicit EnsembleQualityError(const std::string& m) : Error("ensemble_quality", m) {}
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error("schema_mismatch", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};

struct InvalidArgumentError : Error {
  explicit InvalidArgumentError(const std::string& m) : Error("invalid_argument", m) {}
};

}  // namespace spfit
