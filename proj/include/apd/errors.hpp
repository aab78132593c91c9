#pragma once

#include <stdexcept>
#include <string>

namespace apd {

/// Violated precondition or dimension mismatch in a library call.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Unknown catalog or column name; the message lists the valid choices.
class LookupError : public std::invalid_argument {
 public:
  explicit LookupError(const std::string& what) : std::invalid_argument(what) {}
};

/// Reference solver failed to reach the requested residual.
class OracleError : public std::runtime_error {
 public:
  OracleError(const std::string& what, double residual)
      : std::runtime_error(what), residual_achieved(residual) {}
  double residual_achieved;
};

/// Objective produced a non-finite value or gradient during evaluation.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, double t, double x_norm)
      : std::runtime_error(what), t(t), x_norm(x_norm) {}
  double t;
  double x_norm;
};

/// Rate estimation lacked enough usable samples.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or incomplete run configuration; `field` is the offending path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string field_path = {})
      : std::runtime_error(what), field(std::move(field_path)) {}
  std::string field;
};

}  // namespace apd
