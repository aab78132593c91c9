#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "apd/problem.hpp"

namespace apd {

enum class ScalingKind { unit, power, exponential };

/// Time-scaling multiplier delta(t) applied to the force terms of the
/// dynamics. The ratio rho(t) = t * delta'(t) / delta(t) is what the
/// admissibility conditions constrain: it equals 0 for unit scaling, the
/// exponent r for power scaling, and c*t (unbounded) for exponential scaling.
class ScalingFunction {
 public:
  static ScalingFunction unit() { return ScalingFunction(ScalingKind::unit, 0.0); }
  static ScalingFunction power(double r) {
    return ScalingFunction(ScalingKind::power, r);
  }
  static ScalingFunction exponential(double c) {
    return ScalingFunction(ScalingKind::exponential, c);
  }

  ScalingKind kind() const { return kind_; }
  double parameter() const { return param_; }

  double value(double t) const {
    switch (kind_) {
      case ScalingKind::unit: return 1.0;
      case ScalingKind::power: return std::pow(t, param_);
      case ScalingKind::exponential: return std::exp(param_ * t);
    }
    return 1.0;
  }

  double derivative(double t) const {
    switch (kind_) {
      case ScalingKind::unit: return 0.0;
      case ScalingKind::power: return param_ * std::pow(t, param_ - 1.0);
      case ScalingKind::exponential: return param_ * std::exp(param_ * t);
    }
    return 0.0;
  }

  /// rho(t) = t * delta'(t) / delta(t).
  double log_slope(double t) const {
    switch (kind_) {
      case ScalingKind::unit: return 0.0;
      case ScalingKind::power: return param_;
      case ScalingKind::exponential: return param_ * t;
    }
    return 0.0;
  }

  bool is_unit() const { return kind_ == ScalingKind::unit; }

  std::string describe() const {
    switch (kind_) {
      case ScalingKind::unit: return "unit";
      case ScalingKind::power: return "power(r=" + std::to_string(param_) + ")";
      case ScalingKind::exponential:
        return "exponential(c=" + std::to_string(param_) + ")";
    }
    return "unit";
  }

 private:
  ScalingFunction(ScalingKind kind, double param) : kind_(kind), param_(param) {}
  ScalingKind kind_;
  double param_;
};

struct DynamicsParams {
  double alpha = 3.0;  // vanishing damping coefficient alpha/t
  double theta = 0.5;  // extrapolation coefficient on the theta*t*zdot terms
  double beta = 0.0;   // augmented Lagrangian penalty
  ScalingFunction scaling = ScalingFunction::unit();

  double xi() const { return theta * alpha - theta - 1.0; }
};

/// First-order reduction of the second-order system, ordered (x, lambda,
/// x_dot, lambda_dot).
struct SystemState {
  double t = 0.0;
  Vector x;
  Vector lambda;
  Vector x_dot;
  Vector lambda_dot;

  int dim() const { return static_cast<int>(2 * (x.size() + lambda.size())); }

  bool all_finite() const {
    return x.allFinite() && lambda.allFinite() && x_dot.allFinite() &&
           lambda_dot.allFinite();
  }
};

struct StateDerivative {
  Vector x_dot;
  Vector lambda_dot;
  Vector x_ddot;
  Vector lambda_ddot;
};

inline Vector pack_state(const SystemState& s) {
  const auto n = s.x.size();
  const auto m = s.lambda.size();
  Vector y(2 * (n + m));
  y.segment(0, n) = s.x;
  y.segment(n, m) = s.lambda;
  y.segment(n + m, n) = s.x_dot;
  y.segment(2 * n + m, m) = s.lambda_dot;
  return y;
}

inline SystemState unpack_state(double t, const Vector& y, int n, int m) {
  if (y.size() != 2 * (n + m)) {
    throw ContractError("unpack_state: vector length does not match 2(n+m)");
  }
  SystemState s;
  s.t = t;
  s.x = y.segment(0, n);
  s.lambda = y.segment(n, m);
  s.x_dot = y.segment(n + m, n);
  s.lambda_dot = y.segment(2 * n + m, m);
  return s;
}

/// Right-hand side of the first-order reduction:
///   x''  = -(alpha/t) x'  - delta(t) [grad f(x) + Aᵀ(lambda + theta t lambda')
///                                     + beta Aᵀ(Ax - b)]
///   l''  = -(alpha/t) l'  + delta(t) [A(x + theta t x') - b]
/// With unit scaling this is the unscaled Nesterov primal-dual system.
inline StateDerivative rhs(const SystemState& state, const DynamicsParams& params,
                           const Problem& problem) {
  if (state.t <= 0.0) {
    throw ContractError("rhs: time must be positive, got t=" +
                        std::to_string(state.t));
  }
  detail::check_primal_dim(problem, state.x, "rhs");
  detail::check_dual_dim(problem, state.lambda, "rhs");

  const double t = state.t;
  const double delta = params.scaling.value(t);
  const Matrix& a = problem.a();

  Vector grad = problem.gradient(state.x);
  if (!grad.allFinite()) {
    throw EvaluationError("rhs: objective gradient is non-finite", t, state.x.norm());
  }

  Vector primal_residual = a * state.x - problem.b();
  Vector force = grad +
                 a.transpose() * (state.lambda + params.theta * t * state.lambda_dot) +
                 params.beta * (a.transpose() * primal_residual);

  StateDerivative d;
  d.x_dot = state.x_dot;
  d.lambda_dot = state.lambda_dot;
  d.x_ddot = -(params.alpha / t) * state.x_dot - delta * force;
  d.lambda_ddot = -(params.alpha / t) * state.lambda_dot +
                  delta * (a * (state.x + params.theta * t * state.x_dot) - problem.b());
  return d;
}

enum class ValidationMode { basic, strict, scaled_basic, scaled_strict };

inline std::string to_string(ValidationMode mode) {
  switch (mode) {
    case ValidationMode::basic: return "basic";
    case ValidationMode::strict: return "strict";
    case ValidationMode::scaled_basic: return "scaled-basic";
    case ValidationMode::scaled_strict: return "scaled-strict";
  }
  return "basic";
}

struct ValidationReport {
  bool pass = true;
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  void fail(std::string clause) {
    pass = false;
    violations.push_back(std::move(clause));
  }
};

/// Checks the parameter admissibility conditions. basic/strict cover the
/// unscaled system (strict excludes alpha = 3 and the endpoint values of
/// theta); scaled-basic/scaled-strict additionally constrain the scaling
/// ratio rho(t) = t delta'/delta on [t0, inf), evaluated analytically per
/// scaling kind. Failures are reported, never thrown.
inline ValidationReport validate_params(const DynamicsParams& params,
                                        ValidationMode mode, double t0) {
  if (t0 <= 0.0) {
    throw ContractError("validate_params: t0 must be positive");
  }
  ValidationReport report;
  const bool strict =
      mode == ValidationMode::strict || mode == ValidationMode::scaled_strict;
  const bool scaled =
      mode == ValidationMode::scaled_basic || mode == ValidationMode::scaled_strict;

  if (strict ? !(params.alpha > 3.0) : !(params.alpha >= 3.0)) {
    report.fail(strict ? "alpha must be > 3" : "alpha must be >= 3");
  }
  const double theta_lo = 1.0 / (params.alpha - 1.0);
  if (strict) {
    if (!(params.theta > theta_lo && params.theta < 0.5)) {
      report.fail("theta must lie in the open interval (1/(alpha-1), 1/2)");
    }
  } else {
    if (!(params.theta >= theta_lo && params.theta <= 0.5)) {
      report.fail("theta must lie in [1/(alpha-1), 1/2]");
    }
  }
  if (!(params.beta >= 0.0)) {
    report.fail("beta must be nonnegative");
  }

  if (!scaled) {
    if (!params.scaling.is_unit()) {
      report.fail("scaling must be unit in " + to_string(mode) + " mode");
    }
    return report;
  }

  // Scaled modes: rho(t) = t delta'/delta must be bounded below, bounded
  // above by 1/theta - 2 (strictly in scaled-strict), delta must stay above a
  // positive floor, and t^2 delta(t) must diverge.
  const double rho_cap = 1.0 / params.theta - 2.0;
  switch (params.scaling.kind()) {
    case ScalingKind::unit:
      if (strict && !(0.0 < rho_cap)) {
        report.fail("sup t*delta'/delta = 0 must be < 1/theta - 2");
      } else if (!(0.0 <= rho_cap)) {
        report.fail("sup t*delta'/delta = 0 exceeds 1/theta - 2");
      }
      break;
    case ScalingKind::power: {
      const double r = params.scaling.parameter();
      if (strict ? !(r < rho_cap) : !(r <= rho_cap)) {
        report.fail("power scaling exponent r = " + std::to_string(r) +
                    (strict ? " must be < " : " must be <= ") +
                    std::to_string(rho_cap) + " (= 1/theta - 2)");
      }
      if (r < 0.0) {
        report.fail("power scaling with r < 0 has no positive lower bound delta_0");
      }
      if (!(2.0 + r > 0.0)) {
        report.fail("t^2 delta(t) = t^(2+r) must diverge (need r > -2)");
      }
      break;
    }
    case ScalingKind::exponential: {
      const double c = params.scaling.parameter();
      if (c > 0.0) {
        report.fail("exponential scaling has unbounded t*delta'/delta = c*t");
        report.warnings.push_back(
            "exponential scaling violates the ratio bound for large t; "
            "admitted for finite-horizon exploration only");
      } else if (c < 0.0) {
        report.fail("exponential scaling with c < 0 decays below any delta_0 > 0");
      }
      break;
    }
  }
  return report;
}

/// Stationary state (t0, x*, lambda*, 0, 0). The accelerations of rhs vanish
/// there because the KKT conditions annihilate every force term.
inline SystemState equilibrium_state(const Problem& problem,
                                     const PrimalDualPoint& oracle_point,
                                     double t0) {
  KktResidual r = kkt_residual(problem, oracle_point);
  const double residual = std::max(r.feasibility, r.stationarity);
  if (residual > 1e-8) {
    throw ContractError("equilibrium_state: oracle point has KKT residual " +
                        std::to_string(residual) + " > 1e-8");
  }
  SystemState s;
  s.t = t0;
  s.x = oracle_point.x;
  s.lambda = oracle_point.lambda;
  s.x_dot = Vector::Zero(problem.dim_n());
  s.lambda_dot = Vector::Zero(problem.dim_m());
  return s;
}

}  // namespace apd
