#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "apd/dynamics.hpp"
#include "apd/integrator.hpp"
#include "apd/problem.hpp"

namespace apd {

/// One sample of every tracked quantity along a trajectory. The acc_* fields
/// are running trapezoid integrals over the sample schedule of t*D_f,
/// t*||zdot||^2 and t*lag_gap respectively.
struct DiagnosticRow {
  double t = 0.0;
  double f_gap = 0.0;       // f(x(t)) - f(x*)
  double feas = 0.0;        // ||Ax(t) - b||
  double vel = 0.0;         // ||(xdot, lambdadot)||
  double energy = 0.0;      // Lyapunov energy (scaled form when delta != 1)
  double lag_gap = 0.0;     // L_beta(x, lambda*) - L_beta(x*, lambda)
  double bregman = 0.0;     // D_f(x*, x(t))
  double grad_resid = 0.0;  // ||grad f(x(t)) - grad f(x*)||
  double dual_resid = 0.0;  // ||Aᵀ(lambda(t) - lambda*)||
  double stat_resid = 0.0;  // ||grad f(x(t)) + Aᵀlambda(t)||
  double acc_tDf = 0.0;
  double acc_tv2 = 0.0;
  double acc_tgap = 0.0;
};

inline const std::vector<std::string>& diagnostic_columns() {
  static const std::vector<std::string> cols = {
      "t",          "f_gap",      "feas",       "vel",     "energy",
      "lag_gap",    "bregman",    "grad_resid", "dual_resid", "stat_resid",
      "acc_tDf",    "acc_tv2",    "acc_tgap"};
  return cols;
}

inline double column_value(const DiagnosticRow& row, const std::string& name) {
  if (name == "t") return row.t;
  if (name == "f_gap") return row.f_gap;
  if (name == "feas") return row.feas;
  if (name == "vel") return row.vel;
  if (name == "energy") return row.energy;
  if (name == "lag_gap") return row.lag_gap;
  if (name == "bregman") return row.bregman;
  if (name == "grad_resid") return row.grad_resid;
  if (name == "dual_resid") return row.dual_resid;
  if (name == "stat_resid") return row.stat_resid;
  if (name == "acc_tDf") return row.acc_tDf;
  if (name == "acc_tv2") return row.acc_tv2;
  if (name == "acc_tgap") return row.acc_tgap;
  std::string valid;
  for (const auto& c : diagnostic_columns()) valid += (valid.empty() ? "" : ", ") + c;
  throw LookupError("column_value: unknown column \"" + name +
                    "\"; valid columns: " + valid);
}

/// Lyapunov energy
///   theta^2 t^2 delta(t) [L_beta(x, lambda*) - L_beta(x*, lambda)]
///   + 1/2 ||z - z* + theta t zdot||^2 + (xi/2) ||z - z*||^2
/// with xi = theta*alpha - theta - 1. Nonincreasing along trajectories under
/// admissible parameters.
inline double energy(const SystemState& state, const DynamicsParams& params,
                     const PrimalDualPoint& z_star, const Problem& problem) {
  KktResidual res = kkt_residual(problem, z_star);
  if (std::max(res.feasibility, res.stationarity) > 1e-8) {
    throw ContractError("energy: z_star has KKT residual above 1e-8");
  }
  const double t = state.t;
  const double delta = params.scaling.value(t);
  const double gap =
      augmented_lagrangian(problem, state.x, z_star.lambda, params.beta) -
      augmented_lagrangian(problem, z_star.x, state.lambda, params.beta);

  Vector dz_x = state.x - z_star.x;
  Vector dz_l = state.lambda - z_star.lambda;
  Vector v_x = dz_x + params.theta * t * state.x_dot;
  Vector v_l = dz_l + params.theta * t * state.lambda_dot;

  const double v2 = v_x.squaredNorm() + v_l.squaredNorm();
  const double dist2 = dz_x.squaredNorm() + dz_l.squaredNorm();
  return params.theta * params.theta * t * t * delta * gap + 0.5 * v2 +
         0.5 * params.xi() * dist2;
}

/// One DiagnosticRow per logged sample. Partial logs (blow-up, step limit)
/// are rejected unless allow_partial is set.
inline std::vector<DiagnosticRow> diagnostics_series(const TrajectoryLog& log,
                                                     const Problem& problem,
                                                     const DynamicsParams& params,
                                                     const PrimalDualPoint& z_star,
                                                     bool allow_partial = false) {
  if (log.termination != Termination::completed && !allow_partial) {
    throw ContractError("diagnostics_series: log terminated with " +
                        to_string(log.termination) +
                        "; pass allow_partial to analyze anyway");
  }
  const double f_star = problem.value(z_star.x);
  const Vector grad_star = problem.gradient(z_star.x);
  const Matrix at = problem.a().transpose();

  std::vector<DiagnosticRow> rows;
  rows.reserve(log.samples.size());
  double prev_t = 0.0, prev_df = 0.0, prev_v2 = 0.0, prev_gap = 0.0;
  double acc_df = 0.0, acc_v2 = 0.0, acc_gap = 0.0;

  for (const SystemState& s : log.samples) {
    DiagnosticRow row;
    row.t = s.t;
    row.f_gap = problem.value(s.x) - f_star;
    row.feas = (problem.a() * s.x - problem.b()).norm();
    row.vel = std::sqrt(s.x_dot.squaredNorm() + s.lambda_dot.squaredNorm());
    row.energy = energy(s, params, z_star, problem);
    row.lag_gap = augmented_lagrangian(problem, s.x, z_star.lambda, params.beta) -
                  augmented_lagrangian(problem, z_star.x, s.lambda, params.beta);
    row.bregman = bregman_distance(problem, z_star.x, s.x);
    Vector grad = problem.gradient(s.x);
    row.grad_resid = (grad - grad_star).norm();
    row.dual_resid = (at * (s.lambda - z_star.lambda)).norm();
    row.stat_resid = (grad + at * s.lambda).norm();

    const double integrand_df = s.t * row.bregman;
    const double integrand_v2 = s.t * row.vel * row.vel;
    const double integrand_gap = s.t * row.lag_gap;
    if (!rows.empty()) {
      const double half_dt = 0.5 * (s.t - prev_t);
      acc_df += half_dt * (prev_df + integrand_df);
      acc_v2 += half_dt * (prev_v2 + integrand_v2);
      acc_gap += half_dt * (prev_gap + integrand_gap);
    }
    row.acc_tDf = acc_df;
    row.acc_tv2 = acc_v2;
    row.acc_tgap = acc_gap;
    prev_t = s.t;
    prev_df = integrand_df;
    prev_v2 = integrand_v2;
    prev_gap = integrand_gap;
    rows.push_back(row);
  }
  return rows;
}

/// Fitted log-log decay exponent plus the tail-supremum statistics backing
/// the o-rate decision.
struct RateEstimate {
  std::string quantity;
  double slope = 0.0;
  double slope_ci = 0.0;  // OLS half-width at ~95%
  std::vector<double> tail_sups;
  bool o_rate_pass = false;
  int clamped_count = 0;  // samples below 1e-14 excluded from the fit
};

/// Ordinary least-squares slope of log |q| against log t over [t_min, t_max].
/// Values below 1e-14 are clamped out of the fit; their count is reported.
inline RateEstimate estimate_rate(const std::vector<DiagnosticRow>& series,
                                  const std::string& quantity, double t_min,
                                  double t_max) {
  constexpr double kClamp = 1e-14;
  std::vector<double> xs, ys;
  int clamped = 0;
  for (const DiagnosticRow& row : series) {
    if (row.t < t_min || row.t > t_max) continue;
    const double q = std::abs(column_value(row, quantity));
    if (q <= kClamp) {
      ++clamped;
      continue;
    }
    xs.push_back(std::log(row.t));
    ys.push_back(std::log(q));
  }
  const int count = static_cast<int>(xs.size());
  if (count < 10) {
    throw EstimationError("estimate_rate(" + quantity + "): only " +
                          std::to_string(count) +
                          " positive samples in window, need >= 10");
  }
  double mean_x = 0.0, mean_y = 0.0;
  for (int i = 0; i < count; ++i) {
    mean_x += xs[i];
    mean_y += ys[i];
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < count; ++i) {
    sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
    sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
  }
  const double slope = sxy / sxx;
  const double intercept = mean_y - slope * mean_x;
  double ss_res = 0.0;
  for (int i = 0; i < count; ++i) {
    const double r = ys[i] - (intercept + slope * xs[i]);
    ss_res += r * r;
  }
  const double se = (count > 2) ? std::sqrt(ss_res / (count - 2) / sxx) : 0.0;

  RateEstimate est;
  est.quantity = quantity;
  est.slope = slope;
  est.slope_ci = 1.96 * se;
  est.clamped_count = clamped;
  return est;
}

/// Empirical o-rate test: split the tail into `windows` consecutive dyadic
/// intervals ending at the last sample time, compute s_k = sup over window k
/// of t^power * |q(t)|, and pass iff the final supremum fell to at most
/// decay_factor times the largest one and did not increase over the last two
/// windows. A quantity that is exactly O(t^-power) but not o(t^-power) keeps
/// s_k constant and fails.
inline RateEstimate check_o_rate(const std::vector<DiagnosticRow>& series,
                                 const std::string& quantity, double power,
                                 int windows = 4, double decay_factor = 0.5) {
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw ContractError("check_o_rate: decay_factor must lie in (0, 1)");
  }
  if (windows < 2) {
    throw ContractError("check_o_rate: need at least 2 windows");
  }
  if (series.empty()) {
    throw EstimationError("check_o_rate: empty series");
  }
  const double t_end = series.back().t;
  const double t_first = series.front().t;
  if (!(t_first <= t_end / std::pow(2.0, windows))) {
    throw EstimationError("check_o_rate(" + quantity + "): series starting at t=" +
                          std::to_string(t_first) + " does not span " +
                          std::to_string(windows) +
                          " dyadic windows ending at t=" + std::to_string(t_end));
  }

  RateEstimate est;
  est.quantity = quantity;
  est.tail_sups.assign(windows, 0.0);
  for (const DiagnosticRow& row : series) {
    if (row.t < t_end / std::pow(2.0, windows)) continue;
    // window k (0-based, oldest first): (t_end/2^(windows-k), t_end/2^(windows-k-1)]
    int k = windows - 1;
    for (int j = 0; j < windows; ++j) {
      if (row.t <= t_end / std::pow(2.0, windows - 1 - j)) {
        k = j;
        break;
      }
    }
    const double weighted = std::pow(row.t, power) * std::abs(column_value(row, quantity));
    est.tail_sups[k] = std::max(est.tail_sups[k], weighted);
  }
  const double s_max = *std::max_element(est.tail_sups.begin(), est.tail_sups.end());
  const double s_last = est.tail_sups.back();
  const double s_prev = est.tail_sups[windows - 2];
  est.o_rate_pass = (s_last <= decay_factor * s_max) && (s_last <= s_prev);
  return est;
}

struct ConvergenceReport {
  bool pass = false;
  std::string reason;
  PrimalDualPoint limit;  // z(T), the unique-cluster-point candidate
};

namespace detail {

inline const SystemState& sample_nearest(const TrajectoryLog& log, double t) {
  const SystemState* best = &log.samples.front();
  double best_dist = std::abs(std::log(best->t / t));
  for (const SystemState& s : log.samples) {
    const double d = std::abs(std::log(s.t / t));
    if (d < best_dist) {
      best_dist = d;
      best = &s;
    }
  }
  return *best;
}

inline double state_distance(const SystemState& a, const SystemState& b) {
  return std::sqrt((a.x - b.x).squaredNorm() + (a.lambda - b.lambda).squaredNorm());
}

}  // namespace detail

/// Empirical check that the trajectory settled to a primal-dual solution:
/// final-state KKT residuals below tol_kkt, and the tail displacements
/// ||z(T) - z(T/2)||, ||z(T/2) - z(T/4)|| both small and nonincreasing
/// (sample times nearest to T/2 and T/4 on the log schedule are used).
/// Returns z(T) as the limit candidate.
inline ConvergenceReport trajectory_convergence_check(const TrajectoryLog& log,
                                                      const Problem& problem,
                                                      double tol_kkt,
                                                      double tol_cauchy) {
  ConvergenceReport report;
  if (log.termination != Termination::completed) {
    report.pass = false;
    report.reason = "trajectory terminated with " + to_string(log.termination) +
                    " at t=" + std::to_string(log.termination_time);
    if (!log.samples.empty()) {
      report.limit = PrimalDualPoint{log.samples.back().x, log.samples.back().lambda};
    }
    return report;
  }
  const SystemState& z_end = log.samples.back();
  const double t_end = z_end.t;
  const SystemState& z_half = detail::sample_nearest(log, t_end / 2.0);
  const SystemState& z_quarter = detail::sample_nearest(log, t_end / 4.0);

  report.limit = PrimalDualPoint{z_end.x, z_end.lambda};
  KktResidual kkt = kkt_residual(problem, report.limit);
  const double d_recent = detail::state_distance(z_end, z_half);
  const double d_earlier = detail::state_distance(z_half, z_quarter);

  std::string reason;
  bool pass = true;
  if (kkt.feasibility > tol_kkt || kkt.stationarity > tol_kkt) {
    pass = false;
    reason += "KKT residual (" + std::to_string(kkt.feasibility) + ", " +
              std::to_string(kkt.stationarity) + ") above " +
              std::to_string(tol_kkt) + "; ";
  }
  if (d_recent > tol_cauchy) {
    pass = false;
    reason += "tail displacement " + std::to_string(d_recent) + " above " +
              std::to_string(tol_cauchy) + "; ";
  }
  if (d_earlier < d_recent) {
    pass = false;
    reason += "tail displacement increased (" + std::to_string(d_earlier) +
              " -> " + std::to_string(d_recent) + "); ";
  }
  report.pass = pass;
  report.reason = pass ? "converged" : reason;
  return report;
}

}  // namespace apd
