#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "apd/dynamics.hpp"
#include "apd/problem.hpp"

namespace apd {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double initial_step = 0.0;  // 0 selects the step automatically
  double max_step = 0.0;      // 0 means unbounded
  long max_steps = 5000000;   // accepted + rejected
  std::vector<double> sample_schedule;  // defaults to log-spaced t0..t_end
  bool allow_unvalidated = false;       // skip the parameter admissibility gate
};

struct StepStats {
  long accepted = 0;
  long rejected = 0;
};

enum class Termination { completed, blowup, step_limit };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::blowup: return "blowup";
    case Termination::step_limit: return "step-limit";
  }
  return "completed";
}

struct TrajectoryLog {
  std::vector<SystemState> samples;
  StepStats step_stats;
  Termination termination = Termination::completed;
  double termination_time = 0.0;  // t at blowup/step-limit, t_end when completed
};

/// Geometrically spaced times from t0 to t_end inclusive.
inline std::vector<double> make_log_schedule(double t0, double t_end, int count) {
  if (!(t0 > 0.0) || !(t_end > t0)) {
    throw ContractError("make_log_schedule: need 0 < t0 < t_end");
  }
  if (count < 2) {
    throw ContractError("make_log_schedule: count must be >= 2");
  }
  std::vector<double> times(count);
  const double log_t0 = std::log(t0);
  const double log_t1 = std::log(t_end);
  for (int i = 0; i < count; ++i) {
    times[i] = std::exp(log_t0 + (log_t1 - log_t0) * i / (count - 1));
  }
  times.front() = t0;
  times.back() = t_end;
  return times;
}

namespace detail {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                 kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kA71 = 35.0 / 384, kA73 = 500.0 / 1113, kA74 = 125.0 / 192,
                 kA75 = -2187.0 / 6784, kA76 = 11.0 / 84;
// Difference between the 5th- and 4th-order weights.
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;
// Coefficients of the quartic dense-output polynomial.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

constexpr double kBlowupThreshold = 1e12;

class DormandPrince5 {
 public:
  DormandPrince5(const Problem& problem, const DynamicsParams& params)
      : problem_(problem),
        params_(params),
        n_(problem.dim_n()),
        m_(problem.dim_m()) {
    const int d = dim();
    k2_.resize(d);
    k3_.resize(d);
    k4_.resize(d);
    k5_.resize(d);
    k6_.resize(d);
    stage_.resize(d);
    x_buf_.resize(n_);
    lam_arg_.resize(m_);
    force_.resize(n_);
    resid_.resize(m_);
  }

  int dim() const { return 2 * (n_ + m_); }

  Vector eval(double t, const Vector& y) const {
    Vector dy(dim());
    eval_into(t, y, dy);
    return dy;
  }

  // Same arithmetic as the public rhs(), written into a caller buffer with
  // preallocated temporaries; the hot path of the integrator.
  void eval_into(double t, const Vector& y, Vector& dy) const {
    if (t <= 0.0) {
      throw ContractError("rhs: time must be positive, got t=" + std::to_string(t));
    }
    const auto x = y.segment(0, n_);
    const auto lambda = y.segment(n_, m_);
    const auto x_dot = y.segment(n_ + m_, n_);
    const auto lambda_dot = y.segment(2 * n_ + m_, m_);
    const double delta = params_.scaling.value(t);
    const Matrix& a = problem_.a();

    if (problem_.objective().quadratic.has_value()) {
      const QuadraticForm& qf = *problem_.objective().quadratic;
      force_.noalias() = qf.q * x;
      force_ += qf.c;
    } else {
      force_ = problem_.objective().gradient(x);
    }
    if (!force_.allFinite()) {
      throw EvaluationError("rhs: objective gradient is non-finite", t, x.norm());
    }
    resid_.noalias() = a * x;
    resid_ -= problem_.b();
    lam_arg_ = lambda + params_.theta * t * lambda_dot;
    force_.noalias() += a.transpose() * lam_arg_;
    force_.noalias() += params_.beta * (a.transpose() * resid_);

    dy.segment(0, n_) = x_dot;
    dy.segment(n_, m_) = lambda_dot;
    dy.segment(n_ + m_, n_) = -(params_.alpha / t) * x_dot - delta * force_;
    x_buf_ = x + params_.theta * t * x_dot;
    resid_.noalias() = a * x_buf_;
    resid_ -= problem_.b();
    dy.segment(2 * n_ + m_, m_) =
        -(params_.alpha / t) * lambda_dot + delta * resid_;
  }

  // One trial step from (t, y0) with the FSAL stage k1 already evaluated.
  // Fills y1, k7 (= f(t+h, y1)) and returns the weighted RMS error estimate.
  double try_step(double t, const Vector& y0, const Vector& k1, double h,
                  const IntegratorConfig& cfg, Vector& y1, Vector& k7) {
    stage_ = y0 + (h * kA21) * k1;
    eval_into(t + kC2 * h, stage_, k2_);
    stage_ = y0 + (h * kA31) * k1 + (h * kA32) * k2_;
    eval_into(t + kC3 * h, stage_, k3_);
    stage_ = y0 + (h * kA41) * k1 + (h * kA42) * k2_ + (h * kA43) * k3_;
    eval_into(t + kC4 * h, stage_, k4_);
    stage_ = y0 + (h * kA51) * k1 + (h * kA52) * k2_ + (h * kA53) * k3_ +
             (h * kA54) * k4_;
    eval_into(t + kC5 * h, stage_, k5_);
    stage_ = y0 + (h * kA61) * k1 + (h * kA62) * k2_ + (h * kA63) * k3_ +
             (h * kA64) * k4_ + (h * kA65) * k5_;
    eval_into(t + h, stage_, k6_);
    y1 = y0 + (h * kA71) * k1 + (h * kA73) * k3_ + (h * kA74) * k4_ +
         (h * kA75) * k5_ + (h * kA76) * k6_;
    eval_into(t + h, y1, k7);
    // Error per unit step: the embedded difference divided by h, so that the
    // accepted local error scales with the step and the global error stays
    // proportional to the tolerance.
    stage_ = kE1 * k1 + kE3 * k3_ + kE4 * k4_ + kE5 * k5_ + kE6 * k6_ + kE7 * k7;
    double acc = 0.0;
    for (int i = 0; i < dim(); ++i) {
      const double sc =
          cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      const double q = stage_[i] / sc;
      acc += q * q;
    }
    return std::sqrt(acc / dim());
  }

  // Dense-output coefficients over an accepted step [t, t+h].
  void prepare_dense(const Vector& y0, const Vector& y1, const Vector& k1,
                     const Vector& k7, double h) {
    rcont1_ = y0;
    rcont2_ = y1 - y0;
    rcont3_ = h * k1 - rcont2_;
    rcont4_ = rcont2_ - h * k7 - rcont3_;
    rcont5_ = h * (kD1 * k1 + kD3 * k3_ + kD4 * k4_ + kD5 * k5_ + kD6 * k6_ +
                   kD7 * k7);
  }

  Vector dense_at(double t_old, double h, double t) const {
    const double s = (t - t_old) / h;
    const double s1 = 1.0 - s;
    return rcont1_ +
           s * (rcont2_ + s1 * (rcont3_ + s * (rcont4_ + s1 * rcont5_)));
  }

  SystemState to_state(double t, const Vector& y) const {
    return unpack_state(t, y, n_, m_);
  }

 private:
  const Problem& problem_;
  const DynamicsParams& params_;
  int n_, m_;
  Vector k2_, k3_, k4_, k5_, k6_, stage_;
  mutable Vector x_buf_, lam_arg_, force_, resid_;
  Vector rcont1_, rcont2_, rcont3_, rcont4_, rcont5_;
};

// Hairer's starting-step heuristic.
inline double initial_step_guess(const DormandPrince5& sys, double t0,
                                 const Vector& y0, const Vector& f0,
                                 const IntegratorConfig& cfg, double h_max) {
  const int dim = static_cast<int>(y0.size());
  double dnf = 0.0, dny = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y0[i]);
    dnf += (f0[i] / sc) * (f0[i] / sc);
    dny += (y0[i] / sc) * (y0[i] / sc);
  }
  double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
  h = std::min(h, h_max);
  Vector f1 = sys.eval(t0 + h, y0 + h * f0);
  double der2 = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y0[i]);
    der2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
  }
  der2 = std::sqrt(der2) / h;
  const double der12 = std::max(der2, std::sqrt(dnf));
  const double h1 = (der12 <= 1e-15) ? std::max(1e-6, h * 1e-3)
                                     : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h, h1, h_max});
}

}  // namespace detail

/// Integrates the first-order system from `initial` to t_end with an
/// embedded 5(4) pair, proportional-integral step control, and dense output
/// evaluated exactly at the sample schedule. On blow-up or when the step
/// budget is exhausted, the partial log collected so far is returned with the
/// corresponding termination tag.
inline TrajectoryLog integrate(const Problem& problem, const DynamicsParams& params,
                               const SystemState& initial, double t_end,
                               const IntegratorConfig& config) {
  if (!(config.rel_tol > 0.0 && config.rel_tol <= 1e-2)) {
    throw ContractError("integrate: rel_tol must lie in (0, 1e-2]");
  }
  if (!(config.abs_tol > 0.0)) {
    throw ContractError("integrate: abs_tol must be positive");
  }
  if (!(initial.t > 0.0) || !(t_end > initial.t)) {
    throw ContractError("integrate: need 0 < initial.t < t_end");
  }
  if (!config.allow_unvalidated) {
    const ValidationMode mode = params.scaling.is_unit()
                                    ? ValidationMode::basic
                                    : ValidationMode::scaled_basic;
    ValidationReport report = validate_params(params, mode, initial.t);
    if (!report.pass) {
      std::string what = "integrate: parameters fail " + to_string(mode) +
                         " validation:";
      for (const auto& v : report.violations) what += " " + v + ";";
      throw ContractError(what);
    }
  }

  std::vector<double> schedule = config.sample_schedule;
  if (schedule.empty()) {
    schedule = make_log_schedule(initial.t, t_end, 241);
  }
  if (schedule.front() != initial.t) {
    throw ContractError("integrate: first schedule time must equal initial.t");
  }
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    if (!(schedule[i] < schedule[i + 1])) {
      throw ContractError("integrate: sample schedule must be strictly increasing");
    }
  }
  if (schedule.back() > t_end) {
    throw ContractError("integrate: sample schedule extends past t_end");
  }

  detail::DormandPrince5 sys(problem, params);
  TrajectoryLog log;
  log.samples.reserve(schedule.size());
  log.samples.push_back(initial);
  std::size_t next_sample = 1;

  double t = initial.t;
  Vector y = pack_state(initial);
  const double h_max = config.max_step > 0.0 ? config.max_step : t_end - t;

  Vector k1;
  try {
    k1 = sys.eval(t, y);
  } catch (const EvaluationError&) {
    log.termination = Termination::blowup;
    log.termination_time = t;
    return log;
  }

  double h = config.initial_step > 0.0
                 ? std::min(config.initial_step, h_max)
                 : detail::initial_step_guess(sys, t, y, k1, config, h_max);

  // PI controller constants (Hairer, Norsett & Wanner); the exponent uses
  // order 4 because the controlled quantity is the per-unit-step error.
  constexpr double kSafety = 0.9;
  constexpr double kBetaPi = 0.04;
  constexpr double kExpo1 = 0.25 - kBetaPi * 0.75;
  constexpr double kMaxGrow = 10.0, kMaxShrink = 0.2;
  double fac_old = 1e-4;

  Vector y1(sys.dim()), k7(sys.dim());
  bool previous_rejected = false;
  int consecutive_failures = 0;

  while (t < t_end) {
    if (log.step_stats.accepted + log.step_stats.rejected >= config.max_steps) {
      log.termination = Termination::step_limit;
      log.termination_time = t;
      return log;
    }
    bool last_step = false;
    if (t + h >= t_end) {
      h = t_end - t;
      last_step = true;
    }
    if (h <= 1e-14 * std::max(1.0, t) && !last_step) {
      log.termination = Termination::blowup;
      log.termination_time = t;
      return log;
    }

    double err;
    try {
      err = sys.try_step(t, y, k1, h, config, y1, k7);
    } catch (const EvaluationError&) {
      err = std::numeric_limits<double>::infinity();
    }

    if (!std::isfinite(err)) {
      ++log.step_stats.rejected;
      if (++consecutive_failures > 60) {
        log.termination = Termination::blowup;
        log.termination_time = t;
        return log;
      }
      h *= 0.5;
      previous_rejected = true;
      continue;
    }

    const double fac11 = std::pow(err, kExpo1);
    if (err <= 1.0) {
      consecutive_failures = 0;
      ++log.step_stats.accepted;
      sys.prepare_dense(y, y1, k1, k7, h);
      const double t_new = last_step ? t_end : t + h;

      while (next_sample < schedule.size() && schedule[next_sample] <= t_new) {
        const double ts = schedule[next_sample];
        Vector ys = (ts == t_new) ? y1 : sys.dense_at(t, h, ts);
        log.samples.push_back(sys.to_state(ts, ys));
        ++next_sample;
      }

      if (!y1.allFinite() || y1.cwiseAbs().maxCoeff() > detail::kBlowupThreshold) {
        log.termination = Termination::blowup;
        log.termination_time = t_new;
        return log;
      }

      double fac = fac11 / std::pow(fac_old, kBetaPi);
      fac = std::clamp(fac / kSafety, 1.0 / kMaxGrow, 1.0 / kMaxShrink);
      double h_new = h / fac;
      if (previous_rejected) {
        h_new = std::min(h_new, h);
      }
      fac_old = std::max(err, 1e-4);
      previous_rejected = false;

      t = t_new;
      y.swap(y1);
      k1.swap(k7);  // FSAL
      h = std::min(h_new, h_max);
    } else {
      ++log.step_stats.rejected;
      h /= std::min(1.0 / kMaxShrink, fac11 / kSafety);
      previous_rejected = true;
    }
  }

  log.termination = Termination::completed;
  log.termination_time = t_end;
  return log;
}

}  // namespace apd
