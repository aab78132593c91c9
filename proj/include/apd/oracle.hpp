#pragma once

#include <cmath>
#include <string>

#include "apd/integrator.hpp"
#include "apd/problem.hpp"

namespace apd {

namespace detail {

/// Minimum-norm solution of the dense linear system M z = r. Rank-deficient
/// systems (duplicated constraint rows, zero constraint blocks) get the
/// pseudo-inverse solution, which keeps the oracle deterministic when the
/// primal-dual solution set is not a singleton.
inline Vector min_norm_solve(const Matrix& m, const Vector& r) {
  return m.completeOrthogonalDecomposition().solve(r);
}

/// Central finite-difference Hessian of the objective, column by column from
/// the gradient callable.
inline Matrix fd_hessian(const Problem& problem, const Vector& x) {
  const int n = problem.dim_n();
  Matrix h(n, n);
  for (int j = 0; j < n; ++j) {
    const double step = 1e-6 * (1.0 + std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    h.col(j) = (problem.gradient(xp) - problem.gradient(xm)) / (2.0 * step);
  }
  return 0.5 * (h + h.transpose());
}

inline Vector kkt_map(const Problem& problem, const Vector& x, const Vector& lambda) {
  const int n = problem.dim_n();
  const int m = problem.dim_m();
  Vector f(n + m);
  f.head(n) = problem.gradient(x) + problem.a().transpose() * lambda;
  f.tail(m) = problem.a() * x - problem.b();
  return f;
}

inline Matrix saddle_matrix(const Matrix& q, const Matrix& a) {
  const int n = static_cast<int>(q.rows());
  const int m = static_cast<int>(a.rows());
  Matrix k = Matrix::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = q;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomLeftCorner(m, n) = a;
  return k;
}

// Damped Newton on F(x, lambda) = (grad f + Aᵀλ, Ax - b), with backtracking
// on ||F|| and a finite-difference Hessian. Returns the achieved residual.
inline double damped_newton(const Problem& problem, Vector& x, Vector& lambda,
                            double tol, int max_iters) {
  const int n = problem.dim_n();
  Vector f = kkt_map(problem, x, lambda);
  double fnorm = f.norm();
  for (int iter = 0; iter < max_iters && fnorm > tol; ++iter) {
    Matrix jac = saddle_matrix(fd_hessian(problem, x), problem.a());
    Vector step = min_norm_solve(jac, -f);
    double damping = 1.0;
    Vector x_new, lambda_new, f_new;
    double fnorm_new = fnorm;
    while (damping > 1e-12) {
      x_new = x + damping * step.head(n);
      lambda_new = lambda + damping * step.tail(f.size() - n);
      f_new = kkt_map(problem, x_new, lambda_new);
      fnorm_new = f_new.norm();
      if (std::isfinite(fnorm_new) && fnorm_new <= (1.0 - 1e-4 * damping) * fnorm) {
        break;
      }
      damping *= 0.5;
    }
    if (!(fnorm_new < fnorm)) {
      break;  // stalled
    }
    x = x_new;
    lambda = lambda_new;
    f = f_new;
    fnorm = fnorm_new;
  }
  return fnorm;
}

}  // namespace detail

/// Reference primal-dual solution with kkt_residual <= tol. Objectives
/// carrying an explicit quadratic form are solved directly through the saddle
/// linear system; general smooth objectives go through damped Newton seeded
/// by the quadratic model at the least-squares feasible point, with a
/// long-horizon integration of the dynamics as a last resort. The dual is
/// always reduced to the minimum-norm representative.
inline PrimalDualPoint solve_kkt_oracle(const Problem& problem, double tol = 1e-10) {
  if (!(tol > 0.0)) {
    throw ContractError("solve_kkt_oracle: tol must be positive");
  }
  const int n = problem.dim_n();
  const int m = problem.dim_m();

  Vector x, lambda;
  if (problem.objective().quadratic.has_value()) {
    const QuadraticForm& qf = *problem.objective().quadratic;
    Vector rhs_vec(n + m);
    rhs_vec.head(n) = -qf.c;
    rhs_vec.tail(m) = problem.b();
    Vector z = detail::min_norm_solve(detail::saddle_matrix(qf.q, problem.a()), rhs_vec);
    x = z.head(n);
    lambda = z.tail(m);
  } else {
    // Quadratic-model start: Hessian and gradient at the least-squares
    // feasible point.
    x = detail::min_norm_solve(problem.a(), problem.b());
    Matrix h0 = detail::fd_hessian(problem, x);
    Vector g0 = problem.gradient(x);
    Vector rhs_vec(n + m);
    rhs_vec.head(n) = h0 * x - g0;  // minimize the local quadratic model
    rhs_vec.tail(m) = problem.b();
    Vector z = detail::min_norm_solve(detail::saddle_matrix(h0, problem.a()), rhs_vec);
    x = z.head(n);
    lambda = z.tail(m);

    double residual = detail::damped_newton(problem, x, lambda, tol * 1e-2, 100);
    if (residual > tol) {
      // Newton stalled; relax toward the solution set by running the
      // dynamics, then polish again.
      DynamicsParams params;
      params.alpha = 5.0;
      params.theta = 0.3;
      params.beta = 1.0;
      SystemState init;
      init.t = 1.0;
      init.x = x;
      init.lambda = lambda;
      init.x_dot = Vector::Zero(n);
      init.lambda_dot = Vector::Zero(m);
      IntegratorConfig cfg;
      cfg.rel_tol = 1e-9;
      cfg.abs_tol = 1e-11;
      cfg.sample_schedule = {1.0, 2000.0};
      TrajectoryLog log = integrate(problem, params, init, 2000.0, cfg);
      if (log.termination == Termination::completed) {
        x = log.samples.back().x;
        lambda = log.samples.back().lambda;
        detail::damped_newton(problem, x, lambda, tol * 1e-2, 100);
      }
    }
  }

  // Deterministic minimum-norm dual representative for the converged primal.
  lambda = detail::min_norm_solve(problem.a().transpose(), -problem.gradient(x));

  PrimalDualPoint point{x, lambda};
  KktResidual r = kkt_residual(problem, point);
  const double achieved = std::max(r.feasibility, r.stationarity);
  if (achieved > tol) {
    throw OracleError("solve_kkt_oracle: residual " + std::to_string(achieved) +
                          " exceeds tolerance " + std::to_string(tol),
                      achieved);
  }
  return point;
}

}  // namespace apd
