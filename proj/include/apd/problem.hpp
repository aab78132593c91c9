#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "apd/errors.hpp"

namespace apd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Explicit quadratic form ½ xᵀQx + cᵀx. When an objective carries one, the
/// reference solver can use a direct saddle-system factorization instead of
/// Newton iteration.
struct QuadraticForm {
  Matrix q;
  Vector c;
};

struct ObjectiveFunction {
  int dim_n = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::string label;
  std::optional<double> gradient_lipschitz;  // absent for non-Lipschitz entries
  std::optional<QuadraticForm> quadratic;
};

struct LinearConstraint {
  Matrix matrix_a;  // m x n
  Vector rhs_b;     // m

  int rows() const { return static_cast<int>(matrix_a.rows()); }
  int cols() const { return static_cast<int>(matrix_a.cols()); }

  /// Least-squares residual min_x ||Ax - b||; zero iff the constraint set is
  /// nonempty.
  double feasibility_residual() const {
    if (matrix_a.size() == 0 || matrix_a.isZero(0.0)) {
      return rhs_b.norm();
    }
    Vector x = matrix_a.completeOrthogonalDecomposition().solve(rhs_b);
    return (matrix_a * x - rhs_b).norm();
  }
};

class Problem {
 public:
  Problem(ObjectiveFunction objective, LinearConstraint constraint)
      : objective_(std::move(objective)), constraint_(std::move(constraint)) {
    if (objective_.dim_n != constraint_.cols()) {
      throw ContractError("Problem: objective dimension " +
                          std::to_string(objective_.dim_n) +
                          " does not match constraint column count " +
                          std::to_string(constraint_.cols()));
    }
    if (constraint_.rhs_b.size() != constraint_.rows()) {
      throw ContractError("Problem: constraint rhs length does not match row count");
    }
    if (constraint_.feasibility_residual() > 1e-10) {
      throw ContractError("Problem: constraint set is empty (least-squares residual " +
                          std::to_string(constraint_.feasibility_residual()) + ")");
    }
  }

  const ObjectiveFunction& objective() const { return objective_; }
  const LinearConstraint& constraint() const { return constraint_; }
  const Matrix& a() const { return constraint_.matrix_a; }
  const Vector& b() const { return constraint_.rhs_b; }
  int dim_n() const { return objective_.dim_n; }
  int dim_m() const { return constraint_.rows(); }

  double value(const Vector& x) const { return objective_.value(x); }
  Vector gradient(const Vector& x) const { return objective_.gradient(x); }

 private:
  ObjectiveFunction objective_;
  LinearConstraint constraint_;
};

struct PrimalDualPoint {
  Vector x;
  Vector lambda;
};

struct KktResidual {
  double feasibility = 0.0;   // ||Ax - b||
  double stationarity = 0.0;  // ||grad f(x) + Aᵀλ||
};

namespace detail {

inline void check_primal_dim(const Problem& problem, const Vector& x, const char* op) {
  if (x.size() != problem.dim_n()) {
    throw ContractError(std::string(op) + ": x has dimension " +
                        std::to_string(x.size()) + ", expected " +
                        std::to_string(problem.dim_n()));
  }
}

inline void check_dual_dim(const Problem& problem, const Vector& lambda, const char* op) {
  if (lambda.size() != problem.dim_m()) {
    throw ContractError(std::string(op) + ": lambda has dimension " +
                        std::to_string(lambda.size()) + ", expected " +
                        std::to_string(problem.dim_m()));
  }
}

}  // namespace detail

/// L_beta(x, lambda) = f(x) + <lambda, Ax - b> + (beta/2) ||Ax - b||^2.
inline double augmented_lagrangian(const Problem& problem, const Vector& x,
                                   const Vector& lambda, double beta) {
  detail::check_primal_dim(problem, x, "augmented_lagrangian");
  detail::check_dual_dim(problem, lambda, "augmented_lagrangian");
  if (beta < 0.0) {
    throw ContractError("augmented_lagrangian: beta must be nonnegative");
  }
  Vector residual = problem.a() * x - problem.b();
  return problem.value(x) + lambda.dot(residual) + 0.5 * beta * residual.squaredNorm();
}

/// Bregman distance D_f(x_ref, x) = f(x_ref) - f(x) - <grad f(x), x_ref - x>.
/// Nonnegative for convex f.
inline double bregman_distance(const Problem& problem, const Vector& x_ref,
                               const Vector& x) {
  detail::check_primal_dim(problem, x_ref, "bregman_distance");
  detail::check_primal_dim(problem, x, "bregman_distance");
  return problem.value(x_ref) - problem.value(x) -
         problem.gradient(x).dot(x_ref - x);
}

inline KktResidual kkt_residual(const Problem& problem, const PrimalDualPoint& point) {
  detail::check_primal_dim(problem, point.x, "kkt_residual");
  detail::check_dual_dim(problem, point.lambda, "kkt_residual");
  KktResidual r;
  r.feasibility = (problem.a() * point.x - problem.b()).norm();
  r.stationarity =
      (problem.gradient(point.x) + problem.a().transpose() * point.lambda).norm();
  return r;
}

inline Problem make_quadratic_problem(Matrix q, Vector c, Matrix a, Vector b,
                                      std::string label) {
  ObjectiveFunction obj;
  obj.dim_n = static_cast<int>(q.rows());
  obj.label = std::move(label);
  Eigen::SelfAdjointEigenSolver<Matrix> es(q);
  obj.gradient_lipschitz = es.eigenvalues().maxCoeff();
  Matrix qc = q;
  Vector cc = c;
  obj.value = [qc, cc](const Vector& x) { return 0.5 * x.dot(qc * x) + cc.dot(x); };
  obj.gradient = [qc, cc](const Vector& x) -> Vector { return qc * x + cc; };
  obj.quadratic = QuadraticForm{std::move(q), std::move(c)};
  return Problem(std::move(obj), LinearConstraint{std::move(a), std::move(b)});
}

inline Problem make_quartic_problem(int n, Matrix a, Vector b, std::string label) {
  // f(x) = 1/4 sum x_i^4 + 1/2 ||x||^2; gradient x.^3 + x is not globally
  // Lipschitz.
  ObjectiveFunction obj;
  obj.dim_n = n;
  obj.label = std::move(label);
  obj.value = [](const Vector& x) {
    return 0.25 * x.array().pow(4).sum() + 0.5 * x.squaredNorm();
  };
  obj.gradient = [](const Vector& x) -> Vector {
    return x.array().cube().matrix() + x;
  };
  return Problem(std::move(obj), LinearConstraint{std::move(a), std::move(b)});
}

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {
      "quadratic-easy",  "quadratic-illcond",   "quartic",
      "expsum",          "rank-deficient",      "unconstrained-quad",
      "unconstrained-quartic"};
  return names;
}

/// Fixed corpus of constrained convex test problems. The quartic and expsum
/// entries have gradients that are not globally Lipschitz; rank-deficient has
/// duplicated constraint rows so the dual solution is non-unique; the
/// unconstrained-* entries use A = 0, b = 0 and reduce the dynamics to the
/// inertial gradient flow.
inline Problem catalog(const std::string& name) {
  if (name == "quadratic-easy") {
    Matrix a(2, 4);
    a << 1, 1, 1, 1,
         1, -1, 1, -1;
    Vector b(2);
    b << 2, 0;
    return make_quadratic_problem(Matrix::Identity(4, 4), Vector::Zero(4),
                                          a, b, name);
  }
  if (name == "quadratic-illcond") {
    // Condition number 1e4.
    Vector diag(4);
    diag << 1e-2, 1e-1, 1.0, 1e2;
    Matrix a(2, 4);
    a << 1, 1, 1, 1,
         1, -1, 1, -1;
    Vector b(2);
    b << 2, 0;
    return make_quadratic_problem(diag.asDiagonal(), Vector::Zero(4), a, b,
                                          name);
  }
  if (name == "quartic") {
    Matrix a(1, 2);
    a << 1, 1;
    Vector b(1);
    b << 1;
    return make_quartic_problem(2, a, b, name);
  }
  if (name == "expsum") {
    ObjectiveFunction obj;
    obj.dim_n = 2;
    obj.label = name;
    obj.value = [](const Vector& x) { return x.array().exp().sum(); };
    obj.gradient = [](const Vector& x) -> Vector { return x.array().exp(); };
    Matrix a(1, 2);
    a << 1, 1;
    Vector b(1);
    b << 1;
    return Problem(std::move(obj), LinearConstraint{a, b});
  }
  if (name == "rank-deficient") {
    Matrix a(2, 2);
    a << 1, 1,
         1, 1;
    Vector b(2);
    b << 2, 2;
    return make_quadratic_problem(Matrix::Identity(2, 2), Vector::Zero(2),
                                          a, b, name);
  }
  if (name == "unconstrained-quad") {
    Vector diag(2);
    diag << 1.0, 3.0;
    return make_quadratic_problem(diag.asDiagonal(), Vector::Zero(2),
                                          Matrix::Zero(1, 2), Vector::Zero(1), name);
  }
  if (name == "unconstrained-quartic") {
    return make_quartic_problem(2, Matrix::Zero(1, 2), Vector::Zero(1), name);
  }
  std::string valid;
  for (const auto& n : catalog_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw LookupError("catalog: unknown problem \"" + name + "\"; valid names: " + valid);
}

}  // namespace apd
