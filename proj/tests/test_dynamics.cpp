#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "apd/dynamics.hpp"
#include "apd/oracle.hpp"
#include "apd/problem.hpp"

using apd::Matrix;
using apd::Vector;

namespace {

// n = m = 1: f(x) = x^2/2, A = [1], b = 0.
apd::Problem scalar_problem() {
  Matrix a(1, 1);
  a << 1;
  return apd::make_quadratic_problem(Matrix::Identity(1, 1), Vector::Zero(1), a,
                                     Vector::Zero(1), "scalar");
}

apd::SystemState scalar_state(double t, double x, double lambda, double xd,
                              double ld) {
  apd::SystemState s;
  s.t = t;
  s.x = Vector::Constant(1, x);
  s.lambda = Vector::Constant(1, lambda);
  s.x_dot = Vector::Constant(1, xd);
  s.lambda_dot = Vector::Constant(1, ld);
  return s;
}

apd::SystemState random_state(std::mt19937& rng, double t, int n, int m) {
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  apd::SystemState s;
  s.t = t;
  s.x = Vector::NullaryExpr(n, [&](Eigen::Index) { return dist(rng); });
  s.lambda = Vector::NullaryExpr(m, [&](Eigen::Index) { return dist(rng); });
  s.x_dot = Vector::NullaryExpr(n, [&](Eigen::Index) { return dist(rng); });
  s.lambda_dot = Vector::NullaryExpr(m, [&](Eigen::Index) { return dist(rng); });
  return s;
}

}  // namespace

TEST_CASE("rhs reproduces the worked scalar evaluations") {
  apd::Problem p = scalar_problem();
  apd::DynamicsParams params{3.0, 0.5, 0.0};
  apd::StateDerivative d = apd::rhs(scalar_state(1, 1, 0, 0, 0), params, p);
  CHECK(d.x_dot[0] == 0.0);
  CHECK(d.lambda_dot[0] == 0.0);
  CHECK(d.x_ddot[0] == Catch::Approx(-1.0).margin(1e-15));
  CHECK(d.lambda_ddot[0] == Catch::Approx(1.0).margin(1e-15));

  params.beta = 2.0;
  d = apd::rhs(scalar_state(1, 1, 0, 0, 0), params, p);
  CHECK(d.x_ddot[0] == Catch::Approx(-3.0).margin(1e-15));
  CHECK(d.lambda_ddot[0] == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("rhs vanishes at a primal-dual solution with zero velocities") {
  for (const std::string& name : {"quadratic-easy", "quartic", "rank-deficient"}) {
    apd::Problem p = apd::catalog(name);
    apd::PrimalDualPoint star = apd::solve_kkt_oracle(p, 1e-11);
    apd::SystemState s = apd::equilibrium_state(p, star, 1.0);
    apd::DynamicsParams params{4.0, 0.4, 1.5};
    apd::StateDerivative d = apd::rhs(s, params, p);
    INFO(name);
    CHECK(d.x_dot.norm() == 0.0);
    CHECK(d.lambda_dot.norm() == 0.0);
    CHECK(d.x_ddot.norm() <= 1e-10);
    CHECK(d.lambda_ddot.norm() <= 1e-10);
  }
}

TEST_CASE("rhs rejects nonpositive time") {
  apd::Problem p = scalar_problem();
  apd::DynamicsParams params;
  CHECK_THROWS_AS(apd::rhs(scalar_state(0.0, 1, 0, 0, 0), params, p),
                  apd::ContractError);
  CHECK_THROWS_AS(apd::rhs(scalar_state(-1.0, 1, 0, 0, 0), params, p),
                  apd::ContractError);
}

TEST_CASE("unconstrained catalog entries reduce to the inertial gradient flow") {
  std::mt19937 rng(31);
  for (const std::string& name : {"unconstrained-quad", "unconstrained-quartic"}) {
    apd::Problem p = apd::catalog(name);
    apd::DynamicsParams params{4.0, 0.35, 1.0, apd::ScalingFunction::power(0.5)};
    for (int k = 0; k < 20; ++k) {
      apd::SystemState s = random_state(rng, 1.0 + k * 0.7, p.dim_n(), p.dim_m());
      apd::StateDerivative d = apd::rhs(s, params, p);
      const double delta = params.scaling.value(s.t);
      Vector avd_force = -(params.alpha / s.t) * s.x_dot - delta * p.gradient(s.x);
      INFO(name);
      CHECK((d.x_ddot - avd_force).norm() == 0.0);
      CHECK((d.lambda_ddot + (params.alpha / s.t) * s.lambda_dot).norm() == 0.0);
    }
  }
}

TEST_CASE("unit scaling is bit-identical to the unscaled system") {
  std::mt19937 rng(77);
  apd::Problem p = apd::catalog("quadratic-easy");
  apd::DynamicsParams params{3.5, 0.45, 2.0, apd::ScalingFunction::unit()};
  std::uniform_real_distribution<double> time_dist(0.5, 50.0);
  for (int k = 0; k < 100; ++k) {
    apd::SystemState s = random_state(rng, time_dist(rng), p.dim_n(), p.dim_m());
    apd::StateDerivative d = apd::rhs(s, params, p);
    // Hand-coded unscaled right-hand side.
    Vector grad = p.gradient(s.x);
    Vector force = grad +
                   p.a().transpose() *
                       (s.lambda + params.theta * s.t * s.lambda_dot) +
                   params.beta * (p.a().transpose() * (p.a() * s.x - p.b()));
    Vector x_ddot = -(params.alpha / s.t) * s.x_dot - 1.0 * force;
    Vector l_ddot =
        -(params.alpha / s.t) * s.lambda_dot +
        1.0 * (p.a() * (s.x + params.theta * s.t * s.x_dot) - p.b());
    REQUIRE(d.x_ddot == x_ddot);
    REQUIRE(d.lambda_ddot == l_ddot);
  }
}

TEST_CASE("primal acceleration is affine in the dual variable") {
  std::mt19937 rng(123);
  apd::Problem p = apd::catalog("quadratic-easy");
  apd::DynamicsParams params{4.0, 0.3, 1.0};
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    apd::SystemState s = random_state(rng, 2.0, p.dim_n(), p.dim_m());
    Vector la = s.lambda, lc = s.lambda;
    for (int i = 0; i < p.dim_m(); ++i) {
      la[i] = dist(rng);
      lc[i] = dist(rng);
    }
    apd::SystemState sa = s, sb = s, sc = s;
    sa.lambda = la;
    sb.lambda = 0.5 * (la + lc);
    sc.lambda = lc;
    Vector fa = apd::rhs(sa, params, p).x_ddot;
    Vector fb = apd::rhs(sb, params, p).x_ddot;
    Vector fc = apd::rhs(sc, params, p).x_ddot;
    CHECK((fa + fc - 2.0 * fb).norm() <=
          1e-12 * (1.0 + fa.norm() + fc.norm()));
  }
}

TEST_CASE("validate_params basic and strict modes") {
  apd::DynamicsParams critical{3.0, 0.5, 0.0};
  CHECK(apd::validate_params(critical, apd::ValidationMode::basic, 1.0).pass);

  apd::ValidationReport strict =
      apd::validate_params(critical, apd::ValidationMode::strict, 1.0);
  CHECK_FALSE(strict.pass);
  CHECK(strict.violations.size() == 2);  // alpha not > 3, theta not interior

  apd::DynamicsParams interior{5.0, 0.3, 1.0};
  CHECK(apd::validate_params(interior, apd::ValidationMode::strict, 1.0).pass);

  apd::DynamicsParams low_alpha{2.0, 0.5, 0.0};
  CHECK_FALSE(apd::validate_params(low_alpha, apd::ValidationMode::basic, 1.0).pass);

  apd::DynamicsParams theta_out{3.0, 0.45, 0.0};
  // 1/(alpha-1) = 0.5, so theta = 0.45 sits below the admissible interval.
  CHECK_FALSE(apd::validate_params(theta_out, apd::ValidationMode::basic, 1.0).pass);

  apd::DynamicsParams negative_beta{5.0, 0.3, -1.0};
  CHECK_FALSE(
      apd::validate_params(negative_beta, apd::ValidationMode::basic, 1.0).pass);

  apd::DynamicsParams scaled{5.0, 0.3, 0.0, apd::ScalingFunction::power(1.0)};
  CHECK_FALSE(apd::validate_params(scaled, apd::ValidationMode::basic, 1.0).pass);
}

TEST_CASE("validate_params scaled modes bound the scaling ratio") {
  // r = 1 < 1/0.3 - 2 = 1.333...: admissible, strictly.
  apd::DynamicsParams power_ok{5.0, 0.3, 1.0, apd::ScalingFunction::power(1.0)};
  CHECK(apd::validate_params(power_ok, apd::ValidationMode::scaled_strict, 1.0).pass);

  // r exactly at the cap passes scaled-basic but not scaled-strict.
  const double cap = 1.0 / 0.3 - 2.0;
  apd::DynamicsParams power_edge{5.0, 0.3, 1.0, apd::ScalingFunction::power(cap)};
  CHECK(apd::validate_params(power_edge, apd::ValidationMode::scaled_basic, 1.0).pass);
  CHECK_FALSE(
      apd::validate_params(power_edge, apd::ValidationMode::scaled_strict, 1.0).pass);

  apd::DynamicsParams power_big{5.0, 0.3, 1.0, apd::ScalingFunction::power(2.0)};
  CHECK_FALSE(
      apd::validate_params(power_big, apd::ValidationMode::scaled_basic, 1.0).pass);

  apd::DynamicsParams power_neg{5.0, 0.3, 1.0, apd::ScalingFunction::power(-0.5)};
  CHECK_FALSE(
      apd::validate_params(power_neg, apd::ValidationMode::scaled_basic, 1.0).pass);

  apd::DynamicsParams expo{5.0, 0.3, 1.0, apd::ScalingFunction::exponential(0.1)};
  apd::ValidationReport r =
      apd::validate_params(expo, apd::ValidationMode::scaled_basic, 1.0);
  CHECK_FALSE(r.pass);
  CHECK_FALSE(r.warnings.empty());  // finite-horizon warning

  apd::DynamicsParams unit_scaled{5.0, 0.3, 1.0};
  CHECK(apd::validate_params(unit_scaled, apd::ValidationMode::scaled_basic, 1.0).pass);
}

TEST_CASE("scaling function evaluators") {
  apd::ScalingFunction unit = apd::ScalingFunction::unit();
  CHECK(unit.value(7.0) == 1.0);
  CHECK(unit.derivative(7.0) == 0.0);
  CHECK(unit.log_slope(7.0) == 0.0);

  apd::ScalingFunction pw = apd::ScalingFunction::power(1.5);
  CHECK(pw.value(4.0) == Catch::Approx(8.0));
  CHECK(pw.log_slope(123.0) == Catch::Approx(1.5));
  CHECK(pw.derivative(4.0) == Catch::Approx(1.5 * 2.0));

  apd::ScalingFunction ex = apd::ScalingFunction::exponential(0.2);
  CHECK(ex.value(5.0) == Catch::Approx(std::exp(1.0)));
  CHECK(ex.log_slope(5.0) == Catch::Approx(1.0));
}

TEST_CASE("equilibrium_state rejects sloppy oracle points") {
  apd::Problem p = apd::catalog("quadratic-easy");
  apd::PrimalDualPoint bad{Vector::Ones(4), Vector::Zero(2)};
  CHECK_THROWS_AS(apd::equilibrium_state(p, bad, 1.0), apd::ContractError);
}

TEST_CASE("equilibrium accelerations vanish for either dual representative") {
  apd::Problem p = apd::catalog("rank-deficient");
  apd::PrimalDualPoint first = apd::solve_kkt_oracle(p, 1e-11);
  Eigen::FullPivLU<Matrix> lu(p.a().transpose());
  apd::PrimalDualPoint second{first.x, first.lambda + 0.5 * lu.kernel().col(0)};

  apd::DynamicsParams params{3.0, 0.5, 1.0};
  for (const apd::PrimalDualPoint& star : {first, second}) {
    apd::SystemState s = apd::equilibrium_state(p, star, 1.0);
    apd::StateDerivative d = apd::rhs(s, params, p);
    CHECK(d.x_ddot.norm() <= 1e-10);
    CHECK(d.lambda_ddot.norm() <= 1e-10);
  }
}

TEST_CASE("state packing round-trips in the fixed (x, lambda, xdot, lambdadot) order") {
  std::mt19937 rng(9);
  apd::SystemState s = random_state(rng, 3.0, 3, 2);
  Vector y = apd::pack_state(s);
  REQUIRE(y.size() == 10);
  CHECK(y.segment(0, 3) == s.x);
  CHECK(y.segment(3, 2) == s.lambda);
  CHECK(y.segment(5, 3) == s.x_dot);
  CHECK(y.segment(8, 2) == s.lambda_dot);
  apd::SystemState back = apd::unpack_state(s.t, y, 3, 2);
  CHECK(back.x == s.x);
  CHECK(back.lambda == s.lambda);
  CHECK(back.x_dot == s.x_dot);
  CHECK(back.lambda_dot == s.lambda_dot);
}
