#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "mpsf/costs.hpp"

using namespace mpsf;

namespace {

// Dot-product oracle for ||v||_M^2 written as an explicit double loop.
double quad_oracle(const Eigen::MatrixXd& M, const Eigen::VectorXd& v) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) acc += v(i) * M(i, j) * v(j);
  }
  return acc;
}

LinearDynamics double_integrator(double Ts = 0.1) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1.0, Ts, 0.0, 1.0;
  B << 0.5 * Ts * Ts, Ts;
  return LinearDynamics(A, B);
}

StabilityCost unit_cost() {
  return StabilityCost(Eigen::MatrixXd::Identity(2, 2),
                       Eigen::MatrixXd::Identity(1, 1),
                       Eigen::MatrixXd::Identity(2, 2));
}

}  // namespace

TEST_CASE("stage_cost: zero at the reference point") {
  auto c = unit_cost();
  Eigen::VectorXd x(2), u(1);
  x << 0.4, -0.2;
  u << 0.7;
  CHECK(stage_cost(c, x, u, ReferencePoint{x, u}) == 0.0);
}

TEST_CASE("stage_cost: identity weights") {
  auto c = unit_cost();
  Eigen::VectorXd x(2), u(1);
  x << 1.0, 0.0;
  u << 2.0;
  const double got = stage_cost(c, x, u);
  CHECK(got == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(got == doctest::Approx(quad_oracle(c.Q(), x) + quad_oracle(c.R(), u)));
}

TEST_CASE("stage_cost: diagonal weights") {
  Eigen::MatrixXd Q(2, 2);
  Q << 2.0, 0.0, 0.0, 3.0;
  StabilityCost c(Q, Eigen::MatrixXd::Identity(1, 1),
                  Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd x(2), u(1);
  x << 1.0, 1.0;
  u << 0.0;
  CHECK(stage_cost(c, x, u) == doctest::Approx(5.0));
  CHECK(stage_cost(c, x, u) == doctest::Approx(quad_oracle(Q, x)));
}

TEST_CASE("stability_cost_J: zero along the reference") {
  auto c = unit_cost();
  auto dyn = double_integrator();
  const std::vector<Eigen::VectorXd> us(4, Eigen::VectorXd::Zero(1));
  CHECK(stability_cost_J(c, dyn, Eigen::Vector2d::Zero(), us) == 0.0);
}

TEST_CASE("stability_cost_J: N = 1 collapses to stage + terminal") {
  auto c = unit_cost();
  auto dyn = double_integrator();
  Eigen::VectorXd x0(2), u0(1);
  x0 << 0.3, -0.1;
  u0 << 0.5;
  const double direct =
      stage_cost(c, x0, u0) + c.terminal_cost(step(dyn, x0, u0));
  CHECK(stability_cost_J(c, dyn, x0, {u0}) == doctest::Approx(direct).epsilon(1e-15));
}

TEST_CASE("stability_cost_J: rollout-then-sum oracle, N = 2") {
  auto c = unit_cost();
  auto dyn = double_integrator();
  Eigen::VectorXd x0(2);
  x0 << 1.0, 0.0;
  const std::vector<Eigen::VectorXd> us(2, Eigen::VectorXd::Zero(1));
  const auto xs = rollout_open_loop(dyn, x0, us);
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    expected += quad_oracle(c.Q(), xs[i]) + quad_oracle(c.R(), us[i]);
  }
  expected += quad_oracle(c.P(), xs[2]);
  CHECK(stability_cost_J(c, dyn, x0, us) ==
        doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("matching_objective_G") {
  Eigen::VectorXd a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 0.0;
  CHECK(matching_objective_G(a, a) == 0.0);
  CHECK(matching_objective_G(a, b) == doctest::Approx(1.0));
  a << 2.0, -1.0;
  b << -1.0, 3.0;
  CHECK(matching_objective_G(a, b) == doctest::Approx(25.0));
}

TEST_CASE("stability_cost_J: nonnegative, zero only on the reference") {
  auto c = unit_cost();
  auto dyn = double_integrator();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.5);
  for (int t = 0; t < 25; ++t) {
    Eigen::VectorXd x0(2);
    x0 << g(rng), g(rng);
    std::vector<Eigen::VectorXd> us;
    for (int i = 0; i < 4; ++i) us.push_back(Eigen::VectorXd::Constant(1, g(rng)));
    const double J = stability_cost_J(c, dyn, x0, us);
    CHECK(J >= 0.0);
    const double dev = x0.squaredNorm() +
                       [&] {
                         double s = 0;
                         for (auto& u : us) s += u.squaredNorm();
                         return s;
                       }();
    if (dev > 1e-12) CHECK(J > 0.0);
  }
}

TEST_CASE("stability_cost_J: lower bound lambda_min(Q) ||x0 - x^r(0)||^2") {
  Eigen::MatrixXd Q(2, 2);
  Q << 2.0, 0.3, 0.3, 1.0;
  StabilityCost c(Q, Eigen::MatrixXd::Identity(1, 1),
                  Eigen::MatrixXd::Identity(2, 2));
  auto dyn = double_integrator();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    Eigen::VectorXd x0(2);
    x0 << g(rng), g(rng);
    std::vector<Eigen::VectorXd> us;
    for (int i = 0; i < 3; ++i) us.push_back(Eigen::VectorXd::Constant(1, g(rng)));
    CHECK(stability_cost_J(c, dyn, x0, us) >=
          c.q_min_eigenvalue() * x0.squaredNorm() - 1e-12);
  }
}

TEST_CASE("stability_cost_J: convex in the input sequence (sampled)") {
  auto c = unit_cost();
  auto dyn = double_integrator();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x0(2);
  x0 << 0.5, -0.3;
  for (int t = 0; t < 30; ++t) {
    std::vector<Eigen::VectorXd> ua, ub, umix;
    const double lam = unit(rng);
    for (int i = 0; i < 4; ++i) {
      ua.push_back(Eigen::VectorXd::Constant(1, g(rng)));
      ub.push_back(Eigen::VectorXd::Constant(1, g(rng)));
      umix.push_back(lam * ua.back() + (1.0 - lam) * ub.back());
    }
    const double Jmix = stability_cost_J(c, dyn, x0, umix);
    const double bound = lam * stability_cost_J(c, dyn, x0, ua) +
                         (1.0 - lam) * stability_cost_J(c, dyn, x0, ub);
    CHECK(Jmix <= bound + 1e-10);
  }
}

TEST_CASE("StabilityCost construction guards") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(StabilityCost(asym, Eigen::MatrixXd::Identity(1, 1),
                                Eigen::MatrixXd::Identity(2, 2)),
                  std::invalid_argument);
  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -1e-3;
  CHECK_THROWS_AS(StabilityCost(indef, Eigen::MatrixXd::Identity(1, 1),
                                Eigen::MatrixXd::Identity(2, 2)),
                  std::invalid_argument);
}
