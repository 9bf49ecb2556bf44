#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <random>

#include "mpsf/model.hpp"

using namespace mpsf;

namespace {

// Independent elementwise multiply-accumulate oracle for A x + B u.
Eigen::VectorXd mac_oracle(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) out(i) += A(i, j) * x(j);
    for (Eigen::Index j = 0; j < B.cols(); ++j) out(i) += B(i, j) * u(j);
  }
  return out;
}

LinearDynamics double_integrator(double Ts = 0.1) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1.0, Ts, 0.0, 1.0;
  B << 0.5 * Ts * Ts, Ts;
  return LinearDynamics(A, B);
}

}  // namespace

TEST_CASE("step: identity dynamics keep the state") {
  LinearDynamics dyn(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1));
  Eigen::VectorXd x(2), u(1);
  x << 1.0, 2.0;
  u << 42.0;
  CHECK(step(dyn, x, u).isApprox(x));
}

TEST_CASE("step: origin is an equilibrium") {
  auto dyn = double_integrator();
  CHECK(step(dyn, Eigen::Vector2d::Zero(), Eigen::VectorXd::Zero(1)).norm() == 0.0);
}

TEST_CASE("step: double integrator against the multiply-accumulate oracle") {
  auto dyn = double_integrator();
  Eigen::VectorXd x(2), u(1);
  x << 0.0, 1.0;
  u << 1.0;
  const Eigen::VectorXd got = step(dyn, x, u);
  CHECK(got(0) == doctest::Approx(0.105).epsilon(1e-14));
  CHECK(got(1) == doctest::Approx(1.1).epsilon(1e-14));
  CHECK((got - mac_oracle(dyn.A(), dyn.B(), x, u)).norm() == 0.0);
}

TEST_CASE("step: dimension mismatch throws") {
  auto dyn = double_integrator();
  CHECK_THROWS_AS(step(dyn, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);
}

TEST_CASE("rollout_open_loop: constant under identity dynamics") {
  LinearDynamics dyn(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 1));
  Eigen::VectorXd x0(2);
  x0 << 3.0, -1.0;
  const std::vector<Eigen::VectorXd> us(3, Eigen::VectorXd::Zero(1));
  const auto xs = rollout_open_loop(dyn, x0, us);
  REQUIRE(xs.size() == 4);
  for (const auto& x : xs) CHECK(x.isApprox(x0));
}

TEST_CASE("rollout_open_loop: zero stays zero") {
  auto dyn = double_integrator();
  const std::vector<Eigen::VectorXd> us(5, Eigen::VectorXd::Zero(1));
  for (const auto& x : rollout_open_loop(dyn, Eigen::Vector2d::Zero(), us)) {
    CHECK(x.norm() == 0.0);
  }
}

TEST_CASE("rollout_open_loop: double integrator matches the repeated step oracle") {
  auto dyn = double_integrator();
  std::vector<Eigen::VectorXd> us(2, Eigen::VectorXd::Constant(1, 1.0));
  const auto xs = rollout_open_loop(dyn, Eigen::Vector2d::Zero(), us);
  REQUIRE(xs.size() == 3);
  // Oracle: apply the multiply-accumulate step twice.
  Eigen::VectorXd x = Eigen::Vector2d::Zero();
  x = mac_oracle(dyn.A(), dyn.B(), x, us[0]);
  CHECK(xs[1].isApprox(x, 1e-15));
  CHECK(xs[1](0) == doctest::Approx(0.005));
  CHECK(xs[1](1) == doctest::Approx(0.1));
  x = mac_oracle(dyn.A(), dyn.B(), x, us[1]);
  CHECK(xs[2].isApprox(x, 1e-15));
  CHECK(xs[2](0) == doctest::Approx(0.02));
  CHECK(xs[2](1) == doctest::Approx(0.2));
}

TEST_CASE("rollout_open_loop: output length is N+1") {
  auto dyn = double_integrator();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(1, 17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<Eigen::VectorXd> us(len(rng), Eigen::VectorXd::Zero(1));
    CHECK(rollout_open_loop(dyn, Eigen::Vector2d::Zero(), us).size() ==
          us.size() + 1);
  }
}

TEST_CASE("rollout_open_loop: superposition for linear dynamics") {
  auto dyn = double_integrator();
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd xa(2), xb(2);
    xa << g(rng), g(rng);
    xb << g(rng), g(rng);
    std::vector<Eigen::VectorXd> ua, ub, usum;
    for (int i = 0; i < 6; ++i) {
      ua.push_back(Eigen::VectorXd::Constant(1, g(rng)));
      ub.push_back(Eigen::VectorXd::Constant(1, g(rng)));
      usum.push_back(ua.back() + ub.back());
    }
    const auto ra = rollout_open_loop(dyn, xa, ua);
    const auto rb = rollout_open_loop(dyn, xb, ub);
    const auto rz = rollout_open_loop(dyn, Eigen::Vector2d::Zero(),
                                      std::vector<Eigen::VectorXd>(
                                          6, Eigen::VectorXd::Zero(1)));
    const auto rsum = rollout_open_loop(dyn, xa + xb, usum);
    for (std::size_t i = 0; i < rsum.size(); ++i) {
      CHECK((ra[i] + rb[i] - rz[i] - rsum[i]).norm() < 1e-12);
    }
  }
}

TEST_CASE("reference_window: indexing") {
  const Eigen::Index n = 2, m = 1;
  std::vector<ReferencePoint> pts;
  for (int k = 0; k < 12; ++k) {
    // linearly advancing marker so indices are distinguishable
    pts.push_back({Eigen::Vector2d(static_cast<double>(k), 0.0),
                   Eigen::VectorXd::Zero(m)});
  }
  ReferenceTrajectory traj(pts, 1.05);

  SUBCASE("zero reference window") {
    auto z = ReferenceTrajectory::zero(n, m, 5);
    const auto w = z.window(1, 2);
    REQUIRE(w.size() == 3);
    for (const auto& p : w) CHECK(p.x.norm() == 0.0);
  }
  SUBCASE("full window returns the entire trajectory") {
    const auto w = traj.window(0, traj.max_index());
    CHECK(w.size() == static_cast<std::size_t>(traj.length()));
  }
  SUBCASE("interior window against direct indexing") {
    const auto w = traj.window(5, 3);
    REQUIRE(w.size() == 4);
    for (Eigen::Index i = 0; i <= 3; ++i) {
      CHECK(w[static_cast<std::size_t>(i)].x(0) ==
            doctest::Approx(static_cast<double>(5 + i)));
    }
  }
  SUBCASE("window beyond the stored range throws") {
    CHECK_THROWS_AS(traj.window(10, 3), std::out_of_range);
  }
}

TEST_CASE("validate_reference") {
  auto dyn = double_integrator();
  Eigen::VectorXd x_hi(2), u_hi(1);
  x_hi << 1.0, 1.0;
  u_hi << 1.0;
  BoxConstraints box(-x_hi, x_hi, -u_hi, u_hi);

  SUBCASE("zero reference is valid") {
    auto traj = ReferenceTrajectory::zero(2, 1, 8);
    CHECK(validate_reference(dyn, traj, box).ok());
  }

  SUBCASE("a rollout from an interior point with interior inputs is valid") {
    std::vector<ReferencePoint> pts;
    Eigen::VectorXd x = Eigen::Vector2d(0.01, 0.0);
    for (int k = 0; k < 6; ++k) {
      Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.001 * k);
      pts.push_back({x, u});
      x = step(dyn, x, u);
    }
    ReferenceTrajectory traj(pts, 1.05);
    CHECK(validate_reference(dyn, traj, box).ok());
  }

  SUBCASE("perturbed state flags dynamic inconsistency at that index") {
    auto zero = ReferenceTrajectory::zero(2, 1, 8);
    std::vector<ReferencePoint> pts;
    for (Eigen::Index k = 0; k < 8; ++k) pts.push_back(zero.at(k));
    pts[3].x(0) += 1e-3;
    ReferenceTrajectory traj(pts, 1.05);
    const auto rep = validate_reference(dyn, traj, box);
    REQUIRE_FALSE(rep.ok());
    // both transitions touching the corrupted point are inconsistent
    bool flags_three = false;
    for (const auto& d : rep.defects) {
      CHECK(d.kind == ReferenceDefect::Kind::DynamicsResidual);
      CHECK((d.index == 3 || d.index == 4));
      flags_three |= d.index == 3;
    }
    CHECK(flags_three);
  }

  SUBCASE("reference touching the bound violates tightened membership") {
    std::vector<ReferencePoint> pts(
        4, ReferencePoint{Eigen::Vector2d(1.0, 0.0), Eigen::VectorXd::Zero(1)});
    // constant state (1, 0) is dynamically consistent with u = 0
    ReferenceTrajectory traj(pts, 1.05);
    const auto rep = validate_reference(dyn, traj, box);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.defects.front().kind == ReferenceDefect::Kind::StateInterior);
  }
}

TEST_CASE("trajectory CSV round trip") {
  auto dyn = double_integrator();
  std::vector<ReferencePoint> pts;
  Eigen::VectorXd x = Eigen::Vector2d(0.0123456789012345, 0.0);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 0.01 * k - 0.015);
    pts.push_back({x, u});
    x = step(dyn, x, u);
  }
  ReferenceTrajectory traj(pts, 1.05);

  const std::string path = "test_model_traj.csv";
  save_trajectory_csv(path, traj);
  const auto loaded = load_trajectory_csv(path, 1.05);
  REQUIRE(loaded.length() == traj.length());
  for (Eigen::Index k = 0; k <= traj.max_index(); ++k) {
    CHECK((loaded.at(k).x - traj.at(k).x).norm() == 0.0);
    CHECK((loaded.at(k).u - traj.at(k).u).norm() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("constructor invariants") {
  CHECK_THROWS_AS(LinearDynamics(Eigen::MatrixXd::Zero(2, 3),
                                 Eigen::MatrixXd::Zero(2, 1)),
                  std::invalid_argument);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  CHECK_THROWS_AS(BoxConstraints(one, 2.0 * one, -one, one),
                  std::invalid_argument);  // origin outside X
  CHECK_THROWS_AS(BoxConstraints(-one, one, Eigen::VectorXd::Zero(1),
                                 Eigen::VectorXd::Zero(1)),
                  std::invalid_argument);  // empty input interior
}
