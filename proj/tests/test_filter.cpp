#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "mpsf/filter.hpp"

using namespace mpsf;

namespace {

LinearDynamics double_integrator(double Ts = 0.1) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1.0, Ts, 0.0, 1.0;
  B << 0.5 * Ts * Ts, Ts;
  return LinearDynamics(A, B);
}

struct Setup {
  LinearDynamics dyn;
  BoxConstraints box;
  StabilityCost cost;
  TerminalIngredients ti;
  FilterConfig cfg;
};

Setup di_setup(FilterMode mode, double gamma = 5.0,
               ZetaPolicy::Kind zeta_kind = ZetaPolicy::Kind::Fixed) {
  LinearDynamics dyn = double_integrator();
  Eigen::VectorXd xb = Eigen::VectorXd::Constant(2, 5.0);
  Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, 2.0);
  BoxConstraints box(-xb, xb, -ub, ub);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  TerminalIngredients ti = solve_riccati(dyn, Q, R);
  ti.tau = terminal_set_level(ti, box, 0.9);
  StabilityCost cost(Q, R, ti.P);
  FilterConfig cfg;
  cfg.N = 10;
  cfg.mode = mode;
  cfg.zeta_min = 0.1;
  cfg.rho = 1.0;
  cfg.gamma = gamma;
  cfg.zeta_policy.kind = zeta_kind;
  cfg.zeta_policy.fixed_zeta = 0.1;
  cfg.zeta_policy.lambda_weight = 1e-5;
  return Setup{std::move(dyn), std::move(box), std::move(cost), std::move(ti), cfg};
}

// Scalar plant small enough for exhaustive grid oracles.
Setup scalar_setup(FilterMode mode, Eigen::Index N = 2) {
  LinearDynamics dyn(Eigen::MatrixXd::Constant(1, 1, 1.1),
                     Eigen::MatrixXd::Ones(1, 1));
  Eigen::VectorXd xb = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, 1.5);
  BoxConstraints box(-xb, xb, -ub, ub);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  TerminalIngredients ti = solve_riccati(dyn, Q, R);
  ti.tau = terminal_set_level(ti, box, 0.9);
  StabilityCost cost(Q, R, ti.P);
  FilterConfig cfg;
  cfg.N = N;
  cfg.mode = mode;
  cfg.zeta_min = 0.1;
  cfg.rho = 1.0;
  cfg.gamma = 2.0;
  cfg.zeta_policy.kind = ZetaPolicy::Kind::Fixed;
  cfg.zeta_policy.fixed_zeta = 0.1;
  return Setup{std::move(dyn), std::move(box), std::move(cost), std::move(ti), cfg};
}

}  // namespace

TEST_CASE("init_bound") {
  FilterConfig cfg;
  cfg.gamma = 1.0;
  CHECK(init_bound(cfg, 3.5) == doctest::Approx(3.5));
  CHECK(init_bound(cfg, 0.0) == 0.0);  // on-reference start forces J = 0
  cfg.gamma = 2.0;
  CHECK(init_bound(cfg, 3.5) == doctest::Approx(7.0));
}

TEST_CASE("update_bound_convergence") {
  FilterConfig cfg;
  cfg.zeta_min = 0.1;
  cfg.rho = 1.0;
  CHECK(update_bound_convergence(cfg, 4.0, 0.0, 0.5) == doctest::Approx(4.0));
  CHECK(update_bound_convergence(cfg, 10.0, 2.0, 0.5) == doctest::Approx(9.0));
  CHECK(update_bound_convergence(cfg, 10.0, 2.0, 1.0) == doctest::Approx(8.0));
  CHECK_THROWS_AS(update_bound_convergence(cfg, 1.0, 1.0, 0.05),
                  std::invalid_argument);
}

TEST_CASE("candidate_shift") {
  auto s = di_setup(FilterMode::Convergence);

  SUBCASE("N = 1 collapses to the terminal controller") {
    Eigen::VectorXd xN(2);
    xN << 0.2, -0.1;
    const auto cand = candidate_shift({Eigen::VectorXd::Constant(1, 0.5)}, xN,
                                      s.ti, std::nullopt);
    REQUIRE(cand.size() == 1);
    CHECK(cand[0].isApprox(s.ti.K * xN));
  }

  SUBCASE("on-reference solution shifts to the reference inputs") {
    // reference: the origin with zero inputs; previous solution all zeros
    std::vector<Eigen::VectorXd> prev(4, Eigen::VectorXd::Zero(1));
    const auto cand =
        candidate_shift(prev, Eigen::Vector2d::Zero(), s.ti, std::nullopt);
    for (const auto& u : cand) CHECK(u.norm() == 0.0);
  }

  SUBCASE("shift provides the rho = 1 decrease (N = 3)") {
    FilterConfig cfg = s.cfg;
    cfg.N = 3;
    cfg.gamma = 4.0;
    FilterEngine eng(cfg, s.dyn, s.cost, s.ti, s.box);
    Eigen::VectorXd x(2);
    x << 1.0, 0.5;
    const auto res = eng.step(x, Eigen::VectorXd::Constant(1, -2.0));
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    const auto cand = candidate_shift(eng.state().prev_solution,
                                      eng.state().prev_terminal_state, s.ti,
                                      std::nullopt);
    const Eigen::VectorXd x_next = step(s.dyn, x, res.u_applied);
    const double j_cand = stability_cost_J(s.cost, s.dyn, x_next, cand);
    CHECK(j_cand <= res.V - res.stage_cost_applied + 1e-7);
  }

  SUBCASE("missing previous solution throws") {
    CHECK_THROWS_AS(
        candidate_shift({}, Eigen::Vector2d::Zero(), s.ti, std::nullopt),
        std::invalid_argument);
  }
}

TEST_CASE("assemble_problem shapes") {
  auto s = di_setup(FilterMode::SafetyOnly);
  const auto pred = PredictionMatrices::build(s.dyn, s.cfg.N);
  const CostCondenser cond(pred, s.cost);
  Eigen::VectorXd x(2);
  x << 0.5, 0.0;
  const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, 0.3);

  SUBCASE("safety-only: the terminal set is the only quadratic constraint") {
    const auto ap =
        assemble_problem(s.cfg, cond, s.ti, s.box, x, u_des, nullptr,
                         /*include_stability=*/false, true, 0.0, 0.0, 0.0);
    CHECK(ap.qcqp.quads.size() == 1);
    CHECK(ap.terminal_quad_index == 0);
    CHECK(ap.stability_quad_index == -1);
    CHECK_FALSE(ap.has_zeta);
    CHECK(ap.qcqp.dim == s.cfg.N * 1);
  }

  SUBCASE("adaptive mode appends the zeta variable") {
    FilterConfig cfg = s.cfg;
    cfg.mode = FilterMode::Convergence;
    cfg.zeta_policy.kind = ZetaPolicy::Kind::Adaptive;
    const auto ap = assemble_problem(cfg, cond, s.ti, s.box, x, u_des, nullptr,
                                     true, false, 0.0, 3.0, 0.5);
    CHECK(ap.has_zeta);
    CHECK(ap.qcqp.dim == cfg.N * 1 + 1);
    CHECK(ap.qcqp.lo(ap.qcqp.dim - 1) == doctest::Approx(cfg.zeta_min));
    CHECK(ap.qcqp.hi(ap.qcqp.dim - 1) == doctest::Approx(cfg.rho));
    CHECK(ap.qcqp.quads.size() == 2);
  }

  SUBCASE("assembled constraint values match direct evaluation") {
    FilterConfig cfg = s.cfg;
    cfg.mode = FilterMode::Convergence;
    const double j_bound = 7.25;
    const auto ap = assemble_problem(cfg, cond, s.ti, s.box, x, u_des, nullptr,
                                     true, true, j_bound, 0.0, 0.0);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 0.4);
    for (int t = 0; t < 10; ++t) {
      std::vector<Eigen::VectorXd> us;
      for (Eigen::Index i = 0; i < cfg.N; ++i) {
        us.push_back(Eigen::VectorXd::Constant(1, g(rng)));
      }
      const Eigen::VectorXd z = stack_inputs(us);

      // stability row evaluates J - J_B via the rollout oracle
      const auto& sq = ap.qcqp.quads[static_cast<std::size_t>(
          ap.stability_quad_index)];
      const double row_val = 0.5 * z.dot(sq.M * z) + sq.q.dot(z) + sq.s;
      const double j_oracle = stability_cost_J(s.cost, s.dyn, x, us);
      CHECK(row_val == doctest::Approx(j_oracle - j_bound).epsilon(1e-10));

      // terminal row evaluates V_f(x_N) - tau
      const auto& tq = ap.qcqp.quads[static_cast<std::size_t>(
          ap.terminal_quad_index)];
      const double term_val = 0.5 * z.dot(tq.M * z) + tq.q.dot(z) + tq.s;
      const Eigen::VectorXd xN = rollout_open_loop(s.dyn, x, us).back();
      CHECK(term_val ==
            doctest::Approx(xN.dot(s.ti.P * xN) - s.ti.tau).epsilon(1e-10));

      // objective is the matching cost
      CHECK(ap.qcqp.objective_value(z) ==
            doctest::Approx(matching_objective_G(u_des, us[0])).epsilon(1e-12));
    }
  }
}

TEST_CASE("solve_corresponding_mpc") {
  SUBCASE("on-reference state has zero value") {
    auto s = di_setup(FilterMode::Convergence);
    const auto mpc = solve_corresponding_mpc(s.cfg, s.dyn, s.cost, s.ti, s.box,
                                             Eigen::Vector2d::Zero(), nullptr);
    REQUIRE(mpc.feasible);
    CHECK(mpc.value <= 1e-9);
    for (const auto& u : mpc.minimizer) CHECK(u.norm() < 1e-5);
  }

  SUBCASE("inside the terminal set the value is at most V_f") {
    auto s = di_setup(FilterMode::Convergence);
    Eigen::LLT<Eigen::MatrixXd> llt(s.ti.P);
    Eigen::VectorXd x = Eigen::Vector2d(0.7, 0.7);
    x *= std::sqrt(s.ti.tau / x.dot(s.ti.P * x)) * 0.8;
    const auto mpc =
        solve_corresponding_mpc(s.cfg, s.dyn, s.cost, s.ti, s.box, x, nullptr);
    REQUIRE(mpc.feasible);
    CHECK(mpc.value <= s.cost.terminal_cost(x) + 1e-8);
  }

  SUBCASE("scalar plant against an exhaustive input grid") {
    auto s = scalar_setup(FilterMode::Convergence, 2);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.8);
    const auto mpc =
        solve_corresponding_mpc(s.cfg, s.dyn, s.cost, s.ti, s.box, x, nullptr);
    REQUIRE(mpc.feasible);

    double best = std::numeric_limits<double>::infinity();
    const int G = 900;
    for (int i = 0; i <= G; ++i) {
      for (int j = 0; j <= G; ++j) {
        std::vector<Eigen::VectorXd> us{
            Eigen::VectorXd::Constant(1, -1.5 + 3.0 * i / G),
            Eigen::VectorXd::Constant(1, -1.5 + 3.0 * j / G)};
        const auto xs = rollout_open_loop(s.dyn, x, us);
        if (std::abs(xs[1](0)) > 2.0) continue;
        if (xs[2](0) * s.ti.P(0, 0) * xs[2](0) > s.ti.tau) continue;
        best = std::min(best, stability_cost_J(s.cost, s.dyn, x, us));
      }
    }
    CHECK(mpc.value == doctest::Approx(best).epsilon(1e-3));
  }

  SUBCASE("state outside X is infeasible") {
    auto s = di_setup(FilterMode::Convergence);
    const auto mpc = solve_corresponding_mpc(
        s.cfg, s.dyn, s.cost, s.ti, s.box, Eigen::Vector2d(9.0, 0.0), nullptr);
    CHECK_FALSE(mpc.feasible);
  }
}

TEST_CASE("stability bound below the MPC value is infeasible with certificate") {
  auto s = scalar_setup(FilterMode::Convergence, 2);
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.8);
  const auto mpc =
      solve_corresponding_mpc(s.cfg, s.dyn, s.cost, s.ti, s.box, x, nullptr);
  REQUIRE(mpc.feasible);

  const auto pred = PredictionMatrices::build(s.dyn, s.cfg.N);
  const CostCondenser cond(pred, s.cost);
  const double too_low = 0.5 * mpc.value;
  const auto ap = assemble_problem(s.cfg, cond, s.ti, s.box, x,
                                   Eigen::VectorXd::Zero(1), nullptr, true,
                                   true, too_low, 0.0, 0.0);
  const auto feas = feasibility_phase(ap.qcqp);
  CHECK_FALSE(feas.feasible);
  CHECK(feas.max_violation > 1e-4);

  // grid confirms no feasible point
  double grid_min_violation = std::numeric_limits<double>::infinity();
  const int G = 600;
  for (int i = 0; i <= G; ++i) {
    for (int j = 0; j <= G; ++j) {
      Eigen::VectorXd z(2);
      z << -1.5 + 3.0 * i / G, -1.5 + 3.0 * j / G;
      grid_min_violation = std::min(grid_min_violation, ap.qcqp.max_violation(z));
    }
  }
  CHECK(grid_min_violation > 0.0);
}

TEST_CASE("filter_step basics") {
  SUBCASE("on-reference desired input is certified (gamma = 1 start)") {
    auto s = di_setup(FilterMode::Convergence, /*gamma=*/1.0);
    FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
    const auto res = eng.step(Eigen::Vector2d::Zero(), Eigen::VectorXd::Zero(1));
    CHECK(res.certified);
    CHECK(res.u_applied.norm() < 1e-8);
    CHECK(res.V <= 1e-9);
    CHECK(res.solver_status == SolveStatus::Optimal);
  }

  SUBCASE("on-reference certified also at later steps") {
    auto s = di_setup(FilterMode::Convergence, /*gamma=*/2.0);
    FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
    Eigen::VectorXd x = Eigen::Vector2d::Zero();
    for (int k = 0; k < 4; ++k) {
      const auto res = eng.step(x, Eigen::VectorXd::Zero(1));
      CHECK(res.certified);
      CHECK(res.V <= 1e-9);
      x = step(s.dyn, x, res.u_applied);
    }
  }

  SUBCASE("desired input far outside U is clipped") {
    auto s = di_setup(FilterMode::SafetyOnly);
    FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
    const auto res =
        eng.step(Eigen::Vector2d(0.5, 0.0), Eigen::VectorXd::Constant(1, 25.0));
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    CHECK_FALSE(res.certified);
    CHECK(res.matching_error > 1.0);
    CHECK(res.u_applied(0) <= s.box.u_hi(0) + 1e-9);
    CHECK(res.u_applied(0) == doctest::Approx(s.box.u_hi(0)).epsilon(1e-4));
  }

  SUBCASE("initial state outside X raises initial infeasibility") {
    auto s = di_setup(FilterMode::Convergence);
    FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
    CHECK_THROWS_AS(eng.step(Eigen::Vector2d(9.0, 0.0), Eigen::VectorXd::Zero(1)),
                    InitialInfeasibilityError);
  }

  SUBCASE("scalar plant matches an exhaustive grid of the same program") {
    auto s = scalar_setup(FilterMode::Convergence, 2);
    FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.8);
    const Eigen::VectorXd u_des = Eigen::VectorXd::Constant(1, 1.2);
    const auto res = eng.step(x, u_des);
    REQUIRE(res.solver_status == SolveStatus::Optimal);

    const auto pred = PredictionMatrices::build(s.dyn, s.cfg.N);
    const CostCondenser cond(pred, s.cost);
    const auto ap = assemble_problem(s.cfg, cond, s.ti, s.box, x, u_des,
                                     nullptr, true, true, res.J_B_used, 0.0, 0.0);
    double best = std::numeric_limits<double>::infinity();
    double best_u0 = 0.0;
    const int G = 1500;
    for (int i = 0; i <= G; ++i) {
      for (int j = 0; j <= G; ++j) {
        Eigen::VectorXd z(2);
        z << -1.5 + 3.0 * i / G, -1.5 + 3.0 * j / G;
        if (ap.qcqp.max_violation(z) > 1e-9) continue;
        const double obj = ap.qcqp.objective_value(z);
        if (obj < best) {
          best = obj;
          best_u0 = z(0);
        }
      }
    }
    CHECK(res.u_applied(0) == doctest::Approx(best_u0).epsilon(1e-3));
  }
}

TEST_CASE("passthrough optimality in safety-only mode") {
  auto s = di_setup(FilterMode::SafetyOnly);
  FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(-0.9, 0.9);
  Eigen::VectorXd x = Eigen::Vector2d(0.4, -0.2);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd u_des =
        Eigen::VectorXd::Constant(1, unif(rng) * s.box.u_hi(0));
    const auto res = eng.step(x, u_des);
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    CHECK(res.matching_error <= 1e-6);  // interior desired inputs pass through
    x = step(s.dyn, x, res.u_applied);
  }
}

TEST_CASE("convergence run: recursive feasibility, decrease, sandwich") {
  auto s = di_setup(FilterMode::Convergence, /*gamma=*/5.0);
  s.cfg.zeta_policy.fixed_zeta = 0.5;  // drain V at half the stage cost
  FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
  Eigen::VectorXd x = Eigen::Vector2d(2.0, 0.0);
  Eigen::MatrixXd bad_gain(1, 2);
  bad_gain << 0.8, 1.2;  // positive feedback

  double v_prev = 0.0, ell_prev = 0.0, v0 = 0.0;
  for (int k = 0; k < 120; ++k) {
    const Eigen::VectorXd u_des = bad_gain * x;
    const double jb_before = eng.state().J_B;
    const auto res = eng.step(x, u_des);
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    if (k == 0) v0 = res.V;
    if (k > 0) {
      CHECK(res.J_B_used == doctest::Approx(jb_before));
      // Lyapunov decrease
      CHECK(res.V <= v_prev - s.cfg.zeta_min * ell_prev + 1e-6);
      // V within the active bound
      CHECK(res.V <= res.J_B_used + 1e-6);
    }
    // sandwich: candidate at k+1 fits under J_B(k+1) <= V - zeta_min*ell
    const auto cand = candidate_shift(eng.state().prev_solution,
                                      eng.state().prev_terminal_state, s.ti,
                                      std::nullopt);
    const Eigen::VectorXd x_next = step(s.dyn, x, res.u_applied);
    const double j_cand = stability_cost_J(s.cost, s.dyn, x_next, cand);
    CHECK(j_cand <= eng.state().J_B + 1e-6);
    CHECK(eng.state().J_B <=
          res.V - s.cfg.zeta_min * res.stage_cost_applied + 1e-6);

    v_prev = res.V;
    ell_prev = res.stage_cost_applied;
    x = x_next;
  }
  // heading toward the origin despite the bad driver
  CHECK(v_prev < 0.2 * v0);
  CHECK(x.norm() < 1.0);
}

TEST_CASE("uniform warm-start mode: bound witnesses and no MPC after k = 0") {
  auto s = di_setup(FilterMode::UniformWarmStart);
  FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
  Eigen::VectorXd x = Eigen::Vector2d(2.0, 0.0);
  Eigen::MatrixXd bad_gain(1, 2);
  bad_gain << 0.6, 1.0;

  for (int k = 0; k < 40; ++k) {
    const auto res = eng.step(x, bad_gain * x);
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    // the stored warm start witnesses the bound: J_B = J(x(k+1), ws)
    const Eigen::VectorXd x_next = step(s.dyn, x, res.u_applied);
    const double j_ws =
        stability_cost_J(s.cost, s.dyn, x_next, eng.state().warm_start);
    CHECK(eng.state().J_B == doctest::Approx(j_ws).epsilon(1e-10));
    // admissibility: inside the terminal set the bound is at most V_f
    if (x_next.dot(s.ti.P * x_next) <= s.ti.tau) {
      CHECK(eng.state().J_B <= s.cost.terminal_cost(x_next) + 1e-7);
    }
    x = x_next;
  }
  CHECK(eng.mpc_solve_count() == 1);
}

TEST_CASE("adaptive zeta honors the box and pins under pressure") {
  auto s = di_setup(FilterMode::Convergence, 5.0, ZetaPolicy::Kind::Adaptive);
  FilterEngine eng(s.cfg, s.dyn, s.cost, s.ti, s.box);
  Eigen::VectorXd x = Eigen::Vector2d(2.0, 0.0);
  Eigen::MatrixXd bad_gain(1, 2);
  bad_gain << 0.8, 1.2;
  for (int k = 0; k < 30; ++k) {
    const auto res = eng.step(x, bad_gain * x);
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    CHECK(res.zeta >= s.cfg.zeta_min - 1e-9);
    CHECK(res.zeta <= s.cfg.rho + 1e-9);
    if (k > 0) {
      CHECK(res.V <= res.J_B_used + 1e-6);
    }
    x = step(s.dyn, x, res.u_applied);
  }
}

TEST_CASE("degenerate terminal mode pins the endpoint") {
  auto s = di_setup(FilterMode::Convergence, 3.0);
  FilterConfig cfg = s.cfg;
  cfg.degenerate_terminal = true;
  cfg.N = 12;
  FilterEngine eng(cfg, s.dyn, s.cost, s.ti, s.box);
  Eigen::VectorXd x = Eigen::Vector2d(0.5, 0.0);
  for (int k = 0; k < 10; ++k) {
    const auto res = eng.step(x, Eigen::VectorXd::Constant(1, 0.5));
    REQUIRE(res.solver_status == SolveStatus::Optimal);
    // the predicted endpoint must hit the reference exactly
    const auto xs = rollout_open_loop(s.dyn, x, eng.state().prev_solution);
    CHECK(xs.back().norm() <= 1e-6);
    x = step(s.dyn, x, res.u_applied);
  }
}

TEST_CASE("filter config validation") {
  FilterConfig cfg;
  cfg.zeta_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.zeta_min = 0.5;
  cfg.rho = 0.4;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rho = 1.0;
  cfg.gamma = 0.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
