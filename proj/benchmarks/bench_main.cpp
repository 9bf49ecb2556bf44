/*
 Copyright 2026 The mpsf Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "mpsf/filter.hpp"
#include "mpsf/vehicle.hpp"

namespace {

using namespace mpsf;

LinearDynamics double_integrator(double Ts = 0.3) {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 1.0, Ts, 0.0, 1.0;
  B << 0.5 * Ts * Ts, Ts;
  return LinearDynamics(A, B);
}

void BM_riccati_vehicle(benchmark::State& state) {
  SingleTrackParams p;
  Eigen::MatrixXd A_c, B_c;
  linearize_single_track(p, A_c, B_c);
  const auto dyn = discretize_zoh(A_c, B_c, 0.02);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(6, 6);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_riccati(dyn, Q, R));
  }
}
BENCHMARK(BM_riccati_vehicle);

void BM_zoh_discretization(benchmark::State& state) {
  SingleTrackParams p;
  Eigen::MatrixXd A_c, B_c;
  linearize_single_track(p, A_c, B_c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(discretize_zoh(A_c, B_c, 0.02));
  }
}
BENCHMARK(BM_zoh_discretization);

void BM_qcqp_disk_projection(benchmark::State& state) {
  QcqpProblem p = QcqpProblem::make(2);
  p.H = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  p.g << -4.0, 0.0;
  p.quads.push_back({2.0 * Eigen::MatrixXd::Identity(2, 2),
                     Eigen::VectorXd::Zero(2), -1.0});
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(p));
  }
}
BENCHMARK(BM_qcqp_disk_projection);

void BM_filter_step_double_integrator(benchmark::State& state) {
  auto dyn = double_integrator();
  Eigen::VectorXd xb = Eigen::VectorXd::Constant(2, 5.0);
  Eigen::VectorXd ub = Eigen::VectorXd::Constant(1, 3.0);
  BoxConstraints box(-xb, xb, -ub, ub);
  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  TerminalIngredients ti = solve_riccati(dyn, Q, R);
  ti.tau = terminal_set_level(ti, box, 0.9);
  StabilityCost cost(Q, R, ti.P);
  FilterConfig cfg;
  cfg.N = 10;
  cfg.mode = FilterMode::Convergence;
  cfg.zeta_min = 0.1;
  cfg.gamma = 5.0;
  cfg.zeta_policy.fixed_zeta = 0.5;
  Eigen::MatrixXd gain(1, 2);
  gain << 0.8, 1.2;

  for (auto _ : state) {
    state.PauseTiming();
    FilterEngine eng(cfg, dyn, cost, ti, box);
    Eigen::VectorXd x = Eigen::Vector2d(2.0, 0.0);
    state.ResumeTiming();
    for (int k = 0; k < 10; ++k) {
      const auto res = eng.step(x, gain * x);
      x = step(dyn, x, res.u_applied);
      benchmark::DoNotOptimize(res.V);
    }
  }
}
BENCHMARK(BM_filter_step_double_integrator)->Unit(benchmark::kMillisecond);

void BM_filter_step_vehicle(benchmark::State& state) {
  const auto sc = build_scenario();
  Eigen::MatrixXd gain = 0.5 * sc.ti.K;
  for (auto _ : state) {
    state.PauseTiming();
    FilterEngine eng(sc.cfg, sc.dyn, sc.cost, sc.ti, sc.box, sc.reference);
    Eigen::VectorXd x = sc.x0;
    std::mt19937_64 rng(1);
    state.ResumeTiming();
    for (int k = 0; k < 10; ++k) {
      const auto r = sc.reference.at(k);
      const Eigen::VectorXd u_des = r.u + gain * (x - r.x);
      const auto res = eng.step(x, u_des);
      x = step(sc.dyn, x, res.u_applied);
      benchmark::DoNotOptimize(res.V);
    }
  }
}
BENCHMARK(BM_filter_step_vehicle)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
