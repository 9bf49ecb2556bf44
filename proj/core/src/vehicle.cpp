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

#include "mpsf/vehicle.hpp"

#include <cmath>
#include <stdexcept>

namespace mpsf {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Quintic smoothstep: s(0) = 0, s(1) = 1, zero first and second derivative
// at both ends.
double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}
}  // namespace

void SingleTrackParams::validate() const {
  if (!(mass > 0.0 && yaw_inertia > 0.0 && dist_front > 0.0 &&
        dist_rear > 0.0 && cornering_front > 0.0 && cornering_rear > 0.0)) {
    throw std::invalid_argument("SingleTrackParams: parameters must be > 0");
  }
  if (velocity == 0.0) {
    throw std::invalid_argument(
        "SingleTrackParams: zero linearization velocity (division by v)");
  }
}

void linearize_single_track(const SingleTrackParams& p, Eigen::MatrixXd& A_c,
                            Eigen::MatrixXd& B_c) {
  p.validate();
  const double m = p.mass;
  const double iz = p.yaw_inertia;
  const double lf = p.dist_front;
  const double lr = p.dist_rear;
  const double cf = p.cornering_front;
  const double cr = p.cornering_rear;
  const double v0 = p.velocity;

  A_c = Eigen::MatrixXd::Zero(6, 6);
  B_c = Eigen::MatrixXd::Zero(6, 2);

  A_c(0, 3) = 1.0;        // z1' = v
  A_c(1, 2) = v0;         // z2' = v0 (psi + beta)
  A_c(1, 4) = v0;
  A_c(2, 5) = 1.0;        // psi' = psi_dot
  // v' = a only
  A_c(4, 4) = -(cf + cr) / (m * v0);
  A_c(4, 5) = (cr * lr - cf * lf) / (m * v0 * v0) - 1.0;
  A_c(5, 4) = (cr * lr - cf * lf) / iz;
  A_c(5, 5) = -(cf * lf * lf + cr * lr * lr) / (iz * v0);

  B_c(3, 1) = 1.0;            // acceleration enters the v row only
  B_c(4, 0) = cf / (m * v0);  // steering
  B_c(5, 0) = cf * lf / iz;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) {
    throw std::invalid_argument("matrix_exponential: matrix must be square");
  }
  const Eigen::Index n = M.rows();
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd A = M / std::pow(2.0, squarings);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd sum = term;
  for (int k = 1; k <= 40; ++k) {
    term = (term * A) / static_cast<double>(k);
    sum += term;
    if (term.cwiseAbs().maxCoeff() <
        1e-18 * std::max(1.0, sum.cwiseAbs().maxCoeff())) {
      break;
    }
  }
  for (int s = 0; s < squarings; ++s) sum = sum * sum;
  return sum;
}

LinearDynamics discretize_zoh(const Eigen::MatrixXd& A_c,
                              const Eigen::MatrixXd& B_c, double Ts) {
  if (!(Ts > 0.0)) throw std::invalid_argument("discretize_zoh: Ts must be > 0");
  const Eigen::Index n = A_c.rows();
  const Eigen::Index m = B_c.cols();
  if (A_c.cols() != n || B_c.rows() != n) {
    throw std::invalid_argument("discretize_zoh: dimension mismatch");
  }
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = A_c * Ts;
  aug.topRightCorner(n, m) = B_c * Ts;
  const Eigen::MatrixXd E = matrix_exponential(aug);
  return LinearDynamics(E.topLeftCorner(n, n), E.topRightCorner(n, m));
}

ReferenceTrajectory lane_change_reference(const LinearDynamics& dyn,
                                          const Eigen::MatrixXd& K, double Ts,
                                          Eigen::Index length,
                                          double start_offset, double amplitude,
                                          double tightening) {
  const Eigen::Index n = dyn.state_dim();
  if (n != 6) {
    throw std::invalid_argument("lane_change_reference: expects the 6-state model");
  }
  // Lateral target: hold, quintic up, hold, quintic back, hold.
  const double t_hold0 = 0.6, t_trans = 1.6, t_hold1 = 0.6;
  auto target_lateral = [&](double t) {
    if (t < t_hold0) return start_offset;
    t -= t_hold0;
    if (t < t_trans) return start_offset + amplitude * smoothstep5(t / t_trans);
    t -= t_trans;
    if (t < t_hold1) return start_offset + amplitude;
    t -= t_hold1;
    if (t < t_trans) {
      return start_offset + amplitude * (1.0 - smoothstep5(t / t_trans));
    }
    return start_offset;
  };

  std::vector<ReferencePoint> pts;
  pts.reserve(static_cast<std::size_t>(length));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x(1) = start_offset;
  for (Eigen::Index k = 0; k < length; ++k) {
    Eigen::VectorXd target = Eigen::VectorXd::Zero(n);
    target(1) = target_lateral(static_cast<double>(k) * Ts);
    const Eigen::VectorXd u = K * (x - target);
    pts.push_back({x, u});
    x = step(dyn, x, u);
  }
  return ReferenceTrajectory(std::move(pts), tightening);
}

VehicleScenario build_scenario() {
  SingleTrackParams params;
  const double Ts = 0.02;

  Eigen::MatrixXd A_c, B_c;
  linearize_single_track(params, A_c, B_c);
  LinearDynamics dyn = discretize_zoh(A_c, B_c, Ts);

  Eigen::VectorXd x_hi(6);
  x_hi << 1.0, 1.0, 30.0 * kPi / 180.0, 10.0 / 3.6, 5.0 * kPi / 180.0,
      35.0 * kPi / 180.0;
  Eigen::VectorXd u_lo(2), u_hi(2);
  u_lo << -35.0 * kPi / 180.0, -7.0;
  u_hi << 35.0 * kPi / 180.0, 2.0;
  BoxConstraints box(-x_hi, x_hi, u_lo, u_hi);

  const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(6, 6);
  const Eigen::MatrixXd R = Eigen::MatrixXd::Identity(2, 2);
  TerminalIngredients ti = solve_riccati(dyn, Q, R);
  StabilityCost cost(Q, R, ti.P);

  const double sigma = 1.05;
  const Eigen::Index T = 500;
  const Eigen::Index N = 30;
  ReferenceTrajectory reference = lane_change_reference(
      dyn, ti.K, Ts, T + N + 2, /*start_offset=*/0.0, /*amplitude=*/0.9, sigma);

  // Terminal set admissible around every reference point: shrink each box
  // bound by the worst reference excursion before sizing the level set.
  Eigen::VectorXd x_hi_eff = box.x_hi;
  Eigen::VectorXd x_lo_eff = box.x_lo;
  Eigen::VectorXd u_hi_eff = box.u_hi;
  Eigen::VectorXd u_lo_eff = box.u_lo;
  for (Eigen::Index k = 0; k <= reference.max_index(); ++k) {
    const auto& r = reference.at(k);
    x_hi_eff = x_hi_eff.cwiseMin(box.x_hi - r.x);
    x_lo_eff = x_lo_eff.cwiseMax(box.x_lo - r.x);
    u_hi_eff = u_hi_eff.cwiseMin(box.u_hi - r.u);
    u_lo_eff = u_lo_eff.cwiseMax(box.u_lo - r.u);
  }
  const BoxConstraints envelope(x_lo_eff, x_hi_eff, u_lo_eff, u_hi_eff);
  ti.tau = terminal_set_level(ti, envelope, 0.9);

  FilterConfig cfg;
  cfg.N = N;
  cfg.mode = FilterMode::TrackingConvergence;
  cfg.zeta_min = 0.1;
  cfg.rho = 1.0;
  cfg.gamma = 1.0;  // J_B(0) = V_mpc(x(0))
  cfg.zeta_policy.kind = ZetaPolicy::Kind::Adaptive;
  cfg.zeta_policy.lambda_weight = 1e-4;

  VehicleScenario sc{params,
                     Ts,
                     std::move(dyn),
                     std::move(box),
                     std::move(cost),
                     std::move(ti),
                     cfg,
                     std::move(reference),
                     DesiredInputPolicy::reference_feedforward(0.0),
                     Eigen::VectorXd::Zero(6),
                     RolloutOptions{T, 0x2f5a11u},
                     /*driver_onset=*/250};
  sc.x0(1) = -0.5;

  // Driver: competent but sloppy reference tracking with steering noise for
  // the first 5 s, then a destabilizing phase (reversed feedback plus a
  // constant steering pull).
  Eigen::MatrixXd driver_gain = 0.5 * sc.ti.K;
  Eigen::MatrixXd bad_gain = -0.8 * sc.ti.K;
  Eigen::VectorXd bad_bias(2);
  bad_bias << 0.3, 0.0;
  sc.policy = DesiredInputPolicy::composite(
      {{0, DesiredInputPolicy::tracking_feedback(driver_gain, 3e-4)},
       {sc.driver_onset,
        DesiredInputPolicy::destabilizing_feedback(bad_gain, bad_bias)}});
  return sc;
}

}  // namespace mpsf
