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

#ifndef MPSF_VEHICLE_HPP_
#define MPSF_VEHICLE_HPP_

#include <Eigen/Dense>

#include "mpsf/filter.hpp"
#include "mpsf/model.hpp"
#include "mpsf/sim.hpp"
#include "mpsf/terminal.hpp"

namespace mpsf {

/// Linear-tire single-track model. States are deviations from the
/// linearization point (straight driving at `velocity`):
///   x = (z1, z2, psi, v, beta, psi_dot)   longitudinal/lateral position,
///       heading, velocity, side slip, yaw rate
///   u = (delta, a)                        steering angle, acceleration
/// with continuous dynamics
///   z1'   = v cos(psi + beta)
///   z2'   = v sin(psi + beta)
///   psi'  = psi_dot
///   v'    = a
///   beta' = (F_yf cos(delta) + F_yr) / (m v) - psi_dot
///   psi_dot' = (l_f F_yf cos(delta) - l_r F_yr) / I_z
/// where F_yf = C_f (delta - beta - l_f psi_dot / v) and
/// F_yr = C_r (-beta + l_r psi_dot / v).
struct SingleTrackParams {
  double mass = 1500.0;            // kg
  double yaw_inertia = 2250.0;     // kg m^2
  double dist_front = 1.1;         // m, center of gravity to front axle
  double dist_rear = 1.6;          // m, center of gravity to rear axle
  double cornering_front = 55e3;   // N/rad
  double cornering_rear = 60e3;    // N/rad
  double velocity = 10.0;          // m/s, linearization velocity

  void validate() const;
};

/// Jacobian of the single-track dynamics at the linearization point
/// (v = velocity, all other states and inputs zero).
void linearize_single_track(const SingleTrackParams& p, Eigen::MatrixXd& A_c,
                            Eigen::MatrixXd& B_c);

/// Exact zero-order-hold discretization via the matrix exponential of the
/// augmented pair (scaling-and-squaring, series to machine precision).
LinearDynamics discretize_zoh(const Eigen::MatrixXd& A_c,
                              const Eigen::MatrixXd& B_c, double Ts);

/// Dense matrix exponential (scaling and squaring).
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M);

/// Double-lane-change reference: the lateral target holds, transitions with
/// a quintic profile, holds, transitions back. The stored trajectory is the
/// closed-loop rollout of the discrete model under the gain K tracking that
/// target, so it is dynamically consistent to machine precision.
ReferenceTrajectory lane_change_reference(const LinearDynamics& dyn,
                                          const Eigen::MatrixXd& K, double Ts,
                                          Eigen::Index length,
                                          double start_offset, double amplitude,
                                          double tightening);

/// Everything needed to run the driver-assistance scenario.
struct VehicleScenario {
  SingleTrackParams params;
  double Ts = 0.02;
  LinearDynamics dyn;
  BoxConstraints box;
  StabilityCost cost;
  TerminalIngredients ti;
  FilterConfig cfg;
  ReferenceTrajectory reference;
  DesiredInputPolicy policy;
  Eigen::VectorXd x0;
  RolloutOptions run;
  Eigen::Index driver_onset = 250;  // step at which the driver destabilizes
};

/// Lane-change scenario: Ts = 0.02 s, N = 30, Q = I6, R = I2,
/// zeta_min = 0.1 with adaptive zeta, x(0) = (0, -0.5, 0, 0, 0, 0), box
/// bounds (1, 1, 30pi/180, 10/3.6, 5pi/180, 35pi/180) on states and
/// ([-35pi/180, -7], [35pi/180, 2]) on inputs, reference tightening 1.05.
/// The driver tracks the reference with noise for the first 5 s, then turns
/// destabilizing.
VehicleScenario build_scenario();

}  // namespace mpsf

#endif  // MPSF_VEHICLE_HPP_
