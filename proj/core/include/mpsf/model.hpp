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

#ifndef MPSF_MODEL_HPP_
#define MPSF_MODEL_HPP_

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mpsf {

/// Discrete-time linear dynamics x(k+1) = A x(k) + B u(k).
///
/// The origin is an equilibrium by linearity. Nonlinear plants enter the
/// framework only after linearization (see vehicle.hpp), so this pair is the
/// single dynamics representation used everywhere.
class LinearDynamics {
 public:
  LinearDynamics(Eigen::MatrixXd A, Eigen::MatrixXd B);

  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& B() const { return B_; }
  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index input_dim() const { return B_.cols(); }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd B_;
};

/// Axis-aligned state and input bounds. The origin must be contained in both
/// boxes and the input box must have nonempty interior.
struct BoxConstraints {
  Eigen::VectorXd x_lo;
  Eigen::VectorXd x_hi;
  Eigen::VectorXd u_lo;
  Eigen::VectorXd u_hi;

  BoxConstraints(Eigen::VectorXd x_lo_in, Eigen::VectorXd x_hi_in,
                 Eigen::VectorXd u_lo_in, Eigen::VectorXd u_hi_in);

  bool state_inside(const Eigen::VectorXd& x, double tol = 0.0) const;
  bool input_inside(const Eigen::VectorXd& u, double tol = 0.0) const;
};

/// One reference sample r(k) = (x^r(k), u^r(k)).
struct ReferencePoint {
  Eigen::VectorXd x;
  Eigen::VectorXd u;
};

/// Issue found by validate_reference: which step, which kind, how bad.
struct ReferenceDefect {
  enum class Kind { DynamicsResidual, StateInterior, InputInterior };
  Kind kind;
  Eigen::Index index;
  double magnitude;
};

struct ReferenceValidation {
  std::vector<ReferenceDefect> defects;
  bool ok() const { return defects.empty(); }
};

/// A feasible, reachable reference trajectory: a stored sequence of
/// (x^r(k), u^r(k)) pairs that is consistent with the plant dynamics and,
/// after scaling by the tightening factor sigma > 1, stays inside the
/// constraint boxes.
class ReferenceTrajectory {
 public:
  ReferenceTrajectory(std::vector<ReferencePoint> points, double tightening);

  /// All-zero reference of the given length (setpoint stabilization).
  static ReferenceTrajectory zero(Eigen::Index n, Eigen::Index m,
                                  Eigen::Index length, double tightening = 1.05);

  Eigen::Index length() const { return static_cast<Eigen::Index>(points_.size()); }
  Eigen::Index max_index() const { return length() - 1; }
  double tightening() const { return tightening_; }
  const ReferencePoint& at(Eigen::Index k) const;

  bool is_zero() const;

  /// r(k), ..., r(k+N); throws if the window leaves the stored range.
  std::vector<ReferencePoint> window(Eigen::Index k, Eigen::Index N) const;

 private:
  std::vector<ReferencePoint> points_;
  double tightening_;
};

/// x(k+1) = A x + B u.
Eigen::VectorXd step(const LinearDynamics& dyn, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u);

/// States x_0..x_N visited from x0 under the open-loop input sequence.
std::vector<Eigen::VectorXd> rollout_open_loop(
    const LinearDynamics& dyn, const Eigen::VectorXd& x0,
    const std::vector<Eigen::VectorXd>& u_seq);

/// Checks dynamic consistency (residual norm <= 1e-9) and tightened
/// constraint membership of every stored reference point.
ReferenceValidation validate_reference(const LinearDynamics& dyn,
                                       const ReferenceTrajectory& traj,
                                       const BoxConstraints& box);

/// CSV import/export, header `k,x1..xn,u1..um`, >= 12 significant digits.
void save_trajectory_csv(const std::string& path, const ReferenceTrajectory& traj);
ReferenceTrajectory load_trajectory_csv(const std::string& path,
                                        double tightening = 1.05);

}  // namespace mpsf

#endif  // MPSF_MODEL_HPP_
