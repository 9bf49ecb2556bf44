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

#ifndef MPSF_COSTS_HPP_
#define MPSF_COSTS_HPP_

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "mpsf/model.hpp"

namespace mpsf {

/// Quadratic stage and terminal weights. Setpoint and tracking costs share
/// the same weights:
///   stage    ||x - x^r||_Q^2 + ||u - u^r||_R^2
///   terminal ||x - x^r||_P^2
/// with r = 0 recovering the setpoint forms. All three matrices must be
/// symmetric positive definite.
class StabilityCost {
 public:
  StabilityCost(Eigen::MatrixXd Q, Eigen::MatrixXd R, Eigen::MatrixXd P);

  const Eigen::MatrixXd& Q() const { return Q_; }
  const Eigen::MatrixXd& R() const { return R_; }
  const Eigen::MatrixXd& P() const { return P_; }
  Eigen::Index state_dim() const { return Q_.rows(); }
  Eigen::Index input_dim() const { return R_.rows(); }
  double q_min_eigenvalue() const { return q_min_eig_; }

  /// Terminal cost ||x - x^r||_P^2.
  double terminal_cost(const Eigen::VectorXd& x,
                       const std::optional<Eigen::VectorXd>& x_ref = {}) const;

 private:
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd R_;
  Eigen::MatrixXd P_;
  double q_min_eig_;
};

/// Stage cost at one step; r absent means the origin reference.
double stage_cost(const StabilityCost& c, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u,
                  const std::optional<ReferencePoint>& r = {});

/// Finite-horizon stability cost: rolls the dynamics out from x0 under
/// u_seq, sums the stage costs for i = 0..N-1 and adds the terminal cost at
/// x_N. r_window, when present, must hold N+1 reference points.
double stability_cost_J(const StabilityCost& c, const LinearDynamics& dyn,
                        const Eigen::VectorXd& x0,
                        const std::vector<Eigen::VectorXd>& u_seq,
                        const std::vector<ReferencePoint>* r_window = nullptr);

/// Input-matching objective ||u_des - u0||^2.
double matching_objective_G(const Eigen::VectorXd& u_des,
                            const Eigen::VectorXd& u0);

}  // namespace mpsf

#endif  // MPSF_COSTS_HPP_
