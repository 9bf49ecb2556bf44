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

#ifndef MPSF_PREDICTION_HPP_
#define MPSF_PREDICTION_HPP_

#include <Eigen/Dense>

#include <vector>

#include "mpsf/costs.hpp"
#include "mpsf/model.hpp"

namespace mpsf {

/// Condensed prediction over a horizon N: with z the stacked input sequence
/// (u_0, ..., u_{N-1}), the stacked states (x_0, ..., x_N) are
///   x_stack = A_stack x0 + input_map z.
struct PredictionMatrices {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index N = 0;
  std::vector<Eigen::MatrixXd> A_pow;  // A^0 .. A^N
  Eigen::MatrixXd A_stack;             // (N+1)n x n
  Eigen::MatrixXd input_map;           // (N+1)n x Nm, block lower triangular

  static PredictionMatrices build(const LinearDynamics& dyn, Eigen::Index N);

  /// Rows of input_map mapping z to x_i.
  Eigen::Block<const Eigen::MatrixXd> state_rows(Eigen::Index i) const {
    return input_map.block(i * n, 0, n, N * m);
  }
};

/// 1/2 z'Mz + q'z + s.
struct QuadraticForm {
  Eigen::MatrixXd M;
  Eigen::VectorXd q;
  double s = 0.0;
  double value(const Eigen::VectorXd& z) const {
    return 0.5 * z.dot(M * z) + q.dot(z) + s;
  }
};

/// Exact quadratic representation of the stability cost J over the stacked
/// input sequence. The Hessian is independent of the initial state and the
/// reference window, so it is assembled once and reused every step.
class CostCondenser {
 public:
  /// zero_terminal drops the terminal weight (degenerate terminal design).
  CostCondenser(const PredictionMatrices& pred, const StabilityCost& cost,
                bool zero_terminal = false);

  /// J(z) for initial state x0 and reference window of N+1 points
  /// (nullptr means the origin reference).
  QuadraticForm form(const Eigen::VectorXd& x0,
                     const std::vector<ReferencePoint>* r_window) const;

  const Eigen::MatrixXd& hessian() const { return M_; }
  const PredictionMatrices& pred() const { return pred_; }

 private:
  Eigen::VectorXd weighted_deviation(const Eigen::VectorXd& d) const;  // W d

  PredictionMatrices pred_;
  StabilityCost cost_;
  bool zero_terminal_;
  Eigen::MatrixXd M_;  // 2 (Gamma' W Gamma + Rbar)
};

/// Terminal ellipsoid (x_N - x_ref_N)' P (x_N - x_ref_N) - tau <= 0 as a
/// quadratic form over z.
QuadraticForm terminal_ellipsoid_form(const PredictionMatrices& pred,
                                      const Eigen::MatrixXd& P, double tau,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::VectorXd& x_ref_N);

/// State box rows x_lo <= x_i <= x_hi for i = 1..N-1 as C z + c <= 0
/// (x_0 is fixed and x_N is handled by the terminal constraint).
void state_box_rows(const PredictionMatrices& pred, const BoxConstraints& box,
                    const Eigen::VectorXd& x0, Eigen::MatrixXd& C,
                    Eigen::VectorXd& c);

/// Stacks a sequence of inputs into one vector and back.
Eigen::VectorXd stack_inputs(const std::vector<Eigen::VectorXd>& u_seq);
std::vector<Eigen::VectorXd> unstack_inputs(const Eigen::VectorXd& z,
                                            Eigen::Index m);

}  // namespace mpsf

#endif  // MPSF_PREDICTION_HPP_
