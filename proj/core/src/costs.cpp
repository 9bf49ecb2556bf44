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

#include "mpsf/costs.hpp"

#include <stdexcept>

namespace mpsf {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kMinEigTol = 1e-10;

// Returns the minimum eigenvalue; throws unless M is symmetric within
// kSymmetryTol and positive definite with lambda_min > kMinEigTol.
double check_spd(const Eigen::MatrixXd& M, const char* name) {
  if (M.rows() != M.cols() || M.rows() < 1) {
    throw std::invalid_argument(std::string("StabilityCost: ") + name +
                                " must be square");
  }
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string("StabilityCost: ") + name +
                                " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  const double min_eig = es.eigenvalues().minCoeff();
  if (!(min_eig > kMinEigTol)) {
    throw std::invalid_argument(std::string("StabilityCost: ") + name +
                                " is not positive definite");
  }
  return min_eig;
}

}  // namespace

StabilityCost::StabilityCost(Eigen::MatrixXd Q, Eigen::MatrixXd R,
                             Eigen::MatrixXd P)
    : Q_(std::move(Q)), R_(std::move(R)), P_(std::move(P)) {
  q_min_eig_ = check_spd(Q_, "Q");
  check_spd(R_, "R");
  check_spd(P_, "P");
  if (P_.rows() != Q_.rows()) {
    throw std::invalid_argument("StabilityCost: P and Q dimension mismatch");
  }
}

double StabilityCost::terminal_cost(
    const Eigen::VectorXd& x, const std::optional<Eigen::VectorXd>& x_ref) const {
  if (x.size() != state_dim()) {
    throw std::invalid_argument("terminal_cost: dimension mismatch");
  }
  if (x_ref && x_ref->size() != state_dim()) {
    throw std::invalid_argument("terminal_cost: reference dimension mismatch");
  }
  const Eigen::VectorXd e = x_ref ? (x - *x_ref).eval() : x;
  return e.dot(P_ * e);
}

double stage_cost(const StabilityCost& c, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& u,
                  const std::optional<ReferencePoint>& r) {
  if (x.size() != c.state_dim() || u.size() != c.input_dim()) {
    throw std::invalid_argument("stage_cost: dimension mismatch");
  }
  if (r && (r->x.size() != c.state_dim() || r->u.size() != c.input_dim())) {
    throw std::invalid_argument("stage_cost: reference dimension mismatch");
  }
  const Eigen::VectorXd ex = r ? (x - r->x).eval() : x;
  const Eigen::VectorXd eu = r ? (u - r->u).eval() : u;
  return ex.dot(c.Q() * ex) + eu.dot(c.R() * eu);
}

double stability_cost_J(const StabilityCost& c, const LinearDynamics& dyn,
                        const Eigen::VectorXd& x0,
                        const std::vector<Eigen::VectorXd>& u_seq,
                        const std::vector<ReferencePoint>* r_window) {
  if (u_seq.empty()) {
    throw std::invalid_argument("stability_cost_J: need at least one input");
  }
  if (r_window && r_window->size() != u_seq.size() + 1) {
    throw std::invalid_argument("stability_cost_J: r_window must hold N+1 points");
  }
  const auto xs = rollout_open_loop(dyn, x0, u_seq);
  double J = 0.0;
  for (std::size_t i = 0; i < u_seq.size(); ++i) {
    std::optional<ReferencePoint> r;
    if (r_window) r = (*r_window)[i];
    J += stage_cost(c, xs[i], u_seq[i], r);
  }
  std::optional<Eigen::VectorXd> x_ref;
  if (r_window) x_ref = r_window->back().x;
  J += c.terminal_cost(xs.back(), x_ref);
  return J;
}

double matching_objective_G(const Eigen::VectorXd& u_des,
                            const Eigen::VectorXd& u0) {
  if (u_des.size() != u0.size()) {
    throw std::invalid_argument("matching_objective_G: dimension mismatch");
  }
  return (u_des - u0).squaredNorm();
}

}  // namespace mpsf
