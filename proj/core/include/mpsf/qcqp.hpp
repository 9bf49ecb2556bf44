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

#ifndef MPSF_QCQP_HPP_
#define MPSF_QCQP_HPP_

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mpsf {

/// Convex quadratically constrained quadratic program in the condensed form
/// produced by the safety filter:
///
///   min  1/2 z'Hz + g'z + c0
///   s.t. E z = e
///        lo <= z <= hi                      (entries may be +-inf)
///        C z + c <= 0                       (rowwise)
///        1/2 z'M_j z + q_j'z + s_j <= 0     (convex quadratics)
///
/// H and every M_j must be positive semidefinite. The linear block C holds
/// the condensed state-box rows; the quadratic list holds the terminal-set
/// and stability constraints (at most two in every filter problem).
struct QcqpProblem {
  struct QuadConstraint {
    Eigen::MatrixXd M;
    Eigen::VectorXd q;
    double s = 0.0;
  };

  Eigen::Index dim = 0;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double c0 = 0.0;
  Eigen::MatrixXd E;  // p x dim, p may be zero
  Eigen::VectorXd e;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  Eigen::MatrixXd C;  // L x dim, L may be zero
  Eigen::VectorXd c;
  std::vector<QuadConstraint> quads;

  static QcqpProblem make(Eigen::Index dim);

  /// Throws std::invalid_argument when the invariants are violated
  /// (dimension mismatch, non-PSD H or M_j, lo > hi).
  void validate() const;

  double objective_value(const Eigen::VectorXd& z) const;
  /// Worst constraint violation at z (<= 0 means feasible), equalities
  /// measured by |E z - e|.
  double max_violation(const Eigen::VectorXd& z) const;
};

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

const char* to_string(SolveStatus s);
std::optional<SolveStatus> solve_status_from_string(const std::string& s);

struct QcqpSolution {
  Eigen::VectorXd z;
  double objective = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  double primal_residual = 0.0;   // max(0, worst constraint violation)
  double dual_residual = 0.0;     // KKT stationarity, inf norm
  double complementarity = 0.0;   // surrogate duality gap
  double infeasibility_certificate = 0.0;  // > 0 when status == Infeasible
  int iterations = 0;

  // Multipliers for diagnostics (active-set tags, sensitivity).
  Eigen::VectorXd lambda_box_lo;
  Eigen::VectorXd lambda_box_hi;
  Eigen::VectorXd lambda_lin;
  Eigen::VectorXd lambda_quad;
  Eigen::VectorXd nu;
};

struct FeasibilityResult {
  bool feasible = false;
  Eigen::VectorXd point;   // valid when feasible
  double max_violation = 0.0;  // minimized worst violation (may be negative)
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 100;
  bool trace = false;  // per-iteration residual printout on stderr
};

/// Primal-dual interior-point solve. An optional warm start is used as the
/// initial iterate when it is strictly feasible; otherwise a feasibility
/// phase computes one. Infeasibility is reported, never silently relaxed.
QcqpSolution solve(const QcqpProblem& p, const SolverOptions& opts = {},
                   const Eigen::VectorXd* warm_start = nullptr);

/// Phase-I: minimizes the worst constraint violation over the equality
/// manifold. Returns a strictly feasible point, or the positive certificate.
FeasibilityResult feasibility_phase(const QcqpProblem& p,
                                    const SolverOptions& opts = {});

/// Plain-text dump (dimensions, then matrices row-major) for offline
/// debugging; the format is documented in the repository README.
void dump_problem(std::ostream& os, const QcqpProblem& p);

}  // namespace mpsf

#endif  // MPSF_QCQP_HPP_
