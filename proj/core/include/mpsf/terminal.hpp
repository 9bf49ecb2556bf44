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

#ifndef MPSF_TERMINAL_HPP_
#define MPSF_TERMINAL_HPP_

#include <Eigen/Dense>

#include <optional>
#include <string>

#include "mpsf/costs.hpp"
#include "mpsf/model.hpp"

namespace mpsf {

/// Terminal cost weight P, terminal feedback K and terminal set level tau.
/// The terminal set is the sublevel set { x : x' P x <= tau } (centered at
/// the reference point in tracking mode). The triple must satisfy:
///  - A + B K Schur stable,
///  - (A+BK)' P (A+BK) - P + Q + K' R K <= 0 (control Lyapunov decrease),
///  - every x in the set lies in X with K x in U.
struct TerminalIngredients {
  Eigen::MatrixXd P;
  Eigen::MatrixXd K;
  double tau = 0.0;
};

/// Solves the discrete algebraic Riccati equation for (A, B, Q, R) by the
/// structure-preserving doubling iteration and returns the stabilizing
/// solution P together with the LQR gain K = -(R + B'PB)^{-1} B'PA.
///
/// The returned P satisfies
///   || A'PA - P - A'PB (R + B'PB)^{-1} B'PA + Q ||_F <= 1e-8 ||P||_F
/// and A + BK is Schur stable; throws on non-convergence or an indefinite
/// iterate.
TerminalIngredients solve_riccati(const LinearDynamics& dyn,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R);

/// Frobenius-relative DARE residual of P.
double dare_residual(const LinearDynamics& dyn, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P);

/// Largest level tau such that { x'Px <= tau } lies inside the state box and
/// maps into the input box under u = Kx, scaled by margin in (0, 1]:
///   tau = margin * min_h b_h^2 / (h' P^{-1} h)
/// over all box halfspaces h'x <= b_h (input rows mapped through K).
/// Throws if some b_h <= 0, i.e. the origin is not interior.
double terminal_set_level(const TerminalIngredients& ti,
                          const BoxConstraints& box, double margin);

/// Certificate for (P, K, tau): exact CLF matrix
/// inequality, sampled invariance of the tau-sublevel boundary, and sampled
/// constraint admissibility.
struct TerminalCertificate {
  double clf_max_eigenvalue = 0.0;     // max eig of Acl'P Acl - P + Q + K'RK
  double max_invariance_violation = 0.0;  // max (x+' P x+ - tau) over samples
  double max_constraint_violation = 0.0;  // max box violation over samples
  int samples = 0;
  bool clf_ok = false;
  bool invariant_ok = false;
  bool admissible_ok = false;
  bool ok() const { return clf_ok && invariant_ok && admissible_ok; }
  std::string summary() const;
};

TerminalCertificate certify_terminal_ingredients(const LinearDynamics& dyn,
                                        const StabilityCost& cost,
                                        const TerminalIngredients& ti,
                                        const BoxConstraints& box,
                                        int samples = 1000);

/// u^r + K (x - x^r); with r absent, K x.
Eigen::VectorXd terminal_controller(const TerminalIngredients& ti,
                                    const Eigen::VectorXd& x,
                                    const std::optional<ReferencePoint>& r = {});

/// CSV matrix-block export/import of (P, K, tau).
void save_ingredients_csv(const std::string& path, const TerminalIngredients& ti);
TerminalIngredients load_ingredients_csv(const std::string& path);

}  // namespace mpsf

#endif  // MPSF_TERMINAL_HPP_
