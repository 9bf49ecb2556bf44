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

#ifndef MPSF_FILTER_HPP_
#define MPSF_FILTER_HPP_

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpsf/costs.hpp"
#include "mpsf/model.hpp"
#include "mpsf/prediction.hpp"
#include "mpsf/qcqp.hpp"
#include "mpsf/terminal.hpp"

namespace mpsf {

/// Stability specification enforced on top of constraint satisfaction.
enum class FilterMode {
  SafetyOnly,          // constraint satisfaction only, no stability bound
  Convergence,         // bounded convergence to the origin
  UniformWarmStart,    // uniform asymptotic stability via warm-start bounds
  TrackingConvergence  // bounded convergence of the tracking error
};

const char* to_string(FilterMode m);
std::optional<FilterMode> filter_mode_from_string(const std::string& s);

/// How the per-step decrease factor zeta(k) in [zeta_min, rho] is chosen:
/// fixed, or as an extra decision variable with objective weight
/// lambda * (zeta - zeta_min)^2 so the solver keeps maximal input freedom
/// (and the loosest bound) unless a faster decrease costs nothing. Under
/// intervention the bound binds and zeta pins at zeta_min.
struct ZetaPolicy {
  enum class Kind { Fixed, Adaptive } kind = Kind::Fixed;
  double fixed_zeta = 0.1;
  double lambda_weight = 1e-5;
};

struct FilterConfig {
  Eigen::Index N = 10;
  FilterMode mode = FilterMode::Convergence;
  double zeta_min = 0.1;
  double rho = 1.0;
  double gamma = 1.0;  // J_B(0) = gamma * V_mpc(x(0))
  ZetaPolicy zeta_policy;
  bool degenerate_terminal = false;  // V_f = 0, X_f = {x^r(N)}

  void validate() const;
};

/// Per-timestep carrier of the bound machinery.
struct FilterState {
  Eigen::Index k = 0;
  double J_B = 0.0;       // bound for the *current* step (fixed-bound modes)
  double V_prev = 0.0;    // V(x(k-1), k-1)
  double ell_prev = 0.0;  // ell(x(k-1), u*_0|k-1)
  double zeta_last = 1.0;
  std::vector<Eigen::VectorXd> warm_start;     // UniformWarmStart bound witness
  std::vector<Eigen::VectorXd> prev_solution;  // u*_{.|k-1}
  Eigen::VectorXd prev_terminal_state;         // x_{N|k-1}
};

struct FilterStepResult {
  Eigen::VectorXd u_applied;
  bool certified = false;  // u_des passed through unmodified (<= 1e-6)
  double V = 0.0;          // closed-loop stability cost J(x(k), u*)
  double J_B_used = 0.0;   // bound active this step (inf in SafetyOnly)
  double zeta = 1.0;
  SolveStatus solver_status = SolveStatus::Optimal;
  double matching_error = 0.0;
  double stage_cost_applied = 0.0;  // ell(x(k), u*_0)
  std::vector<std::string> active_constraints;
};

/// Initial infeasibility: x(0) lies outside the feasible set.
class InitialInfeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Infeasibility after step 0. The theory rules this out, so it signals a
/// defective ingredient or solver; carries a state dump for diagnosis.
class RecursiveFeasibilityError : public std::runtime_error {
 public:
  RecursiveFeasibilityError(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

struct MpcSolution {
  double value = 0.0;
  std::vector<Eigen::VectorXd> minimizer;
  bool feasible = false;
};

/// Optimal value and minimizer of the corresponding MPC problem: minimize J
/// subject to the same constraint set (initial state, dynamics, boxes,
/// terminal set), with no stability bound.
MpcSolution solve_corresponding_mpc(
    const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const TerminalIngredients& ti,
    const BoxConstraints& box, const Eigen::VectorXd& x,
    const std::vector<ReferencePoint>* r_window);

/// J_B(0) = gamma * V_mpc(x(0)).
double init_bound(const FilterConfig& cfg, double v_mpc_0);

/// J_B(k+1) = V_k - zeta * ell_k with zeta in [zeta_min, rho].
double update_bound_convergence(const FilterConfig& cfg, double v_k,
                                double ell_k, double zeta);

/// Shifted previous solution with the terminal controller appended at the
/// previous terminal state; the canonical rho = 1 candidate.
std::vector<Eigen::VectorXd> candidate_shift(
    const std::vector<Eigen::VectorXd>& prev_solution,
    const Eigen::VectorXd& prev_terminal_state, const TerminalIngredients& ti,
    const std::optional<ReferencePoint>& r_terminal);

struct WarmStartUpdate {
  double J_B_next = 0.0;
  std::vector<Eigen::VectorXd> warm_start;
};

/// Uniform warm-start bound update: keeps the shifted candidate unless the
/// successor state lies in the terminal set and the terminal-controller
/// rollout is cheaper, then sets J_B(k+1) to the stored warm start's cost.
/// Throws when the required cost decrease fails (ingredient defect).
WarmStartUpdate update_bound_warmstart(
    const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const TerminalIngredients& ti,
    const Eigen::VectorXd& x_next,
    const std::vector<Eigen::VectorXd>& candidate,
    const std::vector<ReferencePoint>* r_window_next, double v_prev,
    double ell_prev);

struct AssembledProblem {
  QcqpProblem qcqp;
  Eigen::Index terminal_quad_index = -1;   // -1: handled by equalities
  Eigen::Index stability_quad_index = -1;  // -1: none (SafetyOnly)
  bool has_zeta = false;                   // last decision variable is zeta
};

/// Condensed QCQP for one filter step. bound_is_fixed distinguishes
/// J <= J_B (fixed bound, also used at k = 0) from the adaptive joint
/// constraint J <= V_prev - zeta * ell_prev with zeta a decision variable.
AssembledProblem assemble_problem(
    const FilterConfig& cfg, const CostCondenser& condenser,
    const TerminalIngredients& ti, const BoxConstraints& box,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u_des,
    const std::vector<ReferencePoint>* r_window, bool include_stability,
    bool bound_is_fixed, double j_bound, double v_prev, double ell_prev);

/// Owns the per-run state and executes one Algorithm-style step at a time:
/// solve the assembled problem, apply u*_0, construct the successor bound.
class FilterEngine {
 public:
  FilterEngine(FilterConfig cfg, LinearDynamics dyn, StabilityCost cost,
               TerminalIngredients ti, BoxConstraints box,
               std::optional<ReferenceTrajectory> reference = {});

  /// One filter step at state x with desired input u_des. The reference
  /// window is taken at the internal step counter.
  FilterStepResult step(const Eigen::VectorXd& x, const Eigen::VectorXd& u_des);

  const FilterState& state() const { return state_; }
  const FilterConfig& config() const { return cfg_; }
  const LinearDynamics& dynamics() const { return dyn_; }
  const StabilityCost& cost() const { return cost_; }
  const TerminalIngredients& ingredients() const { return ti_; }
  const BoxConstraints& box() const { return box_; }
  int mpc_solve_count() const { return mpc_solves_; }

  /// Reference window r(k)..r(k+N) for the current step (zeros when no
  /// reference was supplied).
  std::vector<ReferencePoint> reference_window(Eigen::Index k) const;

 private:
  FilterStepResult step_via_mpc_shortcut(const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u_des,
                                         const MpcSolution& mpc,
                                         const std::vector<ReferencePoint>& r_win);
  void advance_state(const Eigen::VectorXd& x,
                     const std::vector<Eigen::VectorXd>& u_seq,
                     const std::vector<ReferencePoint>& r_win, double V,
                     double ell0, double zeta);

  FilterConfig cfg_;
  LinearDynamics dyn_;
  StabilityCost cost_;
  TerminalIngredients ti_;
  BoxConstraints box_;
  std::optional<ReferenceTrajectory> reference_;
  CostCondenser condenser_;
  FilterState state_;
  int mpc_solves_ = 0;
};

}  // namespace mpsf

#endif  // MPSF_FILTER_HPP_
