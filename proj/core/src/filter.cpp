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

#include "mpsf/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mpsf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertifyTol = 1e-6;       // matching error for passthrough
constexpr double kDecreaseTol = 1e-7;      // warm-start decrease verification
constexpr double kActiveSlackTol = 1e-6;   // constraint tagging
constexpr double kActiveMultTol = 1e-6;

std::vector<ReferencePoint> zero_window(Eigen::Index n, Eigen::Index m,
                                        Eigen::Index N) {
  return std::vector<ReferencePoint>(
      static_cast<std::size_t>(N + 1),
      ReferencePoint{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m)});
}

// kappa_f rollout along the reference window: u_i = u^r_i + K (x_i - x^r_i).
std::vector<Eigen::VectorXd> terminal_rollout(
    const LinearDynamics& dyn, const TerminalIngredients& ti,
    const Eigen::VectorXd& x_start,
    const std::vector<ReferencePoint>& r_window) {
  const Eigen::Index N = static_cast<Eigen::Index>(r_window.size()) - 1;
  std::vector<Eigen::VectorXd> us;
  us.reserve(static_cast<std::size_t>(N));
  Eigen::VectorXd x = x_start;
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::VectorXd u =
        terminal_controller(ti, x, r_window[static_cast<std::size_t>(i)]);
    us.push_back(u);
    x = step(dyn, x, u);
  }
  return us;
}

}  // namespace

const char* to_string(FilterMode m) {
  switch (m) {
    case FilterMode::SafetyOnly:
      return "safety_only";
    case FilterMode::Convergence:
      return "convergence";
    case FilterMode::UniformWarmStart:
      return "uniform_warm_start";
    case FilterMode::TrackingConvergence:
      return "tracking_convergence";
  }
  return "?";
}

std::optional<FilterMode> filter_mode_from_string(const std::string& s) {
  if (s == "safety_only") return FilterMode::SafetyOnly;
  if (s == "convergence") return FilterMode::Convergence;
  if (s == "uniform_warm_start") return FilterMode::UniformWarmStart;
  if (s == "tracking_convergence") return FilterMode::TrackingConvergence;
  return std::nullopt;
}

void FilterConfig::validate() const {
  if (N < 1) throw std::invalid_argument("FilterConfig: N must be >= 1");
  if (!(zeta_min > 0.0 && zeta_min <= rho && rho <= 1.0)) {
    throw std::invalid_argument("FilterConfig: need 0 < zeta_min <= rho <= 1");
  }
  if (!(gamma >= 1.0)) {
    throw std::invalid_argument("FilterConfig: gamma must be >= 1");
  }
  if (zeta_policy.kind == ZetaPolicy::Kind::Fixed) {
    if (zeta_policy.fixed_zeta < zeta_min || zeta_policy.fixed_zeta > rho) {
      throw std::invalid_argument("FilterConfig: fixed zeta outside [zeta_min, rho]");
    }
  } else if (!(zeta_policy.lambda_weight > 0.0)) {
    throw std::invalid_argument("FilterConfig: adaptive zeta weight must be > 0");
  }
}

double init_bound(const FilterConfig& cfg, double v_mpc_0) {
  if (v_mpc_0 < 0.0) {
    throw std::invalid_argument("init_bound: V_mpc must be nonnegative");
  }
  return cfg.gamma * v_mpc_0;
}

double update_bound_convergence(const FilterConfig& cfg, double v_k,
                                double ell_k, double zeta) {
  if (zeta < cfg.zeta_min - 1e-12 || zeta > cfg.rho + 1e-12) {
    throw std::invalid_argument("update_bound_convergence: zeta outside [zeta_min, rho]");
  }
  return v_k - zeta * ell_k;
}

std::vector<Eigen::VectorXd> candidate_shift(
    const std::vector<Eigen::VectorXd>& prev_solution,
    const Eigen::VectorXd& prev_terminal_state, const TerminalIngredients& ti,
    const std::optional<ReferencePoint>& r_terminal) {
  if (prev_solution.empty()) {
    throw std::invalid_argument("candidate_shift: no previous solution");
  }
  std::vector<Eigen::VectorXd> cand(prev_solution.begin() + 1,
                                    prev_solution.end());
  cand.push_back(terminal_controller(ti, prev_terminal_state, r_terminal));
  return cand;
}

WarmStartUpdate update_bound_warmstart(
    const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const TerminalIngredients& ti,
    const Eigen::VectorXd& x_next,
    const std::vector<Eigen::VectorXd>& candidate,
    const std::vector<ReferencePoint>* r_window_next, double v_prev,
    double ell_prev) {
  std::vector<ReferencePoint> zw;
  if (!r_window_next) {
    zw = zero_window(dyn.state_dim(), dyn.input_dim(), cfg.N);
    r_window_next = &zw;
  }
  WarmStartUpdate upd;
  upd.warm_start = candidate;
  upd.J_B_next = stability_cost_J(cost, dyn, x_next, candidate, r_window_next);

  const Eigen::VectorXd e_next = x_next - r_window_next->front().x;
  const bool in_terminal_set = e_next.dot(ti.P * e_next) <= ti.tau;
  if (in_terminal_set) {
    const double vf = cost.terminal_cost(x_next, r_window_next->front().x);
    if (upd.J_B_next > vf) {
      // Admissibility repair: the terminal-controller rollout always
      // satisfies J <= V_f inside the terminal set.
      std::vector<Eigen::VectorXd> ws =
          terminal_rollout(dyn, ti, x_next, *r_window_next);
      const double j_f = stability_cost_J(cost, dyn, x_next, ws, r_window_next);
      if (j_f < upd.J_B_next) {
        upd.warm_start = std::move(ws);
        upd.J_B_next = j_f;
      }
    }
    if (upd.J_B_next > vf + kDecreaseTol) {
      std::ostringstream os;
      os << "update_bound_warmstart: admissibility repair failed, J="
         << upd.J_B_next << " > V_f=" << vf;
      throw RecursiveFeasibilityError(os.str(), os.str());
    }
  }
  if (upd.J_B_next > v_prev - ell_prev + kDecreaseTol) {
    std::ostringstream os;
    os << "update_bound_warmstart: decrease verification failed, J="
       << upd.J_B_next << " > V_prev - ell_prev = " << (v_prev - ell_prev);
    throw RecursiveFeasibilityError(os.str(), os.str());
  }
  return upd;
}

AssembledProblem assemble_problem(
    const FilterConfig& cfg, const CostCondenser& condenser,
    const TerminalIngredients& ti, const BoxConstraints& box,
    const Eigen::VectorXd& x, const Eigen::VectorXd& u_des,
    const std::vector<ReferencePoint>* r_window, bool include_stability,
    bool bound_is_fixed, double j_bound, double v_prev, double ell_prev) {
  const PredictionMatrices& pred = condenser.pred();
  const Eigen::Index n = pred.n;
  const Eigen::Index m = pred.m;
  const Eigen::Index N = pred.N;
  if (x.size() != n || u_des.size() != m) {
    throw std::invalid_argument("assemble_problem: dimension mismatch");
  }
  std::vector<ReferencePoint> zw;
  if (!r_window) {
    zw = zero_window(n, m, N);
    r_window = &zw;
  }

  AssembledProblem ap;
  ap.has_zeta = include_stability &&
                cfg.zeta_policy.kind == ZetaPolicy::Kind::Adaptive &&
                (cfg.mode == FilterMode::Convergence ||
                 cfg.mode == FilterMode::TrackingConvergence);
  const Eigen::Index nz = N * m;
  const Eigen::Index d = nz + (ap.has_zeta ? 1 : 0);
  QcqpProblem& p = ap.qcqp;
  p = QcqpProblem::make(d);

  // Objective G = ||u_des - u_0||^2, plus lambda (zeta - zeta_min)^2 in
  // adaptive mode so the decrease factor stays at its floor unless a faster
  // decrease is free.
  for (Eigen::Index i = 0; i < m; ++i) p.H(i, i) = 2.0;
  p.g.head(m) = -2.0 * u_des;
  p.c0 = u_des.squaredNorm();
  if (ap.has_zeta) {
    const double lw = cfg.zeta_policy.lambda_weight;
    p.H(d - 1, d - 1) = 2.0 * lw;
    p.g(d - 1) = -2.0 * lw * cfg.zeta_min;
    p.c0 += lw * cfg.zeta_min * cfg.zeta_min;
  }

  // Input boxes over the horizon; zeta box in adaptive mode.
  for (Eigen::Index j = 0; j < N; ++j) {
    p.lo.segment(j * m, m) = box.u_lo;
    p.hi.segment(j * m, m) = box.u_hi;
  }
  if (ap.has_zeta) {
    p.lo(d - 1) = cfg.zeta_min;
    p.hi(d - 1) = cfg.rho;
  }

  // State boxes for the intermediate predicted states.
  Eigen::MatrixXd C;
  Eigen::VectorXd c;
  state_box_rows(pred, box, x, C, c);
  p.C = Eigen::MatrixXd::Zero(C.rows(), d);
  p.C.leftCols(nz) = C;
  p.c = c;

  // Terminal constraint: ellipsoid around x^r(N), or an exact endpoint
  // equality in the degenerate design.
  const Eigen::VectorXd& xrN = r_window->back().x;
  if (cfg.degenerate_terminal) {
    p.E = Eigen::MatrixXd::Zero(n, d);
    p.E.leftCols(nz) = pred.state_rows(N);
    p.e = xrN - pred.A_pow[static_cast<std::size_t>(N)] * x;
  } else {
    const QuadraticForm tf = terminal_ellipsoid_form(pred, ti.P, ti.tau, x, xrN);
    QcqpProblem::QuadConstraint qc;
    qc.M = Eigen::MatrixXd::Zero(d, d);
    qc.M.topLeftCorner(nz, nz) = tf.M;
    qc.q = Eigen::VectorXd::Zero(d);
    qc.q.head(nz) = tf.q;
    qc.s = tf.s;
    ap.terminal_quad_index = static_cast<Eigen::Index>(p.quads.size());
    p.quads.push_back(std::move(qc));
  }

  // Stability constraint J <= J_B, or jointly J <= V_prev - zeta * ell_prev.
  if (include_stability) {
    const QuadraticForm jf = condenser.form(x, r_window);
    QcqpProblem::QuadConstraint qc;
    qc.M = Eigen::MatrixXd::Zero(d, d);
    qc.M.topLeftCorner(nz, nz) = jf.M;
    qc.q = Eigen::VectorXd::Zero(d);
    qc.q.head(nz) = jf.q;
    if (bound_is_fixed) {
      qc.s = jf.s - j_bound;
    } else {
      qc.q(d - 1) = ell_prev;
      qc.s = jf.s - v_prev;
    }
    ap.stability_quad_index = static_cast<Eigen::Index>(p.quads.size());
    p.quads.push_back(std::move(qc));
  }
  return ap;
}

MpcSolution solve_corresponding_mpc(
    const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const TerminalIngredients& ti,
    const BoxConstraints& box, const Eigen::VectorXd& x,
    const std::vector<ReferencePoint>* r_window) {
  MpcSolution out;
  if (!box.state_inside(x, 1e-9)) return out;  // x outside X

  const PredictionMatrices pred = PredictionMatrices::build(dyn, cfg.N);
  const CostCondenser condenser(pred, cost, cfg.degenerate_terminal);

  std::vector<ReferencePoint> zw;
  if (!r_window) {
    zw = zero_window(pred.n, pred.m, cfg.N);
    r_window = &zw;
  }

  // Same constraint set as the filter problem, but J as the objective.
  AssembledProblem ap = assemble_problem(
      cfg, condenser, ti, box, x, Eigen::VectorXd::Zero(pred.m), r_window,
      /*include_stability=*/false, /*bound_is_fixed=*/true, 0.0, 0.0, 0.0);
  const QuadraticForm jf = condenser.form(x, r_window);
  ap.qcqp.H = jf.M;
  ap.qcqp.g = jf.q;
  ap.qcqp.c0 = jf.s;

  // Reference inputs are a natural warm start.
  Eigen::VectorXd hint(pred.N * pred.m);
  for (Eigen::Index i = 0; i < pred.N; ++i) {
    hint.segment(i * pred.m, pred.m) =
        (*r_window)[static_cast<std::size_t>(i)].u;
  }

  const QcqpSolution sol = solve(ap.qcqp, SolverOptions{}, &hint);
  if (sol.status == SolveStatus::Infeasible) return out;
  out.feasible = true;
  out.value = std::max(0.0, sol.objective);
  out.minimizer = unstack_inputs(sol.z.head(pred.N * pred.m), pred.m);
  return out;
}

FilterEngine::FilterEngine(FilterConfig cfg, LinearDynamics dyn,
                           StabilityCost cost, TerminalIngredients ti,
                           BoxConstraints box,
                           std::optional<ReferenceTrajectory> reference)
    : cfg_(std::move(cfg)),
      dyn_(std::move(dyn)),
      cost_(std::move(cost)),
      ti_(std::move(ti)),
      box_(std::move(box)),
      reference_(std::move(reference)),
      condenser_(PredictionMatrices::build(dyn_, cfg_.N), cost_,
                 cfg_.degenerate_terminal) {
  cfg_.validate();
  if (cost_.state_dim() != dyn_.state_dim() ||
      cost_.input_dim() != dyn_.input_dim()) {
    throw std::invalid_argument("FilterEngine: cost dimension mismatch");
  }
  if (ti_.P.rows() != dyn_.state_dim() || ti_.K.rows() != dyn_.input_dim() ||
      ti_.K.cols() != dyn_.state_dim()) {
    throw std::invalid_argument("FilterEngine: ingredient dimension mismatch");
  }
  if (cfg_.mode == FilterMode::UniformWarmStart && reference_ &&
      !reference_->is_zero()) {
    throw std::invalid_argument(
        "FilterEngine: uniform warm-start mode stabilizes the origin; "
        "use tracking_convergence for dynamic references");
  }
  state_.J_B = kInf;
}

std::vector<ReferencePoint> FilterEngine::reference_window(Eigen::Index k) const {
  if (reference_) return reference_->window(k, cfg_.N);
  return zero_window(dyn_.state_dim(), dyn_.input_dim(), cfg_.N);
}

FilterStepResult FilterEngine::step_via_mpc_shortcut(
    const Eigen::VectorXd& x, const Eigen::VectorXd& u_des,
    const MpcSolution& mpc, const std::vector<ReferencePoint>& r_win) {
  // With J_B(0) equal to the optimal MPC value, the feasible set is the
  // MPC minimizer itself; no quadratic program needs to be solved.
  FilterStepResult res;
  res.u_applied = mpc.minimizer.front();
  res.matching_error = (u_des - res.u_applied).norm();
  res.certified = res.matching_error <= kCertifyTol;
  res.V = stability_cost_J(cost_, dyn_, x, mpc.minimizer, &r_win);
  res.J_B_used = state_.J_B;
  res.zeta = 1.0;
  res.solver_status = SolveStatus::Optimal;
  res.stage_cost_applied = stage_cost(cost_, x, res.u_applied, r_win.front());
  res.active_constraints = {"stability"};
  advance_state(x, mpc.minimizer, r_win, res.V, res.stage_cost_applied,
                res.zeta);
  return res;
}

void FilterEngine::advance_state(const Eigen::VectorXd& x,
                                 const std::vector<Eigen::VectorXd>& u_seq,
                                 const std::vector<ReferencePoint>& r_win,
                                 double V, double ell0, double zeta) {
  const Eigen::VectorXd x_terminal =
      rollout_open_loop(dyn_, x, u_seq).back();

  switch (cfg_.mode) {
    case FilterMode::SafetyOnly:
      break;
    case FilterMode::Convergence:
    case FilterMode::TrackingConvergence: {
      state_.V_prev = V;
      state_.ell_prev = ell0;
      if (cfg_.zeta_policy.kind == ZetaPolicy::Kind::Fixed) {
        state_.J_B = update_bound_convergence(cfg_, V, ell0,
                                              cfg_.zeta_policy.fixed_zeta);
      }
      break;
    }
    case FilterMode::UniformWarmStart: {
      const auto r_next = reference_window(state_.k + 1);
      const auto cand = candidate_shift(u_seq, x_terminal, ti_,
                                        r_win.back());
      const Eigen::VectorXd x_next = mpsf::step(dyn_, x, u_seq.front());
      const WarmStartUpdate upd = update_bound_warmstart(
          cfg_, dyn_, cost_, ti_, x_next, cand, &r_next, V, ell0);
      state_.J_B = upd.J_B_next;
      state_.warm_start = upd.warm_start;
      state_.V_prev = V;
      state_.ell_prev = ell0;
      break;
    }
  }
  state_.prev_solution = u_seq;
  state_.prev_terminal_state = x_terminal;
  state_.zeta_last = zeta;
  ++state_.k;
}

FilterStepResult FilterEngine::step(const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& u_des) {
  const Eigen::Index k = state_.k;
  const Eigen::Index m = dyn_.input_dim();
  const Eigen::Index N = cfg_.N;
  const auto r_win = reference_window(k);

  if (!box_.state_inside(x, 1e-9)) {
    if (k == 0) {
      throw InitialInfeasibilityError("filter_step: x(0) outside the state box");
    }
    std::ostringstream os;
    os << "filter_step: state left X at k=" << k << ", x=" << x.transpose();
    throw RecursiveFeasibilityError(os.str(), os.str());
  }

  const bool stability = cfg_.mode != FilterMode::SafetyOnly;

  // Step 0 establishes the initial bound (and, when the bound equals the
  // optimal MPC value, directly yields the unique feasible solution).
  std::optional<MpcSolution> mpc0;
  if (k == 0 && stability) {
    if (cfg_.mode == FilterMode::UniformWarmStart) {
      const double vf0 = x.dot(ti_.P * x);
      if (vf0 <= ti_.tau) {
        // Inside the terminal set the kappa_f rollout is an admissible
        // initial warm start; no MPC solve is needed at all.
        state_.warm_start = terminal_rollout(dyn_, ti_, x, r_win);
        state_.J_B =
            stability_cost_J(cost_, dyn_, x, state_.warm_start, &r_win);
      } else {
        mpc0 = solve_corresponding_mpc(cfg_, dyn_, cost_, ti_, box_, x,
                                       reference_ ? &r_win : nullptr);
        ++mpc_solves_;
        if (!mpc0->feasible) {
          throw InitialInfeasibilityError(
              "filter_step: x(0) outside the feasible set");
        }
        state_.warm_start = mpc0->minimizer;
        state_.J_B =
            stability_cost_J(cost_, dyn_, x, state_.warm_start, &r_win);
        // The bound equals the optimal value, so the minimizer is the only
        // feasible sequence.
        return step_via_mpc_shortcut(x, u_des, *mpc0, r_win);
      }
    } else {
      mpc0 = solve_corresponding_mpc(cfg_, dyn_, cost_, ti_, box_, x,
                                     reference_ ? &r_win : nullptr);
      ++mpc_solves_;
      if (!mpc0->feasible) {
        throw InitialInfeasibilityError(
            "filter_step: x(0) outside the feasible set");
      }
      state_.J_B = init_bound(cfg_, mpc0->value);
      if (cfg_.gamma == 1.0) {
        return step_via_mpc_shortcut(x, u_des, *mpc0, r_win);
      }
    }
  }

  // Which form the stability constraint takes this step.
  bool bound_fixed = true;
  double j_bound = state_.J_B;
  if (stability && k > 0 &&
      (cfg_.mode == FilterMode::Convergence ||
       cfg_.mode == FilterMode::TrackingConvergence) &&
      cfg_.zeta_policy.kind == ZetaPolicy::Kind::Adaptive) {
    bound_fixed = false;
  }

  AssembledProblem ap = assemble_problem(
      cfg_, condenser_, ti_, box_, x, u_des, &r_win, stability, bound_fixed,
      j_bound, state_.V_prev, state_.ell_prev);

  // Warm-start hint: candidate shift (k > 0), MPC minimizer or stored warm
  // start (k == 0).
  std::optional<Eigen::VectorXd> hint;
  {
    std::vector<Eigen::VectorXd> hint_seq;
    if (k == 0) {
      if (mpc0 && mpc0->feasible) {
        hint_seq = mpc0->minimizer;
      } else if (!state_.warm_start.empty()) {
        hint_seq = state_.warm_start;
      }
    } else if (cfg_.mode == FilterMode::UniformWarmStart) {
      hint_seq = state_.warm_start;
    } else if (!state_.prev_solution.empty()) {
      hint_seq = candidate_shift(state_.prev_solution,
                                 state_.prev_terminal_state, ti_,
                                 reference_window(k - 1).back());
    }
    if (!hint_seq.empty()) {
      Eigen::VectorXd h(ap.qcqp.dim);
      h.head(N * m) = stack_inputs(hint_seq);
      if (ap.has_zeta) {
        double zeta_hint = 0.5 * (cfg_.zeta_min + cfg_.rho);
        if (!bound_fixed && state_.ell_prev > 1e-14) {
          const double j_hint =
              stability_cost_J(cost_, dyn_, x, hint_seq, &r_win);
          const double zeta_max =
              (state_.V_prev - j_hint) / state_.ell_prev;
          zeta_hint = std::clamp(cfg_.zeta_min + 0.9 * (zeta_max - cfg_.zeta_min),
                                 cfg_.zeta_min + 1e-12, cfg_.rho - 1e-12);
        }
        h(ap.qcqp.dim - 1) = zeta_hint;
      }
      hint = std::move(h);
    }
  }

  const QcqpSolution sol =
      solve(ap.qcqp, SolverOptions{}, hint ? &*hint : nullptr);
  if (sol.status == SolveStatus::Infeasible) {
    if (k == 0) {
      throw InitialInfeasibilityError(
          "filter_step: x(0) outside the feasible set");
    }
    std::ostringstream os;
    os << "filter_step: infeasible at k=" << k
       << " (certificate=" << sol.infeasibility_certificate
       << "); this violates recursive feasibility\n"
       << "x = " << x.transpose() << "\nu_des = " << u_des.transpose()
       << "\nJ_B = " << j_bound << " V_prev = " << state_.V_prev
       << " ell_prev = " << state_.ell_prev << "\n";
    std::ostringstream dump;
    dump << os.str();
    dump_problem(dump, ap.qcqp);
    throw RecursiveFeasibilityError(os.str(), dump.str());
  }

  FilterStepResult res;
  const auto u_seq = unstack_inputs(sol.z.head(N * m), m);
  res.u_applied = u_seq.front();
  res.matching_error = (u_des - res.u_applied).norm();
  res.certified = res.matching_error <= kCertifyTol;
  res.V = stability_cost_J(cost_, dyn_, x, u_seq, &r_win);
  res.solver_status = sol.status;
  res.stage_cost_applied = stage_cost(cost_, x, res.u_applied, r_win.front());

  if (ap.has_zeta) {
    res.zeta = sol.z(ap.qcqp.dim - 1);
    // Interior-point iterates stop a hair above an active bound. Crediting
    // the floor value is always sound: the solution satisfies the tighter
    // constraint J <= V_prev - zeta* ell_prev, so every logged inequality
    // still holds with zeta_min in its place.
    if (res.zeta - cfg_.zeta_min <= 1e-3 * (1.0 + cfg_.zeta_min)) {
      res.zeta = cfg_.zeta_min;
    }
  } else if (stability && k > 0 &&
             cfg_.zeta_policy.kind == ZetaPolicy::Kind::Fixed &&
             (cfg_.mode == FilterMode::Convergence ||
              cfg_.mode == FilterMode::TrackingConvergence)) {
    res.zeta = cfg_.zeta_policy.fixed_zeta;
  } else {
    res.zeta = 1.0;
  }

  if (!stability) {
    res.J_B_used = kInf;
  } else if (bound_fixed) {
    res.J_B_used = j_bound;
  } else {
    res.J_B_used = state_.V_prev - res.zeta * state_.ell_prev;
  }

  // Active-constraint tags from slacks and multipliers.
  auto quad_active = [&](Eigen::Index idx) {
    if (idx < 0) return false;
    const auto& qc = ap.qcqp.quads[static_cast<std::size_t>(idx)];
    const double val = 0.5 * sol.z.dot(qc.M * sol.z) + qc.q.dot(sol.z) + qc.s;
    const double scale = std::max(1.0, std::abs(qc.s));
    return val >= -kActiveSlackTol * scale &&
           sol.lambda_quad(idx) > kActiveMultTol;
  };
  if (quad_active(ap.stability_quad_index)) {
    res.active_constraints.push_back("stability");
  }
  if (quad_active(ap.terminal_quad_index)) {
    res.active_constraints.push_back("terminal");
  }
  if (sol.lambda_box_lo.head(N * m).maxCoeff() > kActiveMultTol ||
      sol.lambda_box_hi.head(N * m).maxCoeff() > kActiveMultTol) {
    res.active_constraints.push_back("input_box");
  }
  if (sol.lambda_lin.size() > 0 && sol.lambda_lin.maxCoeff() > kActiveMultTol) {
    res.active_constraints.push_back("state_box");
  }

  advance_state(x, u_seq, r_win, res.V, res.stage_cost_applied, res.zeta);
  return res;
}

}  // namespace mpsf
