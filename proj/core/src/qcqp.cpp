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

#include "mpsf/qcqp.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "mpsf/matrix_io.hpp"

namespace mpsf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPsdTol = 1e-9;
// Everything reported Optimal must satisfy the true constraints within this.
constexpr double kFeasReportTol = 1e-7;
// Relative padding used to open a strict interior when the feasible set is
// thin (e.g. a stability bound set exactly at the optimal MPC value). The
// resulting true violation stays below kFeasReportTol for row scales < 100.
constexpr double kInteriorPad = 1e-9;
// Stationarity gate on padded problems: the pad width limits the achievable
// KKT accuracy through the barrier Hessian conditioning.
constexpr double kPaddedDualGate = 1e-4;
// Warm starts must sit genuinely inside the inequalities; boundary points
// produce badly mis-centered multipliers.
constexpr double kStartMargin = 1e-7;

void check_psd(const Eigen::MatrixXd& M, const char* name) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (M + M.transpose()));
  const double min_eig = es.eigenvalues().minCoeff();
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (min_eig < -kPsdTol * scale) {
    throw std::invalid_argument(std::string("QcqpProblem: ") + name +
                                " is not positive semidefinite");
  }
}

// Tag of one inequality row in the flattened ordering.
struct RowTag {
  enum class Kind { BoxLo, BoxHi, Lin, Quad } kind;
  Eigen::Index index;
};

// One interior-point problem instance:
//   min 1/2 w'Hw + g'w  s.t.  Ew = e,  rows(w) <= 0,
// where rows are constant-gradient rows (Jc w + cc) followed by quadratic
// rows (1/2 w'Mw + q'w + s).
struct IpmCore {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  Eigen::MatrixXd Jc;
  Eigen::VectorXd cc;
  std::vector<QcqpProblem::QuadConstraint> quads;
  std::vector<RowTag> tags;  // one per row, constant rows first

  Eigen::Index dim() const { return H.rows(); }
  Eigen::Index n_eq() const { return E.rows(); }
  Eigen::Index n_const_rows() const { return Jc.rows(); }
  Eigen::Index n_rows() const {
    return Jc.rows() + static_cast<Eigen::Index>(quads.size());
  }

  void eval_rows(const Eigen::VectorXd& w, Eigen::VectorXd& val,
                 Eigen::MatrixXd& jac) const {
    const Eigen::Index mc = n_const_rows();
    if (mc > 0) {
      val.head(mc) = Jc * w + cc;
      jac.topRows(mc) = Jc;
    }
    for (std::size_t j = 0; j < quads.size(); ++j) {
      const auto& qc = quads[j];
      const Eigen::VectorXd Mw = qc.M * w;
      val(mc + static_cast<Eigen::Index>(j)) =
          0.5 * w.dot(Mw) + qc.q.dot(w) + qc.s;
      jac.row(mc + static_cast<Eigen::Index>(j)) = (Mw + qc.q).transpose();
    }
  }
};

struct IpmResult {
  Eigen::VectorXd w;
  Eigen::VectorXd lambda;
  Eigen::VectorXd nu;
  bool converged = false;
  int iterations = 0;
  double dual_residual = 0.0;
  double eq_residual = 0.0;
  double gap = 0.0;
};

struct IpmGates {
  double rd_factor = 1e2;    // dual-residual gate = rd_factor * tol * scale
  double gap_factor = 1.0;   // gap gate = gap_factor * tol * scale
};

// Two-stage interior-point iteration.
//
// Stage one is a barrier method: an outer loop increases t while a damped
// Newton inner loop minimizes t * f0(w) - sum_i log(-c_i(w)) on the equality
// manifold. Monotone descent makes this globally robust, including on thin
// feasible sets, but active constraints limit the attainable stationarity
// accuracy through the barrier Hessian conditioning.
//
// Stage two refines with primal-dual Newton steps on the perturbed KKT
// system from the centered point, which converges quadratically to full
// accuracy. stop_hook, when provided, allows early exit (used by the
// feasibility phase).
template <typename StopHook>
IpmResult ipm_run(const IpmCore& core, const Eigen::VectorXd& w0,
                  const SolverOptions& opts, StopHook&& stop_hook,
                  const IpmGates& gates = {}) {
  const Eigen::Index d = core.dim();
  const Eigen::Index p = core.n_eq();
  const Eigen::Index m = core.n_rows();
  const double t_grow = 20.0;

  IpmResult res;
  res.w = w0;
  res.nu = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd val(m);
  Eigen::MatrixXd jac(m, d);
  core.eval_rows(res.w, val, jac);
  if ((val.array() >= 0.0).any()) {
    throw std::logic_error("ipm_run: start point not strictly feasible");
  }

  const double g_scale = std::max(1.0, core.g.cwiseAbs().maxCoeff());
  const double e_scale =
      p > 0 ? std::max(1.0, core.e.cwiseAbs().maxCoeff()) : 1.0;

  auto f0 = [&](const Eigen::VectorXd& w) {
    return 0.5 * w.dot(core.H * w) + core.g.dot(w);
  };
  auto barrier = [&](const Eigen::VectorXd& v) {
    return -(-v.array()).log().sum();
  };

  auto fill_residuals = [&](double t) {
    res.lambda = (-1.0 / (t * val.array())).matrix();
    Eigen::VectorXd r_dual =
        core.H * res.w + core.g + jac.transpose() * res.lambda;
    if (p > 0) r_dual += core.E.transpose() * res.nu;
    res.dual_residual = r_dual.cwiseAbs().maxCoeff();
    res.eq_residual =
        p > 0 ? (core.E * res.w - core.e).cwiseAbs().maxCoeff() : 0.0;
    res.gap = static_cast<double>(m) / t;
  };

  const double rd_gate = gates.rd_factor * opts.tol * g_scale;
  // Stage one only needs to center the iterate; stationarity below 1e-3 (or
  // the final gate if looser) is enough for stage two to take over.
  const double rd_inner = std::max(1e-3 * g_scale, 0.2 * rd_gate);

  double t = std::max(1.0, static_cast<double>(m) /
                               std::max(1.0, std::abs(f0(res.w))));

  Eigen::VectorXd val_new(m);
  Eigen::MatrixXd jac_new(m, d);
  int newton_steps = 0;

  // ---- Stage one: barrier centering --------------------------------------
  bool stage_one_done = false;
  while (!stage_one_done) {
    int steps_at_t = 0;
    for (;;) {
      if (++steps_at_t > 30 || newton_steps >= opts.max_iter) break;
      ++newton_steps;

      Eigen::VectorXd grad = t * (core.H * res.w + core.g);
      Eigen::MatrixXd hess = t * core.H;
      const Eigen::Index mc = core.n_const_rows();
      for (std::size_t jq = 0; jq < core.quads.size(); ++jq) {
        const double cq = val(mc + static_cast<Eigen::Index>(jq));
        hess += (-1.0 / cq) * core.quads[jq].M;
      }
      const Eigen::ArrayXd inv_c = 1.0 / val.array();
      grad += jac.transpose() * (-inv_c).matrix();
      hess.noalias() +=
          jac.transpose() * (inv_c * inv_c).matrix().asDiagonal() * jac;

      Eigen::VectorXd dw(d);
      Eigen::VectorXd r_eq =
          p > 0 ? (core.E * res.w - core.e).eval() : Eigen::VectorXd();
      if (p > 0) {
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + p, d + p);
        kkt.topLeftCorner(d, d) = hess;
        kkt.topRightCorner(d, p) = core.E.transpose();
        kkt.bottomLeftCorner(p, d) = core.E;
        Eigen::VectorXd rhs(d + p);
        rhs.head(d) = -grad;
        rhs.tail(p) = -r_eq;
        const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
        dw = sol.head(d);
        res.nu = sol.tail(p) / t;
      } else {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
        if (ldlt.info() == Eigen::Success) {
          dw = ldlt.solve(-grad);
        } else {
          dw = hess.partialPivLu().solve(-grad);
        }
      }
      if (!dw.allFinite()) break;

      const double rd_now = (hess * dw).cwiseAbs().maxCoeff() / t;
      const double eq_norm = p > 0 ? r_eq.cwiseAbs().maxCoeff() : 0.0;
      if (opts.trace) {
        std::fprintf(stderr, "barrier t=%.2e newton=%3d rd=%.3e eq=%.3e\n", t,
                     newton_steps, rd_now, eq_norm);
      }
      if (rd_now <= rd_inner && eq_norm <= opts.tol * e_scale) break;

      const double F0 = t * f0(res.w) + barrier(val) + t * g_scale * eq_norm;
      const double slope = grad.dot(dw);
      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Eigen::VectorXd w_new = res.w + alpha * dw;
        core.eval_rows(w_new, val_new, jac_new);
        if ((val_new.array() < 0.0).all()) {
          const double eq_new =
              p > 0 ? (core.E * w_new - core.e).cwiseAbs().maxCoeff() : 0.0;
          const double F_new =
              t * f0(w_new) + barrier(val_new) + t * g_scale * eq_new;
          if (F_new <=
              F0 + 0.25 * alpha * std::min(slope, 0.0) + 1e-12 * std::abs(F0)) {
            accepted = true;
            break;
          }
        }
        alpha *= 0.5;
        if (alpha < 1e-16) break;
      }
      if (!accepted) break;
      res.w += alpha * dw;
      val.swap(val_new);
      jac.swap(jac_new);

      fill_residuals(t);
      res.iterations = newton_steps;
      if (stop_hook(res)) return res;
    }

    fill_residuals(t);
    res.iterations = newton_steps;
    if (stop_hook(res)) return res;

    // Hand over to stage two once the gap is modest (or the budget is gone).
    const double f_scale = std::max(1.0, std::abs(f0(res.w)));
    if (res.gap <= std::max(1e-4, 1e3 * opts.tol) * f_scale ||
        newton_steps >= opts.max_iter) {
      stage_one_done = true;
    } else {
      t *= t_grow;
    }
  }

  // ---- Stage two: primal-dual refinement ---------------------------------
  // Multipliers from the final centering are strictly positive and roughly
  // on the central path.
  res.lambda = (-1.0 / (t * val.array())).cwiseMax(1e-12).matrix();

  Eigen::VectorXd r_dual(d), r_cent(m), r_pri(p);
  auto pd_residuals = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& lam,
                          const Eigen::VectorXd& nu, const Eigen::VectorXd& v,
                          const Eigen::MatrixXd& J, double inv_t) {
    r_dual = core.H * w + core.g + J.transpose() * lam;
    if (p > 0) r_dual += core.E.transpose() * nu;
    r_cent = -(lam.array() * v.array()).matrix() -
             Eigen::VectorXd::Constant(m, inv_t);
    if (p > 0) r_pri = core.E * w - core.e;
  };

  double prev_eta = std::numeric_limits<double>::infinity();
  int slow_iters = 0;
  for (; newton_steps < opts.max_iter; ++newton_steps) {
    const double eta = -val.dot(res.lambda);
    const double t_pd = 10.0 * static_cast<double>(m) / std::max(eta, 1e-300);
    pd_residuals(res.w, res.lambda, res.nu, val, jac, 1.0 / t_pd);

    res.dual_residual = r_dual.cwiseAbs().maxCoeff();
    res.eq_residual = p > 0 ? r_pri.cwiseAbs().maxCoeff() : 0.0;
    res.gap = eta;
    res.iterations = newton_steps;
    if (opts.trace) {
      std::fprintf(stderr, "pd newton=%3d eta=%.3e rd=%.3e\n", newton_steps,
                   eta, res.dual_residual);
    }
    if (stop_hook(res)) return res;
    const double gap_target =
        gates.gap_factor * opts.tol * std::max(1.0, std::abs(f0(res.w)));
    if (res.dual_residual <= rd_gate && res.eq_residual <= opts.tol * e_scale &&
        eta <= gap_target) {
      res.converged = true;
      return res;
    }
    // Refinement creep on degenerate faces: no meaningful progress left.
    if (eta > 0.98 * prev_eta) {
      if (++slow_iters >= 8) return res;
    } else {
      slow_iters = 0;
    }
    prev_eta = eta;

    Eigen::MatrixXd h_eff = core.H;
    const Eigen::Index mc = core.n_const_rows();
    for (std::size_t jq = 0; jq < core.quads.size(); ++jq) {
      h_eff += res.lambda(mc + static_cast<Eigen::Index>(jq)) * core.quads[jq].M;
    }
    h_eff.noalias() += jac.transpose() *
                       (res.lambda.array() / (-val.array())).matrix().asDiagonal() *
                       jac;
    const Eigen::VectorXd rhs_z =
        -r_dual - jac.transpose() * (r_cent.array() / val.array()).matrix();

    Eigen::VectorXd dw(d), dnu(p);
    if (p > 0) {
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + p, d + p);
      kkt.topLeftCorner(d, d) = h_eff;
      kkt.topRightCorner(d, p) = core.E.transpose();
      kkt.bottomLeftCorner(p, d) = core.E;
      Eigen::VectorXd rhs(d + p);
      rhs.head(d) = rhs_z;
      rhs.tail(p) = -r_pri;
      const Eigen::VectorXd sol = kkt.partialPivLu().solve(rhs);
      dw = sol.head(d);
      dnu = sol.tail(p);
    } else {
      dw = h_eff.partialPivLu().solve(rhs_z);
    }
    if (!dw.allFinite()) return res;
    const Eigen::VectorXd dlambda =
        ((r_cent.array() - res.lambda.array() * (jac * dw).array()) /
         val.array())
            .matrix();

    double alpha = 1.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (dlambda(i) < 0.0) alpha = std::min(alpha, -res.lambda(i) / dlambda(i));
    }
    alpha = std::min(1.0, 0.99 * alpha);

    const double r_norm0 =
        std::sqrt(r_dual.squaredNorm() + r_cent.squaredNorm() +
                  (p > 0 ? r_pri.squaredNorm() : 0.0));
    bool accepted = false;
    Eigen::VectorXd w_new, lam_new, nu_new;
    for (int ls = 0; ls < 40; ++ls) {
      w_new = res.w + alpha * dw;
      lam_new = res.lambda + alpha * dlambda;
      nu_new = res.nu + alpha * dnu;
      core.eval_rows(w_new, val_new, jac_new);
      if ((val_new.array() < 0.0).all()) {
        pd_residuals(w_new, lam_new, nu_new, val_new, jac_new, 1.0 / t_pd);
        const double r_norm =
            std::sqrt(r_dual.squaredNorm() + r_cent.squaredNorm() +
                      (p > 0 ? r_pri.squaredNorm() : 0.0));
        if (r_norm <= (1.0 - 0.01 * alpha) * r_norm0) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
      if (alpha < 1e-13) break;
    }
    if (!accepted) {
      // Refinement stalled; report the centered point's residuals.
      pd_residuals(res.w, res.lambda, res.nu, val, jac, 1.0 / t_pd);
      res.dual_residual = r_dual.cwiseAbs().maxCoeff();
      res.eq_residual = p > 0 ? r_pri.cwiseAbs().maxCoeff() : 0.0;
      res.gap = -val.dot(res.lambda);
      const double gap_tgt =
          gates.gap_factor * opts.tol * std::max(1.0, std::abs(f0(res.w)));
      res.converged = res.dual_residual <= rd_gate &&
                      res.eq_residual <= opts.tol * e_scale &&
                      res.gap <= gap_tgt;
      return res;
    }
    res.w = w_new;
    res.lambda = lam_new;
    res.nu = nu_new;
    val.swap(val_new);
    jac.swap(jac_new);
  }
  return res;
}

IpmResult ipm_run(const IpmCore& core, const Eigen::VectorXd& w0,
                  const SolverOptions& opts) {
  return ipm_run(core, w0, opts, [](const IpmResult&) { return false; });
}

// Expands box bounds and the linear block into constant-gradient rows.
IpmCore build_core(const QcqpProblem& p) {
  IpmCore core;
  core.H = p.H;
  core.g = p.g;
  core.E = p.E;
  core.e = p.e;
  core.quads = p.quads;

  std::vector<std::pair<Eigen::VectorXd, double>> rows;
  std::vector<RowTag> tags;
  for (Eigen::Index i = 0; i < p.dim; ++i) {
    if (std::isfinite(p.lo(i))) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(p.dim);
      r(i) = -1.0;
      rows.emplace_back(r, p.lo(i));
      tags.push_back({RowTag::Kind::BoxLo, i});
    }
    if (std::isfinite(p.hi(i))) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(p.dim);
      r(i) = 1.0;
      rows.emplace_back(r, -p.hi(i));
      tags.push_back({RowTag::Kind::BoxHi, i});
    }
  }
  for (Eigen::Index r = 0; r < p.C.rows(); ++r) {
    rows.emplace_back(p.C.row(r).transpose(), p.c(r));
    tags.push_back({RowTag::Kind::Lin, r});
  }
  core.Jc.resize(static_cast<Eigen::Index>(rows.size()), p.dim);
  core.cc.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    core.Jc.row(static_cast<Eigen::Index>(i)) = rows[i].first.transpose();
    core.cc(static_cast<Eigen::Index>(i)) = rows[i].second;
  }
  for (std::size_t j = 0; j < p.quads.size(); ++j) {
    tags.push_back({RowTag::Kind::Quad, static_cast<Eigen::Index>(j)});
  }
  core.tags = std::move(tags);
  return core;
}

// Least-norm-ish starting point: box midpoints projected onto Ez = e.
Eigen::VectorXd heuristic_start(const QcqpProblem& p) {
  Eigen::VectorXd z0(p.dim);
  for (Eigen::Index i = 0; i < p.dim; ++i) {
    const bool lo_f = std::isfinite(p.lo(i));
    const bool hi_f = std::isfinite(p.hi(i));
    if (lo_f && hi_f) {
      z0(i) = 0.5 * (p.lo(i) + p.hi(i));
    } else if (lo_f) {
      z0(i) = p.lo(i) + 1.0;
    } else if (hi_f) {
      z0(i) = p.hi(i) - 1.0;
    } else {
      z0(i) = 0.0;
    }
  }
  if (p.E.rows() > 0) {
    // z = z0 - E^T (E E^T)^+ (E z0 - e): minimum-norm correction.
    const Eigen::VectorXd resid = p.E * z0 - p.e;
    z0 -= p.E.completeOrthogonalDecomposition().solve(resid);
  }
  return z0;
}

double strict_margin(const IpmCore& core, const Eigen::VectorXd& w) {
  if (core.n_rows() == 0) return -kInf;
  Eigen::VectorXd val(core.n_rows());
  Eigen::MatrixXd jac(core.n_rows(), core.dim());
  core.eval_rows(w, val, jac);
  return val.maxCoeff();
}

struct PhaseOneOutcome {
  bool have_point = false;
  Eigen::VectorXd point;
  double t_final = 0.0;     // worst violation at the returned point
  bool eq_consistent = true;
  double eq_residual = 0.0;
};

PhaseOneOutcome run_phase_one(const QcqpProblem& p, const IpmCore& core,
                              const SolverOptions& opts,
                              const Eigen::VectorXd* seed = nullptr) {
  PhaseOneOutcome out;
  const Eigen::Index d = p.dim;
  Eigen::VectorXd z0 = heuristic_start(p);
  if (seed && seed->size() == d && seed->allFinite()) {
    // A near-feasible seed (e.g. a shifted previous solution) converges in a
    // couple of iterations; project it onto the equality manifold first.
    Eigen::VectorXd zs = *seed;
    if (p.E.rows() > 0) {
      zs -= p.E.completeOrthogonalDecomposition().solve(p.E * zs - p.e);
    }
    if (strict_margin(core, zs) < strict_margin(core, z0)) z0 = zs;
  }

  if (p.E.rows() > 0) {
    out.eq_residual = (p.E * z0 - p.e).cwiseAbs().maxCoeff();
    if (out.eq_residual > 1e-8 * std::max(1.0, p.e.cwiseAbs().maxCoeff())) {
      out.eq_consistent = false;  // inconsistent equality system
      return out;
    }
  }
  if (core.n_rows() == 0) {
    out.have_point = true;
    out.point = z0;
    out.t_final = -kInf;
    return out;
  }

  // Phase-I over (z, t): min t  s.t.  c_i(z) - t <= 0, Ez = e.
  IpmCore ph;
  ph.H = Eigen::MatrixXd::Zero(d + 1, d + 1);
  ph.g = Eigen::VectorXd::Zero(d + 1);
  ph.g(d) = 1.0;
  if (p.E.rows() > 0) {
    ph.E = Eigen::MatrixXd::Zero(p.E.rows(), d + 1);
    ph.E.leftCols(d) = p.E;
    ph.e = p.e;
  } else {
    ph.E.resize(0, d + 1);
    ph.e.resize(0);
  }
  ph.Jc.resize(core.Jc.rows(), d + 1);
  ph.Jc.leftCols(d) = core.Jc;
  ph.Jc.col(d).setConstant(-1.0);
  ph.cc = core.cc;
  for (const auto& qc : core.quads) {
    QcqpProblem::QuadConstraint q2;
    q2.M = Eigen::MatrixXd::Zero(d + 1, d + 1);
    q2.M.topLeftCorner(d, d) = qc.M;
    q2.q = Eigen::VectorXd::Zero(d + 1);
    q2.q.head(d) = qc.q;
    q2.q(d) = -1.0;
    q2.s = qc.s;
    ph.quads.push_back(std::move(q2));
  }

  const double c_max0 = strict_margin(core, z0);
  Eigen::VectorXd w0(d + 1);
  w0.head(d) = z0;
  w0(d) = c_max0 + std::max(1.0, 0.1 * std::abs(c_max0));

  // Leave early once a comfortably interior point shows up.
  const double go_margin = 1e-3;
  Eigen::VectorXd best_z = z0;
  double best_margin = c_max0;
  auto hook = [&](const IpmResult& st) {
    const double margin = strict_margin(core, st.w.head(d));
    const bool eq_ok =
        p.E.rows() == 0 ||
        (p.E * st.w.head(d) - p.e).cwiseAbs().maxCoeff() <=
            1e-9 * std::max(1.0, p.e.cwiseAbs().maxCoeff());
    if (eq_ok && margin < best_margin) {
      best_margin = margin;
      best_z = st.w.head(d);
    }
    return eq_ok && margin <= -go_margin;
  };

  SolverOptions ph_opts = opts;
  ph_opts.max_iter = std::max(opts.max_iter, 200);
  ipm_run(ph, w0, ph_opts, hook);

  out.have_point = true;
  out.point = best_z;
  out.t_final = best_margin;
  return out;
}

// Opens a strict interior, scaled by each row's own magnitude but capped so
// the true constraint violation stays below the reporting tolerance.
double pad_width(double delta, double row_scale) {
  return std::min(delta * std::max(1.0, std::abs(row_scale)), 5e-8);
}

void shift_quad_rows(IpmCore& core, double delta) {
  for (auto& qc : core.quads) qc.s -= pad_width(delta, qc.s);
}

void shift_all_rows(IpmCore& core, double delta) {
  for (Eigen::Index i = 0; i < core.cc.size(); ++i) {
    core.cc(i) -= pad_width(delta, core.cc(i));
  }
  shift_quad_rows(core, delta);
}

void scatter_multipliers(const IpmCore& core, const Eigen::VectorXd& lambda,
                         const QcqpProblem& p, QcqpSolution& sol) {
  sol.lambda_box_lo = Eigen::VectorXd::Zero(p.dim);
  sol.lambda_box_hi = Eigen::VectorXd::Zero(p.dim);
  sol.lambda_lin = Eigen::VectorXd::Zero(p.C.rows());
  sol.lambda_quad =
      Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.quads.size()));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(core.tags.size());
       ++i) {
    const auto& tag = core.tags[static_cast<std::size_t>(i)];
    switch (tag.kind) {
      case RowTag::Kind::BoxLo:
        sol.lambda_box_lo(tag.index) = lambda(i);
        break;
      case RowTag::Kind::BoxHi:
        sol.lambda_box_hi(tag.index) = lambda(i);
        break;
      case RowTag::Kind::Lin:
        sol.lambda_lin(tag.index) = lambda(i);
        break;
      case RowTag::Kind::Quad:
        sol.lambda_quad(tag.index) = lambda(i);
        break;
    }
  }
}

}  // namespace

QcqpProblem QcqpProblem::make(Eigen::Index dim) {
  QcqpProblem p;
  p.dim = dim;
  p.H = Eigen::MatrixXd::Zero(dim, dim);
  p.g = Eigen::VectorXd::Zero(dim);
  p.E.resize(0, dim);
  p.e.resize(0);
  p.lo = Eigen::VectorXd::Constant(dim, -kInf);
  p.hi = Eigen::VectorXd::Constant(dim, kInf);
  p.C.resize(0, dim);
  p.c.resize(0);
  return p;
}

void QcqpProblem::validate() const {
  if (dim < 1) throw std::invalid_argument("QcqpProblem: dim must be >= 1");
  if (H.rows() != dim || H.cols() != dim || g.size() != dim) {
    throw std::invalid_argument("QcqpProblem: objective dimension mismatch");
  }
  if (E.cols() != dim || E.rows() != e.size()) {
    throw std::invalid_argument("QcqpProblem: equality block mismatch");
  }
  if (lo.size() != dim || hi.size() != dim) {
    throw std::invalid_argument("QcqpProblem: box dimension mismatch");
  }
  if ((lo.array() > hi.array()).any()) {
    throw std::invalid_argument("QcqpProblem: lo > hi");
  }
  if (C.cols() != dim || C.rows() != c.size()) {
    throw std::invalid_argument("QcqpProblem: linear block mismatch");
  }
  check_psd(H, "H");
  for (const auto& qc : quads) {
    if (qc.M.rows() != dim || qc.M.cols() != dim || qc.q.size() != dim) {
      throw std::invalid_argument("QcqpProblem: quadratic block mismatch");
    }
    check_psd(qc.M, "M_j");
  }
}

double QcqpProblem::objective_value(const Eigen::VectorXd& z) const {
  return 0.5 * z.dot(H * z) + g.dot(z) + c0;
}

double QcqpProblem::max_violation(const Eigen::VectorXd& z) const {
  double v = -kInf;
  if (E.rows() > 0) v = std::max(v, (E * z - e).cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (std::isfinite(lo(i))) v = std::max(v, lo(i) - z(i));
    if (std::isfinite(hi(i))) v = std::max(v, z(i) - hi(i));
  }
  if (C.rows() > 0) v = std::max(v, (C * z + c).maxCoeff());
  for (const auto& qc : quads) {
    v = std::max(v, 0.5 * z.dot(qc.M * z) + qc.q.dot(z) + qc.s);
  }
  return v;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::MaxIterations:
      return "MaxIterations";
  }
  return "?";
}

std::optional<SolveStatus> solve_status_from_string(const std::string& s) {
  if (s == "Optimal") return SolveStatus::Optimal;
  if (s == "Infeasible") return SolveStatus::Infeasible;
  if (s == "MaxIterations") return SolveStatus::MaxIterations;
  return std::nullopt;
}

FeasibilityResult feasibility_phase(const QcqpProblem& p,
                                    const SolverOptions& opts) {
  p.validate();
  const IpmCore core = build_core(p);
  const PhaseOneOutcome ph = run_phase_one(p, core, opts);
  FeasibilityResult res;
  if (!ph.eq_consistent) {
    res.feasible = false;
    res.max_violation = ph.eq_residual;
    return res;
  }
  res.max_violation = ph.t_final;
  res.feasible = ph.t_final <= 0.0;
  if (res.feasible) res.point = ph.point;
  return res;
}

QcqpSolution solve(const QcqpProblem& p, const SolverOptions& opts,
                   const Eigen::VectorXd* warm_start) {
  p.validate();
  QcqpSolution sol;
  IpmCore core = build_core(p);
  const Eigen::Index m = core.n_rows();

  // Equality-constrained (or unconstrained) QP: one exact KKT solve.
  if (m == 0) {
    const Eigen::Index d = p.dim;
    const Eigen::Index q = p.E.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(d + q, d + q);
    kkt.topLeftCorner(d, d) = p.H;
    if (q > 0) {
      kkt.topRightCorner(d, q) = p.E.transpose();
      kkt.bottomLeftCorner(q, d) = p.E;
    }
    Eigen::VectorXd rhs(d + q);
    rhs.head(d) = -p.g;
    if (q > 0) rhs.tail(q) = p.e;
    const Eigen::VectorXd zz = kkt.fullPivLu().solve(rhs);
    sol.z = zz.head(d);
    sol.nu = zz.tail(q);
    sol.objective = p.objective_value(sol.z);
    Eigen::VectorXd stat = p.H * sol.z + p.g;
    if (q > 0) stat += p.E.transpose() * sol.nu;
    sol.dual_residual = stat.cwiseAbs().maxCoeff();
    sol.primal_residual = std::max(0.0, p.max_violation(sol.z));
    sol.complementarity = 0.0;
    sol.lambda_box_lo = Eigen::VectorXd::Zero(p.dim);
    sol.lambda_box_hi = Eigen::VectorXd::Zero(p.dim);
    sol.lambda_lin.resize(0);
    sol.lambda_quad.resize(0);
    const double scale = std::max(1.0, p.g.cwiseAbs().maxCoeff());
    sol.status = (sol.dual_residual <= 1e2 * opts.tol * scale &&
                  sol.primal_residual <= kFeasReportTol)
                     ? SolveStatus::Optimal
                     : SolveStatus::MaxIterations;
    return sol;
  }

  // Find a strictly feasible start: warm start if usable, else phase-I.
  Eigen::VectorXd z0;
  bool have_start = false;
  if (warm_start && warm_start->size() == p.dim) {
    const double eq_res =
        p.E.rows() > 0 ? (p.E * *warm_start - p.e).cwiseAbs().maxCoeff() : 0.0;
    if (strict_margin(core, *warm_start) <= -kStartMargin &&
        eq_res <= 1e-6 * std::max(1.0, p.e.size() ? p.e.cwiseAbs().maxCoeff() : 1.0)) {
      z0 = *warm_start;
      have_start = true;
    }
  }

  if (!have_start) {
    const PhaseOneOutcome ph = run_phase_one(p, core, opts, warm_start);
    if (!ph.eq_consistent) {
      sol.status = SolveStatus::Infeasible;
      sol.infeasibility_certificate = ph.eq_residual;
      sol.z = Eigen::VectorXd::Zero(p.dim);
      return sol;
    }
    // Beyond this the interior pad cannot cover the violation.
    if (ph.t_final > 2e-8) {
      sol.status = SolveStatus::Infeasible;
      sol.infeasibility_certificate = ph.t_final;
      sol.z = ph.point;
      return sol;
    }
    bool padded = false;
    if (ph.t_final <= -kStartMargin) {
      z0 = ph.point;
    } else {
      // Feasible but without a usable interior: open one with a small
      // relative pad on the quadratic rows (and on every row if that is not
      // enough). The pad bounds the achievable stationarity accuracy, which
      // the acceptance gate below reflects.
      const double delta = std::max(ph.t_final, 0.0) + kInteriorPad;
      shift_quad_rows(core, delta);
      z0 = ph.point;
      if (strict_margin(core, z0) > -kStartMargin) {
        shift_all_rows(core, delta);
      }
      padded = true;
    }
    have_start = true;
    if (padded) {
      IpmGates gates;
      gates.rd_factor = kPaddedDualGate / opts.tol;
      gates.gap_factor = 1e3;  // the pad width caps the useful precision
      const IpmResult run = ipm_run(
          core, z0, opts, [](const IpmResult&) { return false; }, gates);
      sol.z = run.w;
      sol.iterations = run.iterations;
      sol.objective = p.objective_value(sol.z);
      sol.dual_residual = run.dual_residual;
      sol.complementarity = run.gap;
      sol.primal_residual =
          std::max(run.eq_residual, std::max(0.0, p.max_violation(sol.z)));
      sol.nu = run.nu;
      scatter_multipliers(core, run.lambda, p, sol);
      sol.status = (run.converged && sol.primal_residual <= kFeasReportTol)
                       ? SolveStatus::Optimal
                       : SolveStatus::MaxIterations;
      return sol;
    }
  }

  const IpmResult run = ipm_run(core, z0, opts);

  sol.z = run.w;
  sol.iterations = run.iterations;
  sol.objective = p.objective_value(sol.z);
  sol.dual_residual = run.dual_residual;
  sol.complementarity = run.gap;
  sol.primal_residual =
      std::max(run.eq_residual, std::max(0.0, p.max_violation(sol.z)));
  sol.nu = run.nu;
  scatter_multipliers(core, run.lambda, p, sol);
  sol.status = (run.converged && sol.primal_residual <= kFeasReportTol)
                   ? SolveStatus::Optimal
                   : SolveStatus::MaxIterations;
  return sol;
}

void dump_problem(std::ostream& os, const QcqpProblem& p) {
  os << "qcqp dim=" << p.dim << " eq=" << p.E.rows() << " lin=" << p.C.rows()
     << " quad=" << p.quads.size() << "\n";
  write_matrix_block(os, "H", p.H);
  write_matrix_block(os, "g", p.g);
  Eigen::MatrixXd c0m(1, 1);
  c0m(0, 0) = p.c0;
  write_matrix_block(os, "c0", c0m);
  if (p.E.rows() > 0) {
    write_matrix_block(os, "E", p.E);
    write_matrix_block(os, "e", p.e);
  }
  write_matrix_block(os, "lo", p.lo);
  write_matrix_block(os, "hi", p.hi);
  if (p.C.rows() > 0) {
    write_matrix_block(os, "C", p.C);
    write_matrix_block(os, "c", p.c);
  }
  for (std::size_t j = 0; j < p.quads.size(); ++j) {
    const std::string suffix = std::to_string(j);
    write_matrix_block(os, "M" + suffix, p.quads[j].M);
    write_matrix_block(os, "q" + suffix, p.quads[j].q);
    Eigen::MatrixXd sm(1, 1);
    sm(0, 0) = p.quads[j].s;
    write_matrix_block(os, "s" + suffix, sm);
  }
}

}  // namespace mpsf
