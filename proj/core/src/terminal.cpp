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

#include "mpsf/terminal.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mpsf/matrix_io.hpp"

namespace mpsf {

namespace {

constexpr double kDareRelTol = 1e-8;
constexpr double kClfTol = 1e-8;
constexpr double kInvarianceTol = 1e-9;
constexpr int kMaxDoublingIters = 200;

double spectral_radius(const Eigen::MatrixXd& M) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(M, /*computeEigenvectors=*/false)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

}  // namespace

double dare_residual(const LinearDynamics& dyn, const Eigen::MatrixXd& Q,
                     const Eigen::MatrixXd& R, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd& A = dyn.A();
  const Eigen::MatrixXd& B = dyn.B();
  const Eigen::MatrixXd S = R + B.transpose() * P * B;
  const Eigen::MatrixXd res = A.transpose() * P * A - P -
                              A.transpose() * P * B * S.ldlt().solve(
                                  B.transpose() * P * A) +
                              Q;
  return res.norm() / std::max(P.norm(), 1e-300);
}

TerminalIngredients solve_riccati(const LinearDynamics& dyn,
                                  const Eigen::MatrixXd& Q,
                                  const Eigen::MatrixXd& R) {
  const Eigen::MatrixXd& A = dyn.A();
  const Eigen::MatrixXd& B = dyn.B();
  const Eigen::Index n = dyn.state_dim();
  if (Q.rows() != n || Q.cols() != n || R.rows() != dyn.input_dim() ||
      R.cols() != dyn.input_dim()) {
    throw std::invalid_argument("solve_riccati: weight dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> R_llt(R);
  if (R_llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_riccati: R must be positive definite");
  }

  // Structure-preserving doubling: A_k converges to zero while H_k converges
  // to the stabilizing solution.
  Eigen::MatrixXd A_k = A;
  Eigen::MatrixXd G_k = B * R_llt.solve(B.transpose());
  Eigen::MatrixXd H_prev;
  Eigen::MatrixXd H_k = Q;

  int iter = 0;
  do {
    if (++iter > kMaxDoublingIters) {
      throw std::runtime_error("solve_riccati: doubling did not converge");
    }
    H_prev = H_k;
    const Eigen::MatrixXd W =
        Eigen::MatrixXd::Identity(n, n) + G_k * H_prev;
    const Eigen::PartialPivLU<Eigen::MatrixXd> W_lu(W);
    const Eigen::MatrixXd V1 = W_lu.solve(A_k);
    const Eigen::MatrixXd V2 = W_lu.solve(G_k.transpose()).transpose();
    G_k += A_k * V2 * A_k.transpose();
    H_k = H_prev + V1.transpose() * H_prev * A_k;
    A_k *= V1;
    if (!H_k.allFinite()) {
      throw std::runtime_error("solve_riccati: iterate diverged");
    }
  } while ((H_k - H_prev).norm() > 1e-14 * std::max(1.0, H_k.norm()));

  TerminalIngredients ti;
  ti.P = 0.5 * (H_k + H_k.transpose());

  Eigen::LLT<Eigen::MatrixXd> P_llt(ti.P);
  if (P_llt.info() != Eigen::Success) {
    throw std::runtime_error("solve_riccati: indefinite iterate");
  }
  const Eigen::MatrixXd S = R + B.transpose() * ti.P * B;
  ti.K = -S.ldlt().solve(B.transpose() * ti.P * A);

  if (dare_residual(dyn, Q, R, ti.P) > kDareRelTol) {
    throw std::runtime_error("solve_riccati: residual above tolerance");
  }
  if (spectral_radius(A + B * ti.K) >= 1.0) {
    throw std::runtime_error(
        "solve_riccati: closed loop not Schur stable; (A,B) not stabilizable?");
  }
  ti.tau = 0.0;
  return ti;
}

double terminal_set_level(const TerminalIngredients& ti,
                          const BoxConstraints& box, double margin) {
  if (!(margin > 0.0 && margin <= 1.0)) {
    throw std::invalid_argument("terminal_set_level: margin must be in (0,1]");
  }
  const Eigen::Index n = ti.P.rows();
  Eigen::LLT<Eigen::MatrixXd> P_llt(ti.P);
  if (P_llt.info() != Eigen::Success) {
    throw std::invalid_argument("terminal_set_level: P must be positive definite");
  }

  // Support function of { x'Px <= tau } along h is sqrt(tau h'P^{-1}h), so
  // each halfspace h'x <= b caps tau at b^2 / (h'P^{-1}h).
  double tau = std::numeric_limits<double>::infinity();
  auto apply_halfspace = [&](const Eigen::VectorXd& h, double b) {
    if (!std::isfinite(b)) return;
    if (h.norm() == 0.0) return;
    if (b <= 0.0) {
      throw std::runtime_error(
          "terminal_set_level: origin not in the interior of a halfspace");
    }
    const double hPinvh = h.dot(P_llt.solve(h));
    tau = std::min(tau, b * b / hPinvh);
  };

  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = 1.0;
    apply_halfspace(e, box.x_hi(i));
    apply_halfspace(-e, -box.x_lo(i));
  }
  for (Eigen::Index j = 0; j < ti.K.rows(); ++j) {
    const Eigen::VectorXd h = ti.K.row(j).transpose();
    apply_halfspace(h, box.u_hi(j));
    apply_halfspace(-h, -box.u_lo(j));
  }
  if (!std::isfinite(tau)) {
    throw std::runtime_error("terminal_set_level: no active halfspace");
  }
  return margin * tau;
}

TerminalCertificate certify_terminal_ingredients(const LinearDynamics& dyn,
                                        const StabilityCost& cost,
                                        const TerminalIngredients& ti,
                                        const BoxConstraints& box,
                                        int samples) {
  TerminalCertificate cert;
  cert.samples = samples;

  const Eigen::MatrixXd Acl = dyn.A() + dyn.B() * ti.K;
  const Eigen::MatrixXd clf = Acl.transpose() * ti.P * Acl - ti.P + cost.Q() +
                              ti.K.transpose() * cost.R() * ti.K;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (clf + clf.transpose()));
  cert.clf_max_eigenvalue = es.eigenvalues().maxCoeff();
  cert.clf_ok = cert.clf_max_eigenvalue <= kClfTol;

  // Boundary samples x'Px = tau via x = sqrt(tau) L^{-T} d/|d| with P = LL'.
  const Eigen::Index n = dyn.state_dim();
  Eigen::LLT<Eigen::MatrixXd> P_llt(ti.P);
  if (P_llt.info() != Eigen::Success) {
    throw std::invalid_argument("certify_terminal_ingredients: P must be positive definite");
  }
  const Eigen::MatrixXd Lt = P_llt.matrixU();

  std::mt19937_64 rng(0x5eedu);  // fixed seed: the certificate is deterministic
  std::normal_distribution<double> gauss(0.0, 1.0);

  double worst_inv = -std::numeric_limits<double>::infinity();
  double worst_con = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d(i) = gauss(rng);
    if (d.norm() == 0.0) d(0) = 1.0;
    d.normalize();
    const Eigen::VectorXd x =
        std::sqrt(std::max(ti.tau, 0.0)) *
        Lt.triangularView<Eigen::Upper>().solve(d);

    const Eigen::VectorXd x_next = Acl * x;
    worst_inv = std::max(worst_inv, x_next.dot(ti.P * x_next) - ti.tau);

    const Eigen::VectorXd u = ti.K * x;
    double con = -std::numeric_limits<double>::infinity();
    con = std::max(con, (x - box.x_hi).maxCoeff());
    con = std::max(con, (box.x_lo - x).maxCoeff());
    con = std::max(con, (u - box.u_hi).maxCoeff());
    con = std::max(con, (box.u_lo - u).maxCoeff());
    worst_con = std::max(worst_con, con);
  }
  cert.max_invariance_violation = worst_inv;
  cert.max_constraint_violation = worst_con;
  cert.invariant_ok = worst_inv <= kInvarianceTol * std::max(1.0, ti.tau);
  cert.admissible_ok = worst_con <= 1e-12;
  return cert;
}

std::string TerminalCertificate::summary() const {
  std::ostringstream os;
  os << "terminal certificate (" << samples << " boundary samples)\n"
     << "  clf max eigenvalue:        " << clf_max_eigenvalue << "  "
     << (clf_ok ? "PASS" : "FAIL") << "\n"
     << "  invariance violation:      " << max_invariance_violation << "  "
     << (invariant_ok ? "PASS" : "FAIL") << "\n"
     << "  constraint violation:      " << max_constraint_violation << "  "
     << (admissible_ok ? "PASS" : "FAIL") << "\n";
  return os.str();
}

Eigen::VectorXd terminal_controller(const TerminalIngredients& ti,
                                    const Eigen::VectorXd& x,
                                    const std::optional<ReferencePoint>& r) {
  if (x.size() != ti.K.cols()) {
    throw std::invalid_argument("terminal_controller: dimension mismatch");
  }
  if (!r) return ti.K * x;
  if (r->x.size() != ti.K.cols() || r->u.size() != ti.K.rows()) {
    throw std::invalid_argument("terminal_controller: reference dimension mismatch");
  }
  return r->u + ti.K * (x - r->x);
}

void save_ingredients_csv(const std::string& path,
                          const TerminalIngredients& ti) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_matrix_block(os, "P", ti.P);
  write_matrix_block(os, "K", ti.K);
  Eigen::MatrixXd tau(1, 1);
  tau(0, 0) = ti.tau;
  write_matrix_block(os, "tau", tau);
}

TerminalIngredients load_ingredients_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  TerminalIngredients ti;
  bool have_p = false, have_k = false, have_tau = false;
  std::string name;
  Eigen::MatrixXd M;
  while (read_matrix_block(is, name, M)) {
    if (name == "P") {
      ti.P = M;
      have_p = true;
    } else if (name == "K") {
      ti.K = M;
      have_k = true;
    } else if (name == "tau") {
      ti.tau = M(0, 0);
      have_tau = true;
    } else {
      throw std::runtime_error("unknown ingredient block: " + name);
    }
  }
  if (!have_p || !have_k || !have_tau) {
    throw std::runtime_error("incomplete ingredient bundle: " + path);
  }
  return ti;
}

}  // namespace mpsf
