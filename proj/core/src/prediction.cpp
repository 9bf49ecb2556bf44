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

#include "mpsf/prediction.hpp"

#include <stdexcept>

namespace mpsf {

PredictionMatrices PredictionMatrices::build(const LinearDynamics& dyn,
                                             Eigen::Index N) {
  if (N < 1) throw std::invalid_argument("PredictionMatrices: N must be >= 1");
  PredictionMatrices pm;
  pm.n = dyn.state_dim();
  pm.m = dyn.input_dim();
  pm.N = N;
  pm.A_pow.reserve(static_cast<std::size_t>(N) + 1);
  pm.A_pow.push_back(Eigen::MatrixXd::Identity(pm.n, pm.n));
  for (Eigen::Index i = 1; i <= N; ++i) {
    pm.A_pow.push_back(dyn.A() * pm.A_pow.back());
  }
  pm.A_stack.resize((N + 1) * pm.n, pm.n);
  for (Eigen::Index i = 0; i <= N; ++i) {
    pm.A_stack.middleRows(i * pm.n, pm.n) = pm.A_pow[static_cast<std::size_t>(i)];
  }
  pm.input_map = Eigen::MatrixXd::Zero((N + 1) * pm.n, N * pm.m);
  for (Eigen::Index i = 1; i <= N; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      pm.input_map.block(i * pm.n, j * pm.m, pm.n, pm.m) =
          pm.A_pow[static_cast<std::size_t>(i - 1 - j)] * dyn.B();
    }
  }
  return pm;
}

CostCondenser::CostCondenser(const PredictionMatrices& pred,
                             const StabilityCost& cost, bool zero_terminal)
    : pred_(pred), cost_(cost), zero_terminal_(zero_terminal) {
  if (cost_.state_dim() != pred_.n || cost_.input_dim() != pred_.m) {
    throw std::invalid_argument("CostCondenser: cost dimension mismatch");
  }
  const Eigen::Index n = pred_.n;
  const Eigen::Index m = pred_.m;
  const Eigen::Index N = pred_.N;

  // W Gamma, blockwise: stage rows weighted by Q, terminal row by P.
  Eigen::MatrixXd WG = pred_.input_map;
  for (Eigen::Index i = 0; i < N; ++i) {
    WG.middleRows(i * n, n) = cost_.Q() * WG.middleRows(i * n, n);
  }
  if (zero_terminal_) {
    WG.middleRows(N * n, n).setZero();
  } else {
    WG.middleRows(N * n, n) = cost_.P() * WG.middleRows(N * n, n);
  }
  M_ = 2.0 * (pred_.input_map.transpose() * WG);
  for (Eigen::Index j = 0; j < N; ++j) {
    M_.block(j * m, j * m, m, m) += 2.0 * cost_.R();
  }
  M_ = 0.5 * (M_ + M_.transpose());
}

Eigen::VectorXd CostCondenser::weighted_deviation(const Eigen::VectorXd& d) const {
  const Eigen::Index n = pred_.n;
  const Eigen::Index N = pred_.N;
  Eigen::VectorXd wd((N + 1) * n);
  for (Eigen::Index i = 0; i < N; ++i) {
    wd.segment(i * n, n) = cost_.Q() * d.segment(i * n, n);
  }
  if (zero_terminal_) {
    wd.segment(N * n, n).setZero();
  } else {
    wd.segment(N * n, n) = cost_.P() * d.segment(N * n, n);
  }
  return wd;
}

QuadraticForm CostCondenser::form(
    const Eigen::VectorXd& x0,
    const std::vector<ReferencePoint>* r_window) const {
  const Eigen::Index n = pred_.n;
  const Eigen::Index m = pred_.m;
  const Eigen::Index N = pred_.N;
  if (x0.size() != n) throw std::invalid_argument("CostCondenser: x0 mismatch");
  if (r_window && static_cast<Eigen::Index>(r_window->size()) != N + 1) {
    throw std::invalid_argument("CostCondenser: r_window must hold N+1 points");
  }

  Eigen::VectorXd d = pred_.A_stack * x0;
  if (r_window) {
    for (Eigen::Index i = 0; i <= N; ++i) {
      d.segment(i * n, n) -= (*r_window)[static_cast<std::size_t>(i)].x;
    }
  }
  const Eigen::VectorXd wd = weighted_deviation(d);

  QuadraticForm f;
  f.M = M_;
  f.q = 2.0 * (pred_.input_map.transpose() * wd);
  f.s = d.dot(wd);
  if (r_window) {
    for (Eigen::Index i = 0; i < N; ++i) {
      const Eigen::VectorXd& ur = (*r_window)[static_cast<std::size_t>(i)].u;
      const Eigen::VectorXd Rur = cost_.R() * ur;
      f.q.segment(i * m, m) -= 2.0 * Rur;
      f.s += ur.dot(Rur);
    }
  }
  return f;
}

QuadraticForm terminal_ellipsoid_form(const PredictionMatrices& pred,
                                      const Eigen::MatrixXd& P, double tau,
                                      const Eigen::VectorXd& x0,
                                      const Eigen::VectorXd& x_ref_N) {
  const Eigen::Index n = pred.n;
  const Eigen::Index N = pred.N;
  const auto GN = pred.input_map.block(N * n, 0, n, N * pred.m);
  const Eigen::VectorXd dN = pred.A_pow[static_cast<std::size_t>(N)] * x0 - x_ref_N;
  const Eigen::MatrixXd PGN = P * GN;
  QuadraticForm f;
  f.M = 2.0 * (GN.transpose() * PGN);
  f.M = 0.5 * (f.M + f.M.transpose());
  f.q = 2.0 * (PGN.transpose() * dN);
  f.s = dN.dot(P * dN) - tau;
  return f;
}

void state_box_rows(const PredictionMatrices& pred, const BoxConstraints& box,
                    const Eigen::VectorXd& x0, Eigen::MatrixXd& C,
                    Eigen::VectorXd& c) {
  const Eigen::Index n = pred.n;
  const Eigen::Index N = pred.N;
  const Eigen::Index rows = 2 * n * (N - 1);
  C.resize(rows, N * pred.m);
  c.resize(rows);
  Eigen::Index r = 0;
  for (Eigen::Index i = 1; i < N; ++i) {
    const auto Gi = pred.state_rows(i);
    const Eigen::VectorXd Ai_x0 = pred.A_pow[static_cast<std::size_t>(i)] * x0;
    C.middleRows(r, n) = Gi;
    c.segment(r, n) = Ai_x0 - box.x_hi;
    r += n;
    C.middleRows(r, n) = -Gi;
    c.segment(r, n) = box.x_lo - Ai_x0;
    r += n;
  }
}

Eigen::VectorXd stack_inputs(const std::vector<Eigen::VectorXd>& u_seq) {
  if (u_seq.empty()) throw std::invalid_argument("stack_inputs: empty sequence");
  const Eigen::Index m = u_seq.front().size();
  Eigen::VectorXd z(static_cast<Eigen::Index>(u_seq.size()) * m);
  for (std::size_t i = 0; i < u_seq.size(); ++i) {
    if (u_seq[i].size() != m) {
      throw std::invalid_argument("stack_inputs: inconsistent input dimension");
    }
    z.segment(static_cast<Eigen::Index>(i) * m, m) = u_seq[i];
  }
  return z;
}

std::vector<Eigen::VectorXd> unstack_inputs(const Eigen::VectorXd& z,
                                            Eigen::Index m) {
  if (m < 1 || z.size() % m != 0) {
    throw std::invalid_argument("unstack_inputs: size not a multiple of m");
  }
  std::vector<Eigen::VectorXd> u_seq;
  const Eigen::Index N = z.size() / m;
  u_seq.reserve(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i) u_seq.push_back(z.segment(i * m, m));
  return u_seq;
}

}  // namespace mpsf
