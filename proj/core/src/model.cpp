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

#include "mpsf/model.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mpsf/matrix_io.hpp"

namespace mpsf {

namespace {
constexpr double kDynamicsResidualTol = 1e-9;
}

LinearDynamics::LinearDynamics(Eigen::MatrixXd A, Eigen::MatrixXd B)
    : A_(std::move(A)), B_(std::move(B)) {
  if (A_.rows() < 1 || A_.rows() != A_.cols()) {
    throw std::invalid_argument("LinearDynamics: A must be square, n >= 1");
  }
  if (B_.rows() != A_.rows() || B_.cols() < 1) {
    throw std::invalid_argument("LinearDynamics: B must be n x m, m >= 1");
  }
  if (!A_.allFinite() || !B_.allFinite()) {
    throw std::invalid_argument("LinearDynamics: entries must be finite");
  }
}

BoxConstraints::BoxConstraints(Eigen::VectorXd x_lo_in, Eigen::VectorXd x_hi_in,
                               Eigen::VectorXd u_lo_in, Eigen::VectorXd u_hi_in)
    : x_lo(std::move(x_lo_in)),
      x_hi(std::move(x_hi_in)),
      u_lo(std::move(u_lo_in)),
      u_hi(std::move(u_hi_in)) {
  if (x_lo.size() != x_hi.size() || u_lo.size() != u_hi.size()) {
    throw std::invalid_argument("BoxConstraints: bound dimension mismatch");
  }
  if ((x_lo.array() > 0.0).any() || (x_hi.array() < 0.0).any() ||
      (u_lo.array() > 0.0).any() || (u_hi.array() < 0.0).any()) {
    throw std::invalid_argument("BoxConstraints: origin must lie inside X x U");
  }
  if ((u_lo.array() >= u_hi.array()).any()) {
    throw std::invalid_argument("BoxConstraints: input box must have interior");
  }
}

bool BoxConstraints::state_inside(const Eigen::VectorXd& x, double tol) const {
  return (x.array() >= x_lo.array() - tol).all() &&
         (x.array() <= x_hi.array() + tol).all();
}

bool BoxConstraints::input_inside(const Eigen::VectorXd& u, double tol) const {
  return (u.array() >= u_lo.array() - tol).all() &&
         (u.array() <= u_hi.array() + tol).all();
}

ReferenceTrajectory::ReferenceTrajectory(std::vector<ReferencePoint> points,
                                         double tightening)
    : points_(std::move(points)), tightening_(tightening) {
  if (points_.empty()) {
    throw std::invalid_argument("ReferenceTrajectory: empty point list");
  }
  if (!(tightening_ > 1.0)) {
    throw std::invalid_argument("ReferenceTrajectory: tightening must be > 1");
  }
  const Eigen::Index n = points_.front().x.size();
  const Eigen::Index m = points_.front().u.size();
  for (const auto& p : points_) {
    if (p.x.size() != n || p.u.size() != m) {
      throw std::invalid_argument("ReferenceTrajectory: inconsistent dimensions");
    }
  }
}

ReferenceTrajectory ReferenceTrajectory::zero(Eigen::Index n, Eigen::Index m,
                                              Eigen::Index length,
                                              double tightening) {
  std::vector<ReferencePoint> pts(
      static_cast<std::size_t>(length),
      ReferencePoint{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(m)});
  return ReferenceTrajectory(std::move(pts), tightening);
}

const ReferencePoint& ReferenceTrajectory::at(Eigen::Index k) const {
  if (k < 0 || k >= length()) {
    throw std::out_of_range("ReferenceTrajectory: index out of range");
  }
  return points_[static_cast<std::size_t>(k)];
}

bool ReferenceTrajectory::is_zero() const {
  for (const auto& p : points_) {
    if (p.x.squaredNorm() != 0.0 || p.u.squaredNorm() != 0.0) return false;
  }
  return true;
}

std::vector<ReferencePoint> ReferenceTrajectory::window(Eigen::Index k,
                                                        Eigen::Index N) const {
  if (k < 0 || N < 0 || k + N > max_index()) {
    throw std::out_of_range("ReferenceTrajectory: window exceeds stored range");
  }
  std::vector<ReferencePoint> out;
  out.reserve(static_cast<std::size_t>(N + 1));
  for (Eigen::Index i = 0; i <= N; ++i) {
    out.push_back(points_[static_cast<std::size_t>(k + i)]);
  }
  return out;
}

Eigen::VectorXd step(const LinearDynamics& dyn, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u) {
  if (x.size() != dyn.state_dim() || u.size() != dyn.input_dim()) {
    throw std::invalid_argument("step: dimension mismatch");
  }
  return dyn.A() * x + dyn.B() * u;
}

std::vector<Eigen::VectorXd> rollout_open_loop(
    const LinearDynamics& dyn, const Eigen::VectorXd& x0,
    const std::vector<Eigen::VectorXd>& u_seq) {
  if (u_seq.empty()) {
    throw std::invalid_argument("rollout_open_loop: need at least one input");
  }
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(u_seq.size() + 1);
  xs.push_back(x0);
  for (const auto& u : u_seq) {
    xs.push_back(step(dyn, xs.back(), u));
  }
  return xs;
}

ReferenceValidation validate_reference(const LinearDynamics& dyn,
                                       const ReferenceTrajectory& traj,
                                       const BoxConstraints& box) {
  ReferenceValidation report;
  const double sigma = traj.tightening();
  for (Eigen::Index k = 0; k <= traj.max_index(); ++k) {
    const auto& p = traj.at(k);
    if (k < traj.max_index()) {
      const Eigen::VectorXd pred = step(dyn, p.x, p.u);
      const double res = (traj.at(k + 1).x - pred).norm();
      if (res > kDynamicsResidualTol) {
        report.defects.push_back(
            {ReferenceDefect::Kind::DynamicsResidual, k + 1, res});
      }
    }
    if (!box.state_inside(sigma * p.x)) {
      const double mag =
          std::max((sigma * p.x - box.x_hi).maxCoeff(),
                   (box.x_lo - sigma * p.x).maxCoeff());
      report.defects.push_back({ReferenceDefect::Kind::StateInterior, k, mag});
    }
    if (!box.input_inside(sigma * p.u)) {
      const double mag =
          std::max((sigma * p.u - box.u_hi).maxCoeff(),
                   (box.u_lo - sigma * p.u).maxCoeff());
      report.defects.push_back({ReferenceDefect::Kind::InputInterior, k, mag});
    }
  }
  return report;
}

void save_trajectory_csv(const std::string& path,
                         const ReferenceTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const Eigen::Index n = traj.at(0).x.size();
  const Eigen::Index m = traj.at(0).u.size();
  os << 'k';
  for (Eigen::Index i = 1; i <= n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= m; ++i) os << ",u" << i;
  os << '\n';
  for (Eigen::Index k = 0; k <= traj.max_index(); ++k) {
    std::vector<double> fields;
    fields.push_back(static_cast<double>(k));
    const auto& p = traj.at(k);
    for (Eigen::Index i = 0; i < n; ++i) fields.push_back(p.x(i));
    for (Eigen::Index i = 0; i < m; ++i) fields.push_back(p.u(i));
    os << csv_line(fields) << '\n';
  }
}

ReferenceTrajectory load_trajectory_csv(const std::string& path,
                                        double tightening) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error("empty file: " + path);
  const auto cols = split_csv(header);
  Eigen::Index n = 0, m = 0;
  for (const auto& c : cols) {
    if (c.size() > 1 && c[0] == 'x') ++n;
    if (c.size() > 1 && c[0] == 'u') ++m;
  }
  if (cols.empty() || cols[0] != "k" || n < 1 || m < 1 ||
      static_cast<Eigen::Index>(cols.size()) != 1 + n + m) {
    throw std::runtime_error("bad trajectory header: " + header);
  }
  std::vector<ReferencePoint> pts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (static_cast<Eigen::Index>(f.size()) != 1 + n + m) {
      throw std::runtime_error("bad trajectory row: " + line);
    }
    ReferencePoint p{Eigen::VectorXd(n), Eigen::VectorXd(m)};
    for (Eigen::Index i = 0; i < n; ++i) p.x(i) = std::stod(f[1 + i]);
    for (Eigen::Index i = 0; i < m; ++i) p.u(i) = std::stod(f[1 + n + i]);
    pts.push_back(std::move(p));
  }
  return ReferenceTrajectory(std::move(pts), tightening);
}

}  // namespace mpsf
