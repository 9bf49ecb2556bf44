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

#include "mpsf/sim.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mpsf/matrix_io.hpp"

namespace mpsf {

namespace {
constexpr double kBoxTol = 1e-9;
constexpr double kDecreaseTol = 1e-6;
constexpr double kPerformanceTol = 1e-6;
constexpr double kLogConsistencyTol = 1e-9;

double stage_cost_at(const StabilityCost& cost,
                     const std::optional<ReferenceTrajectory>& reference,
                     Eigen::Index k, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u) {
  std::optional<ReferencePoint> r;
  if (reference) r = reference->at(k);
  return stage_cost(cost, x, u, r);
}
}  // namespace

DesiredInputPolicy DesiredInputPolicy::recorded(Eigen::MatrixXd trace) {
  DesiredInputPolicy p;
  p.kind_ = Kind::Recorded;
  p.trace_ = std::move(trace);
  return p;
}

DesiredInputPolicy DesiredInputPolicy::reference_feedforward(
    double noise_amplitude) {
  DesiredInputPolicy p;
  p.kind_ = Kind::ReferenceFeedforward;
  p.noise_amplitude_ = noise_amplitude;
  return p;
}

DesiredInputPolicy DesiredInputPolicy::tracking_feedback(
    Eigen::MatrixXd gain, double noise_amplitude) {
  DesiredInputPolicy p;
  p.kind_ = Kind::TrackingFeedback;
  p.gain_ = std::move(gain);
  p.noise_amplitude_ = noise_amplitude;
  return p;
}

DesiredInputPolicy DesiredInputPolicy::destabilizing_feedback(
    Eigen::MatrixXd gain, Eigen::VectorXd bias) {
  DesiredInputPolicy p;
  p.kind_ = Kind::DestabilizingFeedback;
  p.gain_ = std::move(gain);
  p.bias_ = std::move(bias);
  return p;
}

DesiredInputPolicy DesiredInputPolicy::composite(
    std::vector<std::pair<Eigen::Index, DesiredInputPolicy>> schedule) {
  if (schedule.empty()) {
    throw std::invalid_argument("DesiredInputPolicy: empty composite");
  }
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].first <= schedule[i - 1].first) {
      throw std::invalid_argument(
          "DesiredInputPolicy: composite schedule must be strictly increasing");
    }
  }
  DesiredInputPolicy p;
  p.kind_ = Kind::Composite;
  p.schedule_ = std::move(schedule);
  return p;
}

Eigen::VectorXd DesiredInputPolicy::desired(Eigen::Index k,
                                            const Eigen::VectorXd& x,
                                            const ReferencePoint& r,
                                            std::mt19937_64& rng) const {
  switch (kind_) {
    case Kind::Recorded: {
      if (k >= trace_.rows()) {
        throw std::out_of_range("DesiredInputPolicy: recorded trace too short");
      }
      return trace_.row(k).transpose();
    }
    case Kind::ReferenceFeedforward: {
      Eigen::VectorXd u = r.u;
      if (noise_amplitude_ > 0.0) {
        std::uniform_real_distribution<double> dist(-noise_amplitude_,
                                                    noise_amplitude_);
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) += dist(rng);
      }
      return u;
    }
    case Kind::TrackingFeedback: {
      Eigen::VectorXd u = r.u + gain_ * (x - r.x);
      if (noise_amplitude_ > 0.0) {
        std::uniform_real_distribution<double> dist(-noise_amplitude_,
                                                    noise_amplitude_);
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) += dist(rng);
      }
      return u;
    }
    case Kind::DestabilizingFeedback:
      return r.u + gain_ * (x - r.x) + bias_;
    case Kind::Composite: {
      const DesiredInputPolicy* active = &schedule_.front().second;
      for (const auto& [start, sub] : schedule_) {
        if (k >= start) active = &sub;
      }
      return active->desired(k, x, r, rng);
    }
  }
  throw std::logic_error("DesiredInputPolicy: unknown kind");
}

void DesiredInputPolicy::check_run_length(Eigen::Index T, Eigen::Index m) const {
  if (kind_ == Kind::Recorded) {
    if (trace_.rows() < T || trace_.cols() != m) {
      throw std::invalid_argument(
          "DesiredInputPolicy: recorded trace shorter than the run");
    }
  }
  if (kind_ == Kind::Composite) {
    for (const auto& [start, sub] : schedule_) sub.check_run_length(T, m);
  }
}

RolloutLog run_closed_loop(const FilterConfig& cfg, const LinearDynamics& dyn,
                           const StabilityCost& cost,
                           const TerminalIngredients& ti,
                           const BoxConstraints& box,
                           const DesiredInputPolicy& policy,
                           const Eigen::VectorXd& x0,
                           const std::optional<ReferenceTrajectory>& reference,
                           const RolloutOptions& opts) {
  if (opts.T < 1) throw std::invalid_argument("run_closed_loop: T must be >= 1");
  policy.check_run_length(opts.T, dyn.input_dim());
  if (reference && reference->max_index() < opts.T + cfg.N) {
    throw std::invalid_argument(
        "run_closed_loop: reference must cover T + N + 1 points");
  }

  FilterEngine engine(cfg, dyn, cost, ti, box, reference);
  std::mt19937_64 rng(opts.seed);

  RolloutLog log;
  log.n = dyn.state_dim();
  log.m = dyn.input_dim();
  log.seed = opts.seed;
  log.rows.reserve(static_cast<std::size_t>(opts.T));

  Eigen::VectorXd x = x0;
  double H = 0.0;
  double V0 = 0.0;
  for (Eigen::Index k = 0; k < opts.T; ++k) {
    const ReferencePoint r = reference
                                 ? reference->at(k)
                                 : ReferencePoint{Eigen::VectorXd::Zero(log.n),
                                                  Eigen::VectorXd::Zero(log.m)};
    const Eigen::VectorXd u_des = policy.desired(k, x, r, rng);
    const FilterStepResult res = engine.step(x, u_des);
    if (k == 0) V0 = res.V;

    RolloutRow row;
    row.k = k;
    row.x = x;
    row.u_des = u_des;
    row.u = res.u_applied;
    row.V = res.V;
    row.J_B = res.J_B_used;
    row.zeta = res.zeta;
    row.match_err = res.matching_error;
    row.status = res.solver_status;
    row.H = H;
    row.HB = (V0 - res.V) / cfg.zeta_min;
    row.certified = res.certified;
    row.active_constraints = res.active_constraints;
    log.rows.push_back(std::move(row));

    H += res.stage_cost_applied;
    x = step(dyn, x, res.u_applied);
  }
  return log;
}

void save_rollout_csv(const std::string& path, const RolloutLog& log) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "# seed " << log.seed << '\n';
  os << 'k';
  for (Eigen::Index i = 1; i <= log.n; ++i) os << ",x" << i;
  for (Eigen::Index i = 1; i <= log.m; ++i) os << ",udes" << i;
  for (Eigen::Index i = 1; i <= log.m; ++i) os << ",u" << i;
  os << ",V,JB,zeta,match_err,status,H,HB\n";
  for (const auto& row : log.rows) {
    std::vector<double> head;
    head.push_back(static_cast<double>(row.k));
    for (Eigen::Index i = 0; i < log.n; ++i) head.push_back(row.x(i));
    for (Eigen::Index i = 0; i < log.m; ++i) head.push_back(row.u_des(i));
    for (Eigen::Index i = 0; i < log.m; ++i) head.push_back(row.u(i));
    head.push_back(row.V);
    head.push_back(row.J_B);
    head.push_back(row.zeta);
    head.push_back(row.match_err);
    os << csv_line(head) << ',' << to_string(row.status) << ','
       << format_double(row.H) << ',' << format_double(row.HB) << '\n';
  }
}

RolloutLog load_rollout_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  RolloutLog log;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty log: " + path);
  if (line.rfind("# seed ", 0) == 0) {
    log.seed = std::stoull(line.substr(7));
    if (!std::getline(is, line)) throw std::runtime_error("missing header: " + path);
  }
  const auto cols = split_csv(line);
  Eigen::Index n = 0, m = 0;
  for (const auto& c : cols) {
    if (c.rfind("x", 0) == 0 && c != "k") ++n;
    if (c.rfind("udes", 0) == 0) ++m;
  }
  log.n = n;
  log.m = m;
  const Eigen::Index expected = 1 + n + 2 * m + 7;
  if (static_cast<Eigen::Index>(cols.size()) != expected) {
    throw std::runtime_error("bad rollout header: " + line);
  }
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv(line);
    if (static_cast<Eigen::Index>(f.size()) != expected) {
      throw std::runtime_error("bad rollout row: " + line);
    }
    RolloutRow row;
    Eigen::Index c = 0;
    row.k = std::stol(f[c++]);
    row.x.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) row.x(i) = std::stod(f[c++]);
    row.u_des.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) row.u_des(i) = std::stod(f[c++]);
    row.u.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) row.u(i) = std::stod(f[c++]);
    row.V = std::stod(f[c++]);
    row.J_B = std::stod(f[c++]);
    row.zeta = std::stod(f[c++]);
    row.match_err = std::stod(f[c++]);
    const auto status = solve_status_from_string(f[c++]);
    if (!status) throw std::runtime_error("bad status in rollout row: " + line);
    row.status = *status;
    row.H = std::stod(f[c++]);
    row.HB = std::stod(f[c++]);
    row.certified = row.match_err <= 1e-6;
    log.rows.push_back(std::move(row));
  }
  return log;
}

bool VerificationReport::pass() const {
  for (const auto& c : checks) {
    if (c.applicable && !c.pass) return false;
  }
  return true;
}

const VerifyCheck* VerificationReport::find(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::string VerificationReport::to_text() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    if (!c.applicable) {
      os << "SKIP " << c.name << '\n';
      continue;
    }
    os << (c.pass ? "PASS " : "FAIL ") << c.name;
    if (!c.pass && c.fail_index >= 0) os << " at k=" << c.fail_index;
    if (!c.detail.empty()) os << " (" << c.detail << ")";
    os << '\n';
  }
  os << (pass() ? "VERDICT PASS" : "VERDICT FAIL") << '\n';
  return os.str();
}

VerificationReport verify_rollout(
    const RolloutLog& log, const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const BoxConstraints& box,
    const std::optional<ReferenceTrajectory>& reference,
    const VerifyThresholds& thresholds) {
  VerificationReport rep;
  const Eigen::Index T = log.length();
  if (T == 0) {
    rep.checks.push_back({"nonempty_log", true, false, -1, "log has no rows"});
    return rep;
  }
  const bool stability = cfg.mode != FilterMode::SafetyOnly;

  // (a) every step solved to optimality
  {
    VerifyCheck c{"solver_status"};
    for (const auto& row : log.rows) {
      if (row.status != SolveStatus::Optimal) {
        c.pass = false;
        c.fail_index = row.k;
        c.detail = to_string(row.status);
        break;
      }
    }
    rep.checks.push_back(std::move(c));
  }

  // (b) state and input boxes within 1e-9
  {
    VerifyCheck c{"constraint_satisfaction"};
    for (const auto& row : log.rows) {
      if (!box.state_inside(row.x, kBoxTol) || !box.input_inside(row.u, kBoxTol)) {
        c.pass = false;
        c.fail_index = row.k;
        break;
      }
    }
    rep.checks.push_back(std::move(c));
  }

  std::vector<double> ell(static_cast<std::size_t>(T));
  for (Eigen::Index k = 0; k < T; ++k) {
    ell[static_cast<std::size_t>(k)] =
        stage_cost_at(cost, reference, k, log.rows[k].x, log.rows[k].u);
  }

  // (c) Lyapunov decrease with margin zeta_min * ell
  {
    VerifyCheck c{"lyapunov_decrease"};
    c.applicable = stability;
    if (stability) {
      for (Eigen::Index k = 0; k + 1 < T; ++k) {
        const double lhs = log.rows[k + 1].V;
        const double rhs = log.rows[k].V -
                           cfg.zeta_min * ell[static_cast<std::size_t>(k)] +
                           kDecreaseTol;
        if (lhs > rhs) {
          c.pass = false;
          c.fail_index = k + 1;
          std::ostringstream os;
          os << "V(k)=" << lhs << " > " << rhs;
          c.detail = os.str();
          break;
        }
      }
    }
    rep.checks.push_back(std::move(c));
  }

  // (d) performance bound H(k) <= H_B(k) + tol, and log-column consistency
  {
    VerifyCheck c{"performance_bound"};
    c.applicable = stability;
    if (stability) {
      double H = 0.0;
      const double V0 = log.rows[0].V;
      for (Eigen::Index k = 0; k < T; ++k) {
        const double HB = (V0 - log.rows[k].V) / cfg.zeta_min;
        if (std::abs(H - log.rows[k].H) >
                kLogConsistencyTol * std::max(1.0, std::abs(H)) ||
            std::abs(HB - log.rows[k].HB) >
                kLogConsistencyTol * std::max(1.0, std::abs(HB))) {
          c.pass = false;
          c.fail_index = k;
          c.detail = "logged H/HB columns inconsistent with recomputation";
          break;
        }
        if (H > HB + kPerformanceTol) {
          c.pass = false;
          c.fail_index = k;
          std::ostringstream os;
          os << "H=" << H << " > HB=" << HB;
          c.detail = os.str();
          break;
        }
        H += ell[static_cast<std::size_t>(k)];
      }
    }
    rep.checks.push_back(std::move(c));
  }

  // (e) telescoped bound with the logged zeta sequence, every prefix
  {
    VerifyCheck c{"telescoped_bound"};
    c.applicable = stability;
    if (stability) {
      double acc = 0.0;
      for (Eigen::Index k = 1; k < T; ++k) {
        acc += log.rows[k].zeta * ell[static_cast<std::size_t>(k - 1)];
        if (log.rows[k].V - log.rows[0].V > -acc + kDecreaseTol) {
          c.pass = false;
          c.fail_index = k;
          break;
        }
      }
    }
    rep.checks.push_back(std::move(c));
  }

  // (f) terminal tracking error below the configured threshold
  {
    VerifyCheck c{"convergence"};
    c.applicable = thresholds.convergence_threshold >= 0.0;
    if (c.applicable) {
      auto error_at = [&](Eigen::Index k) {
        Eigen::VectorXd e = log.rows[k].x;
        if (reference) e -= reference->at(k).x;
        return e.norm();
      };
      if (error_at(T - 1) > thresholds.convergence_threshold) {
        c.pass = false;
        c.fail_index = T - 1;
        std::ostringstream os;
        os << "final error " << error_at(T - 1);
        c.detail = os.str();
      } else if (thresholds.convergence_by_step >= 0) {
        Eigen::Index first = -1;
        for (Eigen::Index k = 0; k < T; ++k) {
          if (error_at(k) <= thresholds.convergence_threshold) {
            first = k;
            break;
          }
        }
        if (first < 0 || first > thresholds.convergence_by_step) {
          c.pass = false;
          c.fail_index = first;
          std::ostringstream os;
          os << "threshold reached at k=" << first << " > "
             << thresholds.convergence_by_step;
          c.detail = os.str();
        }
      }
    }
    rep.checks.push_back(std::move(c));
  }

  return rep;
}

std::vector<std::pair<double, double>> performance_series(
    const RolloutLog& log, const StabilityCost& cost,
    const std::optional<ReferenceTrajectory>& reference, double zeta_min) {
  if (!(zeta_min > 0.0)) {
    throw std::invalid_argument("performance_series: zeta_min must be > 0");
  }
  std::vector<std::pair<double, double>> out;
  out.reserve(log.rows.size());
  double H = 0.0;
  const double V0 = log.rows.empty() ? 0.0 : log.rows.front().V;
  for (const auto& row : log.rows) {
    out.emplace_back(H, (V0 - row.V) / zeta_min);
    H += stage_cost_at(cost, reference, row.k, row.x, row.u);
  }
  return out;
}

}  // namespace mpsf
