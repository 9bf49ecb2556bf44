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

#ifndef MPSF_SIM_HPP_
#define MPSF_SIM_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mpsf/filter.hpp"
#include "mpsf/model.hpp"

namespace mpsf {

/// Stand-in for the external input source (learning controller, human):
///  - Recorded: replay a stored trace,
///  - ReferenceFeedforward: u^r(k) plus uniform noise,
///  - TrackingFeedback: u^r + gain (x - x^r) plus uniform noise (a competent
///    but imperfect operator),
///  - DestabilizingFeedback: u^r + gain (x - x^r) + bias with a gain chosen
///    to push the state away from the reference,
///  - Composite: schedule of sub-policies switching at given steps.
class DesiredInputPolicy {
 public:
  enum class Kind {
    Recorded,
    ReferenceFeedforward,
    TrackingFeedback,
    DestabilizingFeedback,
    Composite
  };

  static DesiredInputPolicy recorded(Eigen::MatrixXd trace);
  static DesiredInputPolicy reference_feedforward(double noise_amplitude);
  static DesiredInputPolicy tracking_feedback(Eigen::MatrixXd gain,
                                              double noise_amplitude);
  static DesiredInputPolicy destabilizing_feedback(Eigen::MatrixXd gain,
                                                   Eigen::VectorXd bias);
  static DesiredInputPolicy composite(
      std::vector<std::pair<Eigen::Index, DesiredInputPolicy>> schedule);

  Kind kind() const { return kind_; }
  const Eigen::MatrixXd& trace() const { return trace_; }

  Eigen::VectorXd desired(Eigen::Index k, const Eigen::VectorXd& x,
                          const ReferencePoint& r, std::mt19937_64& rng) const;

  /// Recorded traces must cover the whole run.
  void check_run_length(Eigen::Index T, Eigen::Index m) const;

 private:
  DesiredInputPolicy() = default;

  Kind kind_ = Kind::ReferenceFeedforward;
  Eigen::MatrixXd trace_;
  double noise_amplitude_ = 0.0;
  Eigen::MatrixXd gain_;
  Eigen::VectorXd bias_;
  std::vector<std::pair<Eigen::Index, DesiredInputPolicy>> schedule_;
};

struct RolloutRow {
  Eigen::Index k = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd u_des;
  Eigen::VectorXd u;
  double V = 0.0;
  double J_B = 0.0;
  double zeta = 1.0;
  double match_err = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  double H = 0.0;   // sum of realized stage costs before this step
  double HB = 0.0;  // (V(0) - V(k)) / zeta_min
  bool certified = false;
  std::vector<std::string> active_constraints;
};

struct RolloutLog {
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  std::uint64_t seed = 0;
  std::vector<RolloutRow> rows;

  Eigen::Index length() const { return static_cast<Eigen::Index>(rows.size()); }
};

/// CSV with a `# seed <value>` header comment, then
/// `k,x1..xn,udes1..udesm,u1..um,V,JB,zeta,match_err,status,H,HB`.
void save_rollout_csv(const std::string& path, const RolloutLog& log);
RolloutLog load_rollout_csv(const std::string& path);

struct RolloutOptions {
  Eigen::Index T = 1;
  std::uint64_t seed = 0;
};

/// Closed-loop run: T filter steps with the true plant x(k+1) = Ax + Bu.
/// Throws InitialInfeasibilityError / RecursiveFeasibilityError like the
/// underlying filter steps.
RolloutLog run_closed_loop(const FilterConfig& cfg, const LinearDynamics& dyn,
                           const StabilityCost& cost,
                           const TerminalIngredients& ti,
                           const BoxConstraints& box,
                           const DesiredInputPolicy& policy,
                           const Eigen::VectorXd& x0,
                           const std::optional<ReferenceTrajectory>& reference,
                           const RolloutOptions& opts);

struct VerifyThresholds {
  double convergence_threshold = -1.0;   // < 0: skip the convergence check
  Eigen::Index convergence_by_step = -1; // < 0: only the final error matters
};

struct VerifyCheck {
  std::string name;
  bool applicable = true;
  bool pass = true;
  Eigen::Index fail_index = -1;
  std::string detail;
};

struct VerificationReport {
  std::vector<VerifyCheck> checks;
  bool pass() const;
  std::string to_text() const;
  const VerifyCheck* find(const std::string& name) const;
};

/// Post-hoc verification of a rollout at the literal numeric level:
///  (a) every step solved to optimality,
///  (b) state/input boxes satisfied within 1e-9,
///  (c) V(k+1) <= V(k) - zeta_min ell(k) + 1e-6,
///  (d) H(k) <= H_B(k) + 1e-6 with the run's zeta_min, and log columns
///      consistent with recomputation,
///  (e) telescoped bound with the logged zeta sequence at every prefix,
///  (f) terminal tracking error below the configured threshold.
VerificationReport verify_rollout(
    const RolloutLog& log, const FilterConfig& cfg, const LinearDynamics& dyn,
    const StabilityCost& cost, const BoxConstraints& box,
    const std::optional<ReferenceTrajectory>& reference,
    const VerifyThresholds& thresholds = {});

/// (H(k), H_B(k)) recomputed from the logged states, inputs and V values:
/// H(k) sums the first k realized stage costs, H_B(k) = (V(0)-V(k))/zeta_min.
std::vector<std::pair<double, double>> performance_series(
    const RolloutLog& log, const StabilityCost& cost,
    const std::optional<ReferenceTrajectory>& reference, double zeta_min);

}  // namespace mpsf

#endif  // MPSF_SIM_HPP_
