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

#include "mpsf/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mpsf/matrix_io.hpp"
#include "mpsf/vehicle.hpp"

namespace mpsf {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

const json& need(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) fail("config: missing key '" + key + "' in " + ctx);
  return j.at(key);
}

double num(const json& j, const std::string& ctx) {
  if (!j.is_number()) fail("config: expected number in " + ctx);
  return j.get<double>();
}

Eigen::VectorXd parse_vector(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty()) fail("config: expected array in " + ctx);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = num(j[i], ctx);
  }
  return v;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& ctx) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    fail("config: expected array of rows in " + ctx);
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail("config: ragged matrix in " + ctx);
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      M(r, c) = num(row[static_cast<std::size_t>(c)], ctx);
    }
  }
  return M;
}

std::string resolve_path(const std::string& base_dir, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / path).string();
}

Eigen::MatrixXd load_input_trace(const std::string& path, Eigen::Index m) {
  std::ifstream is(path);
  if (!is) fail("config: cannot open recorded trace: " + path);
  std::string line;
  if (!std::getline(is, line)) fail("config: empty recorded trace: " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_csv(line);
    if (static_cast<Eigen::Index>(f.size()) != 1 + m) {
      fail("config: bad recorded trace row: " + line);
    }
    std::vector<double> r;
    for (Eigen::Index i = 0; i < m; ++i) r.push_back(std::stod(f[1 + i]));
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd trace(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index c = 0; c < m; ++c) {
      trace(static_cast<Eigen::Index>(i), c) = rows[i][c];
    }
  }
  return trace;
}

DesiredInputPolicy parse_policy(const json& j, const std::string& base_dir,
                                const Eigen::MatrixXd& K, Eigen::Index m) {
  const std::string type = need(j, "type", "policy").get<std::string>();
  if (type == "reference_feedforward") {
    return DesiredInputPolicy::reference_feedforward(
        j.value("noise", 0.0));
  }
  if (type == "tracking_feedback") {
    Eigen::MatrixXd gain;
    if (j.contains("gain")) {
      gain = parse_matrix(j.at("gain"), "policy.gain");
    } else {
      gain = j.value("gain_scale", 1.0) * K;
    }
    return DesiredInputPolicy::tracking_feedback(gain, j.value("noise", 0.0));
  }
  if (type == "destabilizing_feedback") {
    Eigen::MatrixXd gain;
    if (j.contains("gain")) {
      gain = parse_matrix(j.at("gain"), "policy.gain");
    } else {
      gain = j.value("gain_scale", -1.0) * K;
    }
    Eigen::VectorXd bias = Eigen::VectorXd::Zero(m);
    if (j.contains("bias")) bias = parse_vector(j.at("bias"), "policy.bias");
    return DesiredInputPolicy::destabilizing_feedback(gain, bias);
  }
  if (type == "recorded") {
    const std::string path =
        resolve_path(base_dir, need(j, "path", "policy").get<std::string>());
    return DesiredInputPolicy::recorded(load_input_trace(path, m));
  }
  if (type == "composite") {
    const json& sched = need(j, "schedule", "policy");
    if (!sched.is_array() || sched.empty()) fail("config: empty composite schedule");
    std::vector<std::pair<Eigen::Index, DesiredInputPolicy>> entries;
    for (const auto& entry : sched) {
      entries.emplace_back(
          static_cast<Eigen::Index>(num(need(entry, "start", "schedule"), "start")),
          parse_policy(need(entry, "policy", "schedule"), base_dir, K, m));
    }
    return DesiredInputPolicy::composite(std::move(entries));
  }
  fail("config: unknown policy type '" + type + "'");
}

json parse_json(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config: invalid JSON");
  return j;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << text;
}

std::string apply_overrides_to_config_text(
    const std::string& json_text, const std::vector<std::string>& overrides) {
  json j = parse_json(json_text);
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      fail("override must look like key.path=value: " + ov);
    }
    const std::string path = ov.substr(0, eq);
    const std::string value_text = ov.substr(eq + 1);
    json value = json::parse(value_text, nullptr, false);
    if (value.is_discarded()) value = value_text;  // bare strings allowed

    json* node = &j;
    std::istringstream keys(path);
    std::string key, next;
    if (!std::getline(keys, key, '.')) fail("empty override key: " + ov);
    while (std::getline(keys, next, '.')) {
      node = &(*node)[key];
      key = next;
    }
    (*node)[key] = value;
  }
  return j.dump(2) + "\n";
}

Scenario scenario_from_config_text(const std::string& json_text,
                                   const std::string& base_dir) {
  const json j = parse_json(json_text);

  // Plant.
  const json& plant = need(j, "plant", "config");
  const std::string ptype = need(plant, "type", "plant").get<std::string>();
  std::optional<LinearDynamics> dyn;
  if (ptype == "matrices") {
    dyn.emplace(parse_matrix(need(plant, "A", "plant"), "plant.A"),
                parse_matrix(need(plant, "B", "plant"), "plant.B"));
  } else if (ptype == "vehicle") {
    SingleTrackParams params;
    if (plant.contains("params")) {
      const json& pj = plant.at("params");
      params.mass = pj.value("mass", params.mass);
      params.yaw_inertia = pj.value("yaw_inertia", params.yaw_inertia);
      params.dist_front = pj.value("dist_front", params.dist_front);
      params.dist_rear = pj.value("dist_rear", params.dist_rear);
      params.cornering_front = pj.value("cornering_front", params.cornering_front);
      params.cornering_rear = pj.value("cornering_rear", params.cornering_rear);
      params.velocity = pj.value("velocity", params.velocity);
    }
    const double Ts = plant.value("Ts", 0.02);
    Eigen::MatrixXd A_c, B_c;
    try {
      linearize_single_track(params, A_c, B_c);
    } catch (const std::invalid_argument& ex) {
      fail(std::string("plant: ") + ex.what());
    }
    dyn.emplace(discretize_zoh(A_c, B_c, Ts));
  } else {
    fail("config: unknown plant type '" + ptype + "'");
  }
  const Eigen::Index n = dyn->state_dim();
  const Eigen::Index m = dyn->input_dim();

  // Boxes.
  const json& boxj = need(j, "box", "config");
  std::optional<BoxConstraints> box;
  try {
    box.emplace(parse_vector(need(boxj, "x_lo", "box"), "box.x_lo"),
                parse_vector(need(boxj, "x_hi", "box"), "box.x_hi"),
                parse_vector(need(boxj, "u_lo", "box"), "box.u_lo"),
                parse_vector(need(boxj, "u_hi", "box"), "box.u_hi"));
  } catch (const std::invalid_argument& ex) {
    fail(std::string("box: ") + ex.what());
  }
  if (box->x_lo.size() != n || box->u_lo.size() != m) {
    fail("config: box dimensions do not match the plant");
  }

  // Cost weights; P defaults to the Riccati solution.
  const json& costj = need(j, "cost", "config");
  const Eigen::MatrixXd Q = parse_matrix(need(costj, "Q", "cost"), "cost.Q");
  const Eigen::MatrixXd R = parse_matrix(need(costj, "R", "cost"), "cost.R");
  if (Q.rows() != n || R.rows() != m) {
    fail("config: cost dimensions do not match the plant");
  }
  std::optional<TerminalIngredients> ti;
  try {
    ti.emplace(solve_riccati(*dyn, Q, R));
  } catch (const std::exception& ex) {
    fail(std::string("cost: riccati synthesis failed: ") + ex.what());
  }
  Eigen::MatrixXd P = ti->P;
  if (costj.contains("P") && costj.at("P").is_array()) {
    P = parse_matrix(costj.at("P"), "cost.P");
  }
  std::optional<StabilityCost> cost;
  try {
    cost.emplace(Q, R, P);
  } catch (const std::invalid_argument& ex) {
    fail(std::string("cost: ") + ex.what());
  }

  // Filter block.
  const json& fj = need(j, "filter", "config");
  FilterConfig cfg;
  const auto mode =
      filter_mode_from_string(need(fj, "mode", "filter").get<std::string>());
  if (!mode) fail("config: unknown filter mode");
  cfg.mode = *mode;
  cfg.N = static_cast<Eigen::Index>(num(need(fj, "N", "filter"), "filter.N"));
  cfg.zeta_min = fj.value("zeta_min", 0.1);
  cfg.rho = fj.value("rho", 1.0);
  cfg.gamma = fj.value("gamma", 1.0);
  cfg.degenerate_terminal = fj.value("degenerate_terminal", false);
  if (fj.contains("zeta")) {
    const json& zj = fj.at("zeta");
    const std::string ztype = need(zj, "type", "filter.zeta").get<std::string>();
    if (ztype == "fixed") {
      cfg.zeta_policy.kind = ZetaPolicy::Kind::Fixed;
      cfg.zeta_policy.fixed_zeta = zj.value("value", cfg.zeta_min);
    } else if (ztype == "adaptive") {
      cfg.zeta_policy.kind = ZetaPolicy::Kind::Adaptive;
      cfg.zeta_policy.lambda_weight = zj.value("lambda", 1e-4);
    } else {
      fail("config: unknown zeta policy '" + ztype + "'");
    }
  } else {
    cfg.zeta_policy.kind = ZetaPolicy::Kind::Fixed;
    cfg.zeta_policy.fixed_zeta = cfg.zeta_min;
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& ex) {
    fail(std::string("filter: ") + ex.what());
  }

  // Run block (needed before the reference for lengths).
  const json& runj = need(j, "run", "config");
  RolloutOptions run;
  run.T = static_cast<Eigen::Index>(num(need(runj, "T", "run"), "run.T"));
  if (run.T < 1) fail("config: run.T must be >= 1");
  run.seed = runj.value("seed", 0ull);
  Eigen::VectorXd x0 = parse_vector(need(runj, "x0", "run"), "run.x0");
  if (x0.size() != n) fail("config: run.x0 dimension mismatch");
  VerifyThresholds thresholds;
  thresholds.convergence_threshold = runj.value("convergence_threshold", -1.0);
  thresholds.convergence_by_step = static_cast<Eigen::Index>(
      runj.value("convergence_by_step", -1.0));

  // Reference.
  std::optional<ReferenceTrajectory> reference;
  const Eigen::Index needed_length = run.T + cfg.N + 2;
  if (j.contains("reference")) {
    const json& rj = j.at("reference");
    const std::string rtype = need(rj, "type", "reference").get<std::string>();
    const double tightening = rj.value("tightening", 1.05);
    if (rtype == "zero") {
      // origin reference; leave empty (equivalent and cheaper)
    } else if (rtype == "file") {
      const std::string path =
          resolve_path(base_dir, need(rj, "path", "reference").get<std::string>());
      reference = load_trajectory_csv(path, tightening);
    } else if (rtype == "lane_change") {
      const Eigen::Index length = static_cast<Eigen::Index>(
          rj.value("length", static_cast<double>(needed_length)));
      reference = lane_change_reference(
          *dyn, ti->K, plant.value("Ts", 0.02), std::max(length, needed_length),
          rj.value("start_offset", 0.0), rj.value("amplitude", 0.9), tightening);
    } else {
      fail("config: unknown reference type '" + rtype + "'");
    }
    if (reference && reference->max_index() < run.T + cfg.N) {
      fail("config: reference shorter than T + N + 1 points");
    }
  }

  // Terminal level set (after the reference so its envelope can shrink the
  // admissible box), or an externally supplied bundle.
  const double margin =
      j.contains("terminal") ? j.at("terminal").value("margin", 0.9) : 0.9;
  if (j.contains("terminal") && j.at("terminal").contains("ingredients_file")) {
    const std::string path = resolve_path(
        base_dir, j.at("terminal").at("ingredients_file").get<std::string>());
    *ti = load_ingredients_csv(path);
    if (ti->P.rows() != n || ti->K.rows() != m) {
      fail("config: ingredient bundle dimensions do not match the plant");
    }
  } else if (!cfg.degenerate_terminal) {
    Eigen::VectorXd x_hi_eff = box->x_hi, x_lo_eff = box->x_lo;
    Eigen::VectorXd u_hi_eff = box->u_hi, u_lo_eff = box->u_lo;
    if (reference) {
      for (Eigen::Index k = 0; k <= reference->max_index(); ++k) {
        const auto& r = reference->at(k);
        x_hi_eff = x_hi_eff.cwiseMin(box->x_hi - r.x);
        x_lo_eff = x_lo_eff.cwiseMax(box->x_lo - r.x);
        u_hi_eff = u_hi_eff.cwiseMin(box->u_hi - r.u);
        u_lo_eff = u_lo_eff.cwiseMax(box->u_lo - r.u);
      }
    }
    try {
      const BoxConstraints envelope(x_lo_eff, x_hi_eff, u_lo_eff, u_hi_eff);
      ti->tau = terminal_set_level(*ti, envelope, margin);
    } catch (const std::exception& ex) {
      fail(std::string("terminal: ") + ex.what());
    }
  } else {
    ti->tau = 0.0;
  }

  // Policy.
  DesiredInputPolicy policy = DesiredInputPolicy::reference_feedforward(0.0);
  if (j.contains("policy")) {
    policy = parse_policy(j.at("policy"), base_dir, ti->K, m);
  }
  try {
    policy.check_run_length(run.T, m);
  } catch (const std::invalid_argument& ex) {
    fail(std::string("policy: ") + ex.what());
  }

  return Scenario{std::move(*dyn), std::move(*box),   std::move(*cost),
                  std::move(*ti),  cfg,               std::move(reference),
                  std::move(policy), std::move(x0),   run,
                  thresholds,      margin};
}

Scenario load_scenario(const std::string& config_path,
                       const std::vector<std::string>& overrides,
                       std::string* effective_config_text) {
  const std::string raw = read_text_file(config_path);
  const std::string effective = apply_overrides_to_config_text(raw, overrides);
  if (effective_config_text) *effective_config_text = effective;
  const std::string base_dir =
      std::filesystem::path(config_path).parent_path().string();
  return scenario_from_config_text(effective, base_dir);
}

}  // namespace mpsf
