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

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <vector>

#include "mpsf/matrix_io.hpp"
#include "mpsf/scenario.hpp"
#include "mpsf/sim.hpp"
#include "mpsf/terminal.hpp"

namespace {

// Exit codes: 0 success, 1 verification/certification failure, 2 config
// error, 3 initial infeasibility, 4 mid-run invariant violation.
constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitInvariant = 4;

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

struct RunArtifacts {
  std::string log_path;
  std::string report_path;
  std::string config_path;
};

RunArtifacts artifact_paths(const std::string& out_dir,
                            const std::string& config_path) {
  const std::string stem = stem_of(config_path);
  return {out_dir + "/" + stem + "_log.csv",
          out_dir + "/" + stem + "_report.txt",
          out_dir + "/" + stem + "_config.json"};
}

int run_one(const std::string& config_path,
            const std::vector<std::string>& overrides,
            const std::string& out_dir) {
  std::string effective;
  mpsf::Scenario sc = mpsf::load_scenario(config_path, overrides, &effective);
  std::filesystem::create_directories(out_dir);
  const RunArtifacts paths = artifact_paths(out_dir, config_path);
  mpsf::write_text_file(paths.config_path, effective);

  try {
    const mpsf::RolloutLog log =
        mpsf::run_closed_loop(sc.cfg, sc.dyn, sc.cost, sc.ti, sc.box,
                              sc.policy, sc.x0, sc.reference, sc.run);
    mpsf::save_rollout_csv(paths.log_path, log);
    const auto report = mpsf::verify_rollout(log, sc.cfg, sc.dyn, sc.cost,
                                             sc.box, sc.reference,
                                             sc.thresholds);
    mpsf::write_text_file(paths.report_path, report.to_text());
    std::cout << config_path << ":\n" << report.to_text();
    return report.pass() ? kExitOk : kExitFail;
  } catch (const mpsf::InitialInfeasibilityError& ex) {
    std::cerr << config_path << ": " << ex.what() << "\n";
    return kExitInfeasible;
  } catch (const mpsf::RecursiveFeasibilityError& ex) {
    std::cerr << config_path << ": " << ex.what() << "\n";
    mpsf::write_text_file(out_dir + "/" + stem_of(config_path) + "_dump.txt",
                          ex.dump());
    return kExitInvariant;
  }
}

int cmd_run(const std::vector<std::string>& configs,
            const std::vector<std::string>& overrides,
            const std::string& out_dir, int jobs) {
  int worst = kExitOk;
  if (jobs <= 1 || configs.size() <= 1) {
    for (const auto& c : configs) {
      worst = std::max(worst, run_one(c, overrides, out_dir));
    }
    return worst;
  }
  std::vector<std::future<int>> futures;
  std::size_t next = 0;
  while (next < configs.size() || !futures.empty()) {
    while (static_cast<int>(futures.size()) < jobs && next < configs.size()) {
      const std::string cfg = configs[next++];
      futures.push_back(std::async(std::launch::async, run_one, cfg, overrides,
                                   out_dir));
    }
    worst = std::max(worst, futures.front().get());
    futures.erase(futures.begin());
  }
  return worst;
}

int cmd_synth(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  mpsf::Scenario sc = mpsf::load_scenario(config_path, overrides, nullptr);
  std::filesystem::create_directories(out_dir);
  const std::string stem = stem_of(config_path);

  const auto cert =
      mpsf::certify_terminal_ingredients(sc.dyn, sc.cost, sc.ti, sc.box, 1000);
  const double residual =
      mpsf::dare_residual(sc.dyn, sc.cost.Q(), sc.cost.R(), sc.ti.P);

  mpsf::save_ingredients_csv(out_dir + "/" + stem + "_ingredients.csv", sc.ti);
  std::ostringstream os;
  os << "dare relative residual: " << residual << "\n" << cert.summary();
  mpsf::write_text_file(out_dir + "/" + stem + "_certificate.txt", os.str());
  std::cout << os.str();
  return (cert.ok() && residual <= 1e-8) ? kExitOk : kExitFail;
}

int cmd_verify(const std::string& log_path, const std::string& config_path,
               const std::vector<std::string>& overrides) {
  const mpsf::Scenario sc = mpsf::load_scenario(config_path, overrides, nullptr);
  const mpsf::RolloutLog log = mpsf::load_rollout_csv(log_path);
  const auto report = mpsf::verify_rollout(log, sc.cfg, sc.dyn, sc.cost,
                                           sc.box, sc.reference, sc.thresholds);
  std::cout << report.to_text();
  return report.pass() ? kExitOk : kExitFail;
}

int cmd_export_plots(const std::string& log_path,
                     const std::string& config_path,
                     const std::vector<std::string>& overrides,
                     const std::string& out_dir, int state_index,
                     int input_index, double Ts) {
  const mpsf::Scenario sc = mpsf::load_scenario(config_path, overrides, nullptr);
  const mpsf::RolloutLog log = mpsf::load_rollout_csv(log_path);
  std::filesystem::create_directories(out_dir);
  if (state_index < 0 || state_index >= log.n || input_index < 0 ||
      input_index >= log.m) {
    throw mpsf::ConfigError("export-plots: state/input index out of range");
  }

  // Closed loop under the raw desired inputs, for comparison.
  std::vector<Eigen::VectorXd> raw_states;
  raw_states.push_back(log.rows.front().x);
  for (const auto& row : log.rows) {
    raw_states.push_back(mpsf::step(sc.dyn, raw_states.back(), row.u_des));
  }

  {
    std::ofstream os(out_dir + "/lateral.csv");
    os << "k,t,reference,filtered,desired\n";
    for (const auto& row : log.rows) {
      const double ref =
          sc.reference ? sc.reference->at(row.k).x(state_index) : 0.0;
      os << row.k << ',' << mpsf::format_double(row.k * Ts) << ','
         << mpsf::format_double(ref) << ','
         << mpsf::format_double(row.x(state_index)) << ','
         << mpsf::format_double(
                raw_states[static_cast<std::size_t>(row.k)](state_index))
         << '\n';
    }
  }
  {
    std::ofstream os(out_dir + "/steering.csv");
    os << "k,t,desired,filtered,match_err\n";
    for (const auto& row : log.rows) {
      os << row.k << ',' << mpsf::format_double(row.k * Ts) << ','
         << mpsf::format_double(row.u_des(input_index)) << ','
         << mpsf::format_double(row.u(input_index)) << ','
         << mpsf::format_double(row.match_err) << '\n';
    }
  }
  {
    std::ofstream os(out_dir + "/performance.csv");
    os << "k,t,H,HB,zeta,V\n";
    for (const auto& row : log.rows) {
      os << row.k << ',' << mpsf::format_double(row.k * Ts) << ','
         << mpsf::format_double(row.H) << ',' << mpsf::format_double(row.HB)
         << ',' << mpsf::format_double(row.zeta) << ','
         << mpsf::format_double(row.V) << '\n';
    }
  }
  std::cout << "wrote lateral.csv, steering.csv, performance.csv to "
            << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model predictive safety filter with stability guarantees"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::string log_path;
  int jobs = 1;
  long long seed = -1;
  int state_index = 1;
  int input_index = 0;
  double plot_dt = 0.02;

  auto* run = app.add_subcommand("run", "run a closed-loop scenario");
  run->add_option("--config", configs, "scenario config (repeatable)")
      ->required();
  run->add_option("--override", overrides, "config override key.path=value");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "override run.seed");
  run->add_option("--jobs", jobs, "run configs concurrently");

  auto* synth = app.add_subcommand(
      "synth", "synthesize and certify terminal ingredients");
  synth->add_option("--config", configs, "scenario config")->required();
  synth->add_option("--override", overrides, "config override key.path=value");
  synth->add_option("--out", out_dir, "output directory");

  auto* verify = app.add_subcommand("verify", "re-verify a rollout log");
  verify->add_option("--log", log_path, "rollout log CSV")->required();
  verify->add_option("--config", configs, "scenario config")->required();
  verify->add_option("--override", overrides, "config override key.path=value");

  auto* plots = app.add_subcommand("export-plots",
                                   "emit per-figure CSV data from a log");
  plots->add_option("--log", log_path, "rollout log CSV")->required();
  plots->add_option("--config", configs, "scenario config")->required();
  plots->add_option("--override", overrides, "config override key.path=value");
  plots->add_option("--out", out_dir, "output directory");
  plots->add_option("--state-index", state_index, "state column to plot");
  plots->add_option("--input-index", input_index, "input column to plot");
  plots->add_option("--dt", plot_dt, "sampling time for the time axis");

  CLI11_PARSE(app, argc, argv);

  if (seed >= 0) {
    overrides.push_back("run.seed=" + std::to_string(seed));
  }

  try {
    if (run->parsed()) return cmd_run(configs, overrides, out_dir, jobs);
    if (synth->parsed()) return cmd_synth(configs.front(), overrides, out_dir);
    if (verify->parsed()) return cmd_verify(log_path, configs.front(), overrides);
    if (plots->parsed()) {
      return cmd_export_plots(log_path, configs.front(), overrides, out_dir,
                              state_index, input_index, plot_dt);
    }
  } catch (const mpsf::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitFail;
  }
  return kExitConfig;
}
