#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "mpsf/scenario.hpp"

using namespace mpsf;

namespace {

const char* kDiConfig = R"json({
  "plant": {
    "type": "matrices",
    "A": [[1.0, 0.1], [0.0, 1.0]],
    "B": [[0.005], [0.1]]
  },
  "box": {
    "x_lo": [-5.0, -5.0], "x_hi": [5.0, 5.0],
    "u_lo": [-3.0], "u_hi": [3.0]
  },
  "cost": {"Q": [[1.0, 0.0], [0.0, 1.0]], "R": [[1.0]]},
  "terminal": {"margin": 0.9},
  "filter": {
    "mode": "convergence", "N": 8, "zeta_min": 0.1, "rho": 1.0, "gamma": 5.0,
    "zeta": {"type": "fixed", "value": 0.5}
  },
  "policy": {"type": "destabilizing_feedback", "gain": [[0.8, 1.2]]},
  "run": {"T": 12, "seed": 3, "x0": [1.5, 0.0], "convergence_threshold": 2.0}
})json";

std::string write_temp(const std::string& name, const std::string& text) {
  std::ofstream os(name);
  os << text;
  return name;
}

}  // namespace

TEST_CASE("scenario from config text") {
  const Scenario sc = scenario_from_config_text(kDiConfig, ".");
  CHECK(sc.dyn.state_dim() == 2);
  CHECK(sc.cfg.mode == FilterMode::Convergence);
  CHECK(sc.cfg.N == 8);
  CHECK(sc.cfg.zeta_policy.fixed_zeta == doctest::Approx(0.5));
  CHECK(sc.x0(0) == doctest::Approx(1.5));
  CHECK(sc.run.T == 12);
  CHECK(sc.ti.tau > 0.0);
  CHECK(sc.thresholds.convergence_threshold == doctest::Approx(2.0));
}

TEST_CASE("config to run to verification round trip") {
  const Scenario sc = scenario_from_config_text(kDiConfig, ".");
  const auto log =
      run_closed_loop(sc.cfg, sc.dyn, sc.cost, sc.ti, sc.box, sc.policy,
                      sc.x0, sc.reference, sc.run);
  const auto rep = verify_rollout(log, sc.cfg, sc.dyn, sc.cost, sc.box,
                                  sc.reference, sc.thresholds);
  CHECK(rep.pass());

  // offline re-verification of the saved log gives the same verdicts
  const std::string path = "test_scenario_log.csv";
  save_rollout_csv(path, log);
  const auto loaded = load_rollout_csv(path);
  const auto rep2 = verify_rollout(loaded, sc.cfg, sc.dyn, sc.cost, sc.box,
                                   sc.reference, sc.thresholds);
  REQUIRE(rep2.checks.size() == rep.checks.size());
  for (std::size_t i = 0; i < rep.checks.size(); ++i) {
    CHECK(rep.checks[i].pass == rep2.checks[i].pass);
    CHECK(rep.checks[i].applicable == rep2.checks[i].applicable);
  }
  std::remove(path.c_str());
}

TEST_CASE("overrides touch exactly the named keys") {
  const std::string effective = apply_overrides_to_config_text(
      kDiConfig, {"filter.zeta_min=0.2", "run.seed=99"});
  const Scenario sc = scenario_from_config_text(effective, ".");
  CHECK(sc.cfg.zeta_min == doctest::Approx(0.2));
  CHECK(sc.run.seed == 99);
  // untouched keys keep their values
  CHECK(sc.cfg.N == 8);
  CHECK(sc.cfg.gamma == doctest::Approx(5.0));
  CHECK(sc.run.T == 12);
}

TEST_CASE("override with a fresh key and a bad override") {
  const std::string effective =
      apply_overrides_to_config_text(kDiConfig, {"run.convergence_by_step=10"});
  const Scenario sc = scenario_from_config_text(effective, ".");
  CHECK(sc.thresholds.convergence_by_step == 10);
  CHECK_THROWS_AS(apply_overrides_to_config_text(kDiConfig, {"no_equals_sign"}),
                  ConfigError);
}

TEST_CASE("malformed configs raise ConfigError") {
  CHECK_THROWS_AS(scenario_from_config_text("{not json", "."), ConfigError);
  CHECK_THROWS_AS(scenario_from_config_text("{}", "."), ConfigError);
  // dimension mismatch between plant and box
  const std::string bad = apply_overrides_to_config_text(
      kDiConfig, {"box.x_lo=[-1.0]", "box.x_hi=[1.0]"});
  CHECK_THROWS_AS(scenario_from_config_text(bad, "."), ConfigError);
}

TEST_CASE("recorded policy loads a trace file") {
  const std::string trace = write_temp("test_scenario_trace.csv",
                                       "k,u1\n0,0.1\n1,0.2\n2,0.3\n3,0.4\n"
                                       "4,0.1\n5,0.1\n6,0.1\n7,0.1\n8,0.1\n"
                                       "9,0.1\n10,0.1\n11,0.1\n");
  const std::string cfg = apply_overrides_to_config_text(
      kDiConfig,
      {"policy={\"type\":\"recorded\",\"path\":\"test_scenario_trace.csv\"}"});
  const Scenario sc = scenario_from_config_text(cfg, ".");
  CHECK(sc.policy.kind() == DesiredInputPolicy::Kind::Recorded);
  CHECK(sc.policy.trace().rows() == 12);
  CHECK(sc.policy.trace()(1, 0) == doctest::Approx(0.2));
  std::remove(trace.c_str());
}

TEST_CASE("external ingredient bundles load through the config") {
  // synthesize and export ingredients, then have the config pick them up
  const Scenario base = scenario_from_config_text(kDiConfig, ".");
  TerminalIngredients ti = base.ti;
  ti.tau *= 0.5;
  save_ingredients_csv("test_scenario_ti.csv", ti);
  const std::string cfg = apply_overrides_to_config_text(
      kDiConfig,
      {"terminal.ingredients_file=\"test_scenario_ti.csv\""});
  const Scenario sc = scenario_from_config_text(cfg, ".");
  CHECK(sc.ti.tau == doctest::Approx(ti.tau));
  CHECK((sc.ti.K - ti.K).norm() == 0.0);
  std::remove("test_scenario_ti.csv");
}

TEST_CASE("vehicle plant type builds the six-state model") {
  const char* cfg = R"json({
    "plant": {"type": "vehicle", "Ts": 0.02},
    "box": {
      "x_lo": [-1.0, -1.0, -0.5235987755982988, -2.7777777777777777,
               -0.08726646259971647, -0.6108652381980153],
      "x_hi": [1.0, 1.0, 0.5235987755982988, 2.7777777777777777,
               0.08726646259971647, 0.6108652381980153],
      "u_lo": [-0.6108652381980153, -7.0],
      "u_hi": [0.6108652381980153, 2.0]
    },
    "cost": {
      "Q": [[1,0,0,0,0,0],[0,1,0,0,0,0],[0,0,1,0,0,0],
            [0,0,0,1,0,0],[0,0,0,0,1,0],[0,0,0,0,0,1]],
      "R": [[1,0],[0,1]]
    },
    "filter": {"mode": "tracking_convergence", "N": 30, "zeta_min": 0.1,
               "zeta": {"type": "adaptive", "lambda": 1e-4}},
    "reference": {"type": "lane_change", "start_offset": 0.0,
                  "amplitude": 0.9, "tightening": 1.05},
    "policy": {"type": "tracking_feedback", "gain_scale": 0.6, "noise": 0.01},
    "run": {"T": 40, "seed": 1, "x0": [0, -0.5, 0, 0, 0, 0]}
  })json";
  const Scenario sc = scenario_from_config_text(cfg, ".");
  CHECK(sc.dyn.state_dim() == 6);
  REQUIRE(sc.reference);
  CHECK(validate_reference(sc.dyn, *sc.reference, sc.box).ok());
  CHECK(sc.cfg.zeta_policy.kind == ZetaPolicy::Kind::Adaptive);
}
