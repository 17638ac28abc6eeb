#include <doctest.h>

#include <algorithm>

#include "cavsim/model.hpp"
#include "cavsim/rng.hpp"

using namespace cavsim;

namespace {

ScenarioConfig minimal_config() {
  ScenarioConfig cfg;
  cfg.geometry.preset = "single-merge";
  return cfg;
}

}  // namespace

TEST_CASE("default parameters validate") {
  ScenarioConfig cfg = minimal_config();
  cfg.trust.delta = 0.1;
  cfg.trust.gamma = 0.9;
  cfg.params.epsilon1 = 0.1;
  cfg.event.s_x = {1.0, 0.5};
  CHECK(validate_scenario(cfg).empty());
}

TEST_CASE("delta outside the open interval is rejected with the exact message") {
  ScenarioConfig cfg = minimal_config();
  cfg.trust.delta = 0.6;
  auto errs = validate_scenario(cfg);
  REQUIRE(!errs.empty());
  CHECK(std::find(errs.begin(), errs.end(), "delta must lie in (0, 1/2)") != errs.end());
}

TEST_CASE("beta follows the normalization formula") {
  // Independent re-evaluation: (1 - a) * max(u_max^2, u_min^2) / (2a).
  ScenarioConfig cfg = minimal_config();
  cfg.params.alpha = 0.5;
  cfg.params.u_max = 4.905;
  cfg.params.u_min = -5.886;
  REQUIRE(validate_scenario(cfg).empty());
  double expect = 0.5 * 5.886 * 5.886 / (2.0 * 0.5);
  CHECK(cfg.params.beta == doctest::Approx(expect).epsilon(1e-12));

  SplitMix64 rng(99);
  for (int k = 0; k < 100; ++k) {
    cfg.params.alpha = rng.uniform(0.05, 1.0);
    cfg.params.u_max = rng.uniform(0.5, 8.0);
    cfg.params.u_min = -rng.uniform(0.5, 8.0);
    REQUIRE(validate_scenario(cfg).empty());
    double worst = std::max(cfg.params.u_max * cfg.params.u_max,
                            cfg.params.u_min * cfg.params.u_min);
    double independent = (1.0 - cfg.params.alpha) * worst / (2.0 * cfg.params.alpha);
    CHECK(cfg.params.beta == doctest::Approx(independent).epsilon(1e-12));
  }
}

TEST_CASE("event boxes must dominate the noise bound") {
  ScenarioConfig cfg = minimal_config();
  cfg.params.epsilon1 = 0.3;
  cfg.event.s_x = {0.5, 0.7};  // first component <= 2 * eps1
  auto errs = validate_scenario(cfg);
  REQUIRE(!errs.empty());
  CHECK(errs.front().find("s_x[0]") != std::string::npos);
}

TEST_CASE("gamma and geometry invariants") {
  ScenarioConfig cfg = minimal_config();
  cfg.trust.gamma = 1.0;
  CHECK(!validate_scenario(cfg).empty());

  cfg = minimal_config();
  cfg.geometry.length = -1.0;
  CHECK(!validate_scenario(cfg).empty());

  cfg = minimal_config();
  cfg.geometry.preset.clear();
  RouteSpec r;
  r.id = "A";
  r.length = 100.0;
  cfg.geometry.custom_routes = {r, r};  // duplicate id
  auto errs = validate_scenario(cfg);
  bool found = false;
  for (const auto& e : errs) found |= e.find("duplicate route id") != std::string::npos;
  CHECK(found);
}

TEST_CASE("speeds given in km/h convert on load") {
  json j = {{"geometry", {{"preset", "single-merge"}}},
            {"params", {{"v_max_kmh", 108.0}}}};
  ScenarioConfig cfg;
  auto errs = scenario_from_json(j, cfg);
  REQUIRE(errs.empty());
  CHECK(cfg.params.v_max == doctest::Approx(30.0));
}

TEST_CASE("unknown keys are rejected") {
  json j = {{"geometry", {{"preset", "single-merge"}}}, {"spurious", 1}};
  ScenarioConfig cfg;
  auto errs = scenario_from_json(j, cfg);
  REQUIRE(!errs.empty());
  CHECK(errs.front().find("unknown key") != std::string::npos);

  json j2 = {{"params", {{"phy", 1.8}}}};
  auto errs2 = scenario_from_json(j2, cfg);
  CHECK(!errs2.empty());
}

TEST_CASE("serialization round-trips the configuration") {
  ScenarioConfig cfg = minimal_config();
  cfg.name = "roundtrip";
  cfg.arrivals.mode = "explicit";
  cfg.arrivals.list = {{0.5, "A", 11.0, 6.5}, {2.0, "B", 9.0, std::nullopt}};
  cfg.params.epsilon1 = 0.05;
  cfg.params.class_k_rear = 0.2;
  cfg.trust.r = {0.5, 0.5, 0.7, 0.7};
  AttackSpec bias;
  bias.kind = "bias-injection";
  bias.targets = {1};
  bias.bias = {0.05, 0.0};
  cfg.attacks.push_back(bias);
  AttackSpec sybil;
  sybil.kind = "sybil";
  sybil.count = 2;
  sybil.routes = {"A", "B"};
  sybil.generator.script = {{0.0, 1.0}, {2.0, -8.0}};
  sybil.generator.kind = "scripted";
  cfg.attacks.push_back(sybil);
  cfg.mitigation.force_fp_vehicle = 1;
  REQUIRE(validate_scenario(cfg).empty());

  json j = scenario_to_json(cfg);
  ScenarioConfig back;
  auto errs = scenario_from_json(j, back);
  REQUIRE(errs.empty());
  REQUIRE(validate_scenario(back).empty());
  CHECK(scenario_to_json(back) == j);
  CHECK(back.arrivals.list.size() == 2);
  CHECK(back.arrivals.list[0].v_ref.has_value());
  CHECK(*back.arrivals.list[0].v_ref == doctest::Approx(6.5));
  CHECK(back.params.class_k_rear.has_value());
  CHECK(back.attacks.size() == 2);
  CHECK(back.attacks[1].generator.script.size() == 2);
  CHECK(back.params.beta == doctest::Approx(cfg.params.beta));
}

TEST_CASE("stealthy bias attacks are bounded at validation") {
  ScenarioConfig cfg = minimal_config();
  AttackSpec bias;
  bias.kind = "bias-injection";
  bias.bias = {0.2, 0.0};
  bias.stealthy = true;
  cfg.attacks.push_back(bias);
  cfg.params.epsilon1 = 0.1;
  auto errs = validate_scenario(cfg);
  REQUIRE(!errs.empty());
  CHECK(errs.front().find("stealthy") != std::string::npos);
}

TEST_CASE("constraint row helpers") {
  LinearControlConstraint c;
  c.a_u = -1.8;
  c.rhs = -3.0;
  c.sense = Sense::Ge;
  CHECK(c.satisfied(1.0, 0.0));
  CHECK(!c.satisfied(2.0, 0.0));
  CHECK(c.margin(1.0, 0.0) == doctest::Approx(1.2));
}
