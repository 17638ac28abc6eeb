#include "cavsim/scenarios.hpp"

#include <cmath>
#include <stdexcept>

namespace cavsim::scenarios {

namespace {

ScenarioConfig base(const std::string& name, uint64_t seed) {
  ScenarioConfig cfg;
  cfg.name = name;
  cfg.arrivals.seed = seed * 3 + 1;
  cfg.noise.seed = seed * 3 + 2;
  cfg.perception.seed = seed * 3 + 3;
  return cfg;
}

}  // namespace

ScenarioConfig no_attack(const std::string& preset, int vehicles, double eps1,
                         uint64_t seed) {
  ScenarioConfig cfg = base("no-attack-" + preset, seed);
  cfg.geometry.preset = preset;
  cfg.arrivals.mode = "poisson";
  cfg.arrivals.rate_veh_per_hour = 1800.0;
  cfg.arrivals.count = vehicles;
  cfg.arrivals.initial_speed = 10.0;
  cfg.params.epsilon1 = eps1;
  cfg.sim.t_max = 60.0;
  auto errs = validate_scenario(cfg);
  if (!errs.empty()) throw std::logic_error("no_attack builder: " + errs.front());
  return cfg;
}

ScenarioConfig bias_attack(uint64_t seed, bool robust) {
  ScenarioConfig cfg = base("bias-attack", seed);
  cfg.geometry.preset = "single-merge";
  cfg.arrivals.mode = "explicit";
  ExplicitArrival leader{0.0, "A", 12.0, 5.0};
  ExplicitArrival follower{2.0, "A", 12.0, std::nullopt};
  cfg.arrivals.list = {leader, follower};
  cfg.params.epsilon1 = 0.1;
  cfg.event.s_x = {2.5, 0.8};
  cfg.mitigation.enabled = false;
  cfg.toggles.robust = robust;
  cfg.sim.t_max = 80.0;

  // Tampering on the leader's uplink and again on every relayed copy pushes
  // the reported state to the stealthy envelope deterministically.
  AttackSpec up;
  up.kind = "bias-injection";
  up.start = 3.0;
  up.targets = {1};
  up.direction = "to-rsu";
  up.bias = {0.1, 0.1};
  up.stealthy = true;
  cfg.attacks.push_back(up);
  AttackSpec down;
  down.kind = "bias-injection";
  down.start = 3.0;
  down.targets = {2};
  down.direction = "from-rsu";
  down.bias = {0.1, 0.1};
  down.stealthy = true;
  cfg.attacks.push_back(down);

  AttackSpec sybil;
  sybil.kind = "sybil";
  sybil.start = 6.0;
  sybil.count = 1;
  sybil.routes = {"B"};
  sybil.generator.kind = "stall";
  sybil.generator.x0 = 20.0;
  sybil.generator.v0 = 6.0;
  sybil.generator.stop_before = 60.0;
  cfg.attacks.push_back(sybil);

  auto errs = validate_scenario(cfg);
  if (!errs.empty()) throw std::logic_error("bias_attack builder: " + errs.front());
  return cfg;
}

ScenarioConfig stall_sybil(uint64_t seed, bool mitigation, int fakes) {
  ScenarioConfig cfg = base("stall-sybil", seed);
  cfg.geometry.preset = "fig1-intersection";
  cfg.arrivals.mode = "poisson";
  cfg.arrivals.rate_veh_per_hour = 1200.0;
  cfg.arrivals.count = 8;
  cfg.arrivals.routes = {"W.R.S"};
  cfg.arrivals.initial_speed = 10.0;
  cfg.mitigation.enabled = mitigation;
  cfg.sim.t_max = 150.0;

  if (fakes > 0) {
    AttackSpec sybil;
    sybil.kind = "sybil";
    sybil.start = 0.2;
    sybil.count = fakes;
    sybil.routes = {"W.R.S", "N.R.S", "E.R.S"};
    sybil.generator.kind = "stall";
    sybil.generator.x0 = 40.0;
    sybil.generator.v0 = 6.0;
    sybil.generator.stop_before = 48.0;
    sybil.generator.stall_claim_speed = 6.0;
    cfg.attacks.push_back(sybil);
  }
  auto errs = validate_scenario(cfg);
  if (!errs.empty()) throw std::logic_error("stall_sybil builder: " + errs.front());
  return cfg;
}

ScenarioConfig forced_fp(uint64_t seed, double p_detect) {
  ScenarioConfig cfg = base("forced-fp", seed);
  cfg.geometry.preset = "single-merge";
  cfg.arrivals.mode = "explicit";
  ExplicitArrival leader{0.0, "A", 12.0, 7.0};
  ExplicitArrival follower{1.5, "A", 12.0, std::nullopt};
  cfg.arrivals.list = {leader, follower};
  cfg.perception.p_detect = p_detect;
  cfg.perception.radius = 60.0;
  cfg.perception.redetect_period = 0.25;
  cfg.mitigation.enabled = true;
  cfg.mitigation.force_fp_vehicle = 1;
  cfg.mitigation.force_fp_time = 6.0;
  cfg.sim.dt = 0.05;
  cfg.sim.t_max = 90.0;
  auto errs = validate_scenario(cfg);
  if (!errs.empty()) throw std::logic_error("forced_fp builder: " + errs.front());
  return cfg;
}

ScenarioConfig trust_comparison(uint64_t seed, double alpha, bool trust_aware) {
  ScenarioConfig cfg = base("trust-comparison", seed);
  cfg.geometry.preset = "fig1-intersection";
  cfg.arrivals.mode = "poisson";
  cfg.arrivals.rate_veh_per_hour = 4000.0;
  cfg.arrivals.count = 30;
  // Two heavy crossing streams: every passage through the junction yields.
  cfg.arrivals.routes = {"W.R.S", "N.R.S"};
  cfg.arrivals.initial_speed = 10.0;
  cfg.params.alpha = alpha;
  cfg.params.class_k = 0.1;       // plain-mode slope
  cfg.params.class_k_trust = 0.3; // trust-weighted slope
  cfg.trust.gamma = 0.998;
  cfg.trust.h = 50.0;
  cfg.toggles.trust_aware = trust_aware;
  cfg.sim.t_max = 400.0;

  // Affine control reference standing in for the unconstrained optimum: start
  // at sqrt(2 beta) and ramp down as the speed target is approached.
  double beta = compute_beta(alpha, cfg.params.u_min, cfg.params.u_max);
  double v0 = cfg.arrivals.initial_speed;
  cfg.reference.mode = "linear";
  cfg.reference.b = std::min(std::sqrt(2.0 * beta), cfg.params.u_max);
  cfg.reference.a = -beta / std::max(cfg.params.v_max - v0, 1.0);

  auto errs = validate_scenario(cfg);
  if (!errs.empty()) throw std::logic_error("trust_comparison builder: " + errs.front());
  return cfg;
}

}  // namespace cavsim::scenarios
