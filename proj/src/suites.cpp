#include "cavsim/suites.hpp"

#include <cmath>

#include "cavsim/metrics.hpp"
#include "cavsim/scenarios.hpp"
#include "cavsim/sim.hpp"

namespace cavsim {

namespace {

bool suite_invariance(std::ostream& out) {
  bool ok = true;
  const double eps_levels[3] = {0.0, 0.05, 0.1};
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    std::string preset = seed % 2 ? "fig1-intersection" : "single-merge";
    int vehicles = 2 + int(seed % 5);
    ScenarioConfig cfg =
        scenarios::no_attack(preset, vehicles, eps_levels[seed % 3], seed);
    cfg.sim.t_max = 40.0;
    Trace trace = Simulation(std::move(cfg)).run();
    if (!trace.violations.empty()) {
      out << "invariance: seed " << seed << " produced " << trace.violations.size()
          << " ground-truth violations\n";
      ok = false;
    }
  }
  out << "invariance: " << (ok ? "pass" : "FAIL") << "\n";
  return ok;
}

bool suite_economy(std::ostream& out) {
  ScenarioConfig cfg = scenarios::no_attack("fig1-intersection", 8, 0.1, 7);
  cfg.sim.t_max = 90.0;
  Trace trace = Simulation(std::move(cfg)).run();
  bool ok = true;
  for (const auto& [id, info] : trace.vehicles) {
    if (info.is_fake) continue;
    if (info.qp_solves >= info.ticks_in_cz) {
      out << "economy: vehicle " << id << " solved " << info.qp_solves << " QPs over "
          << info.ticks_in_cz << " ticks\n";
      ok = false;
    }
  }
  out << "economy: " << (ok ? "pass" : "FAIL") << "\n";
  return ok;
}

bool suite_determinism(std::ostream& out) {
  auto once = [] {
    ScenarioConfig cfg = scenarios::no_attack("fig1-intersection", 5, 0.1, 11);
    cfg.sim.t_max = 30.0;
    return Simulation(std::move(cfg)).run().rows_csv();
  };
  bool ok = once() == once();
  out << "determinism: " << (ok ? "pass" : "FAIL") << "\n";
  return ok;
}

bool suite_robustness(std::ostream& out) {
  long robust_violations = 0, plain_violations = 0;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    Trace with = Simulation(scenarios::bias_attack(seed, true)).run();
    Trace without = Simulation(scenarios::bias_attack(seed, false)).run();
    robust_violations += long(with.violations.size());
    plain_violations += long(without.violations.size());
  }
  bool ok = robust_violations == 0 && plain_violations > 0;
  out << "robustness: robust=" << robust_violations
      << " non-robust=" << plain_violations << " -> " << (ok ? "pass" : "FAIL") << "\n";
  return ok;
}

bool suite_mitigation(std::ostream& out) {
  Summary baseline = summarize(Simulation(scenarios::stall_sybil(3, true, 0)).run(), {});
  Summary with = summarize(Simulation(scenarios::stall_sybil(3, true)).run(), {});
  Summary without = summarize(Simulation(scenarios::stall_sybil(3, false)).run(), {});
  bool attack_hurts = (without.holdup + without.blocked_arrivals) > 0 ||
                      without.mean_travel_time >= 1.5 * baseline.mean_travel_time;
  bool mitigated = with.holdup == 0 &&
                   with.mean_travel_time <= 1.15 * baseline.mean_travel_time;
  bool ok = attack_hurts && mitigated && with.collisions == 0;
  out << "mitigation: travel baseline=" << baseline.mean_travel_time
      << " with=" << with.mean_travel_time << " without=" << without.mean_travel_time
      << " holdup_without=" << without.holdup + without.blocked_arrivals << " -> "
      << (ok ? "pass" : "FAIL") << "\n";
  return ok;
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"invariance", "economy", "determinism", "robustness", "mitigation"};
}

bool run_suite(const std::string& name, std::ostream& out) {
  if (name == "invariance") return suite_invariance(out);
  if (name == "economy") return suite_economy(out);
  if (name == "determinism") return suite_determinism(out);
  if (name == "robustness") return suite_robustness(out);
  if (name == "mitigation") return suite_mitigation(out);
  out << "unknown suite \"" << name << "\"\n";
  return false;
}

}  // namespace cavsim
