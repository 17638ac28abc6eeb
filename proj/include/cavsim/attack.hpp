#pragma once

#include <optional>
#include <vector>

#include "cavsim/model.hpp"

namespace cavsim {

// Fabricated trajectory of one spoofed vehicle.  The generators integrate the
// double-integrator exactly so the reports look plausible; the stall generator
// freezes its position while still claiming speed, which is what eventually
// fails the model-conformity check.
class SybilTrajectory {
 public:
  SybilTrajectory(const SybilGeneratorSpec& spec, double t_spawn, double u_min);

  // Reported (x, v) at absolute time t.
  std::pair<double, double> report(double t) const;

 private:
  SybilGeneratorSpec spec_;
  double t_spawn_ = 0.0;
  double decel_ = 0.0;      // stall mode: braking rate to stop before stop_before
  double t_stop_ = 0.0;     // stall mode: relative time at standstill
  double x_stop_ = 0.0;
};

struct SybilInstance {
  int id = 0;
  std::string route;
  SybilTrajectory trajectory;
  double report_until = 1e30;  // attacker goes silent afterwards
};

// Spawns the fake identities of one sybil attack at its start time.  The ids
// are assigned by the simulation; admission into the queue is the caller's
// job so the coordinator path stays untouched.
std::vector<SybilInstance> spawn_sybil(const AttackSpec& spec, double t, int first_fake_id,
                                       int max_sybil, double u_min);

// Additive bias on a (position, speed) estimate.  A stealthy tampering keeps
// the result within eps1 of the ground truth, which is exactly what lets it
// pass the bad-data detector; non-stealthy bias is allowed only when flagged.
struct BiasResult {
  StateEstimate estimate;
  bool applied = false;
};
BiasResult bias_inject(const StateEstimate& estimate, double truth_x, double truth_v,
                       const std::array<double, 2>& g, double eps1, bool stealthy);

}  // namespace cavsim
