#pragma once

#include <cstdint>
#include <string>

#include "cavsim/model.hpp"

namespace cavsim::scenarios {

// Seeded no-attack scenario on a preset geometry.
ScenarioConfig no_attack(const std::string& preset, int vehicles, double eps1,
                         uint64_t seed);

// Slow leader, fast follower, stealthy uplink bias on the leader plus a sybil
// identity on a crossing lane; used for the robust-vs-nonrobust contrast.
ScenarioConfig bias_attack(uint64_t seed, bool robust);

// A stalling spoofed vehicle blocking a busy lane.
ScenarioConfig stall_sybil(uint64_t seed, bool mitigation, int fakes = 1);

// A real vehicle forced into the detected set ahead of a follower.
ScenarioConfig forced_fp(uint64_t seed, double p_detect);

// Thirty-vehicle mixed-trust comparison scenario.
ScenarioConfig trust_comparison(uint64_t seed, double alpha, bool trust_aware);

}  // namespace cavsim::scenarios
