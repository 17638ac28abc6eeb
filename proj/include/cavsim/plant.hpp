#pragma once

#include <cstdint>
#include <vector>

#include "cavsim/geometry.hpp"
#include "cavsim/model.hpp"

namespace cavsim {

// Exact double-integrator step over one piece of constant control.  Speed is
// clamped at zero with stop-time sub-integration; no reversing.
VehicleState plant_step(const VehicleState& state, double u, double dt);

// Bounded measurement noise; every sample satisfies |w| <= eps1 per component.
struct NoiseModel {
  enum class Kind { Uniform, TruncatedGaussian };
  Kind kind = Kind::Uniform;
  double eps1 = 0.0;
  uint64_t seed = 0;

  static NoiseModel from_config(const NoiseConfig& cfg, double eps1);

  // Deterministic draw keyed by (vehicle, tick, channel).
  double sample(uint64_t vehicle, uint64_t tick, uint64_t channel) const;
};

// Noise channels keep independent draws per estimate source.
enum NoiseChannel : uint64_t {
  kChannelToRsuX = 1,
  kChannelToRsuV = 2,
  kChannelSelfX = 3,
  kChannelSelfV = 4,
  kChannelPerceptX = 5,
  kChannelPerceptV = 6,
};

StateEstimate measure(const VehicleState& state, const NoiseModel& noise, uint64_t vehicle,
                      uint64_t tick, EstimateSource source, double t);

struct PerceptionModel {
  double radius = 50.0;
  double angle = 3.14159265;
  double p_detect = 1.0;
  uint64_t seed = 0;
  // Detection outcomes refresh once per epoch; an epoch of one tick gives
  // independent per-call draws.
  uint64_t epoch_ticks = 1;
};

struct PerceivedVehicle {
  int id = 0;
  StateEstimate estimate;
};

struct PerceptionTarget {
  int id = 0;
  VehicleState state;
  const RouteGeometry* route = nullptr;
};

// Local range/angle perception in route coordinates: a peer is observable when
// it is ahead on a shared lane segment within the radius, or when both
// vehicles are close to a shared merging point.  Detections are independent
// Bernoulli draws per tick; fake vehicles must not be passed in (they have no
// physical body).
std::vector<PerceivedVehicle> perceive(int ego_id, const VehicleState& ego,
                                       const RouteGeometry& ego_route,
                                       const std::vector<PerceptionTarget>& others,
                                       const PerceptionModel& model, const NoiseModel& noise,
                                       uint64_t tick, double t);

}  // namespace cavsim
