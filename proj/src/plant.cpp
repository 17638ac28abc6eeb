#include "cavsim/plant.hpp"

#include <algorithm>
#include <cmath>

#include "cavsim/rng.hpp"

namespace cavsim {

VehicleState plant_step(const VehicleState& state, double u, double dt) {
  VehicleState next = state;
  next.u_applied = u;
  double v_end = state.v + u * dt;
  if (v_end >= 0.0) {
    next.x = state.x + state.v * dt + 0.5 * u * dt * dt;
    next.v = v_end;
    return next;
  }
  // Braking through standstill: integrate up to the stop time, then hold.
  double t_stop = (u < 0.0) ? -state.v / u : 0.0;
  t_stop = std::clamp(t_stop, 0.0, dt);
  next.x = state.x + state.v * t_stop + 0.5 * u * t_stop * t_stop;
  next.v = 0.0;
  return next;
}

NoiseModel NoiseModel::from_config(const NoiseConfig& cfg, double eps1) {
  NoiseModel m;
  m.kind = cfg.distribution == "truncated-gaussian" ? Kind::TruncatedGaussian : Kind::Uniform;
  m.eps1 = eps1;
  m.seed = cfg.seed;
  return m;
}

double NoiseModel::sample(uint64_t vehicle, uint64_t tick, uint64_t channel) const {
  if (eps1 <= 0.0) return 0.0;
  if (kind == Kind::Uniform) return hashed_symmetric(seed, {vehicle, tick, channel}, eps1);
  // Truncated gaussian: Box-Muller with sigma = eps1/2, hard-truncated to the
  // support; the bound dominates the distribution shape.
  double u1 = hashed_unit(seed, {vehicle, tick, channel, 11});
  double u2 = hashed_unit(seed, {vehicle, tick, channel, 13});
  u1 = std::max(u1, 1e-12);
  double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  return std::clamp(g * eps1 / 2.0, -eps1, eps1);
}

StateEstimate measure(const VehicleState& state, const NoiseModel& noise, uint64_t vehicle,
                      uint64_t tick, EstimateSource source, double t) {
  uint64_t cx = kChannelSelfX, cv = kChannelSelfV;
  if (source == EstimateSource::CoordinatorPacket) {
    cx = kChannelToRsuX;
    cv = kChannelToRsuV;
  } else if (source == EstimateSource::LocalPerception) {
    cx = kChannelPerceptX;
    cv = kChannelPerceptV;
  }
  StateEstimate est;
  est.x_hat = state.x + noise.sample(vehicle, tick, cx);
  est.v_hat = state.v + noise.sample(vehicle, tick, cv);
  est.source = source;
  est.stamp = t;
  return est;
}

std::vector<PerceivedVehicle> perceive(int ego_id, const VehicleState& ego,
                                       const RouteGeometry& ego_route,
                                       const std::vector<PerceptionTarget>& others,
                                       const PerceptionModel& model, const NoiseModel& noise,
                                       uint64_t tick, double t) {
  std::vector<PerceivedVehicle> out;
  for (const auto& target : others) {
    if (target.id == ego_id || target.route == nullptr) continue;
    bool visible = false;

    LaneRelation rel = lane_relation(ego_route, ego.x, *target.route, target.state.x);
    if (rel != LaneRelation::None) {
      double gap = target.state.x - ego.x + rear_gap_offset(ego_route, *target.route, rel);
      if (gap > 0.0 && gap <= model.radius) visible = true;  // forward sector
    }
    if (!visible) {
      // Near a shared merging point on the ego's own trajectory.
      for (const auto& [mp, pos] : ego_route.merging_points) {
        double d_ego = pos - ego.x;
        if (d_ego <= 0.0 || d_ego > model.radius) continue;
        auto peer_pos = target.route->mp_position(mp);
        if (!peer_pos) continue;
        double d_peer = *peer_pos - target.state.x;
        if (std::abs(d_peer) <= model.radius) {
          visible = true;
          break;
        }
      }
    }
    if (!visible) continue;
    if (model.p_detect < 1.0) {
      uint64_t epoch = tick / std::max<uint64_t>(model.epoch_ticks, 1);
      double draw =
          hashed_unit(model.seed, {uint64_t(ego_id), uint64_t(target.id), epoch});
      if (draw >= model.p_detect) continue;
    }
    PerceivedVehicle pv;
    pv.id = target.id;
    pv.estimate =
        measure(target.state, noise, uint64_t(target.id) * 1000003ull + uint64_t(ego_id),
                tick, EstimateSource::LocalPerception, t);
    out.push_back(pv);
  }
  return out;
}

}  // namespace cavsim
