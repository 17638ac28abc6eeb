#include "cavsim/attack.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cavsim {

SybilTrajectory::SybilTrajectory(const SybilGeneratorSpec& spec, double t_spawn,
                                 double u_min)
    : spec_(spec), t_spawn_(t_spawn) {
  if (spec_.kind == "stall") {
    double dist = std::max(1.0, spec_.stop_before - spec_.x0);
    // Brake so the claimed trajectory rests inside the available distance.
    double needed = spec_.v0 * spec_.v0 / (2.0 * dist);
    decel_ = std::min(std::max(needed, 0.5), std::abs(u_min));
    t_stop_ = spec_.v0 / decel_;
    x_stop_ = spec_.x0 + spec_.v0 * t_stop_ - 0.5 * decel_ * t_stop_ * t_stop_;
  }
}

std::pair<double, double> SybilTrajectory::report(double t) const {
  double rel = std::max(0.0, t - t_spawn_);
  if (spec_.kind == "held-speed") {
    return {spec_.x0 + spec_.v0 * rel, spec_.v0};
  }
  if (spec_.kind == "scripted") {
    double x = spec_.x0, v = spec_.v0, cursor = 0.0;
    auto advance = [&](double until, double u) {
      double span = std::min(until, rel) - cursor;
      if (span <= 0.0) return;
      x += v * span + 0.5 * u * span * span;
      v += u * span;
      cursor += span;
    };
    if (spec_.script.empty()) {
      advance(rel, 0.0);
    } else {
      advance(spec_.script[0].first, 0.0);  // coast until the first piece
      for (size_t k = 0; k < spec_.script.size(); ++k) {
        double end = (k + 1 < spec_.script.size()) ? spec_.script[k + 1].first : rel;
        advance(end, spec_.script[k].second);
      }
    }
    return {x, v};
  }
  // stall: consistent deceleration to rest, then a frozen position reported
  // together with a nonzero claimed speed.
  if (rel < t_stop_) {
    double x = spec_.x0 + spec_.v0 * rel - 0.5 * decel_ * rel * rel;
    double v = spec_.v0 - decel_ * rel;
    return {x, v};
  }
  return {x_stop_, spec_.stall_claim_speed};
}

std::vector<SybilInstance> spawn_sybil(const AttackSpec& spec, double t, int first_fake_id,
                                       int max_sybil, double u_min) {
  if (spec.count > max_sybil)
    throw std::invalid_argument("sybil count exceeds the configured bound");
  std::vector<SybilInstance> out;
  for (int k = 0; k < spec.count; ++k) {
    if (spec.routes.empty())
      throw std::invalid_argument("sybil attack needs at least one route");
    SybilInstance inst{first_fake_id + k, spec.routes[size_t(k) % spec.routes.size()],
                       SybilTrajectory(spec.generator, t, u_min), spec.stop};
    out.push_back(std::move(inst));
  }
  return out;
}

BiasResult bias_inject(const StateEstimate& estimate, double truth_x, double truth_v,
                       const std::array<double, 2>& g, double eps1, bool stealthy) {
  double gmax = std::max(std::abs(g[0]), std::abs(g[1]));
  if (stealthy && gmax > eps1 + 1e-12)
    throw std::invalid_argument("stealthy bias exceeds epsilon1");
  BiasResult out;
  out.estimate = estimate;
  out.estimate.x_hat += g[0];
  out.estimate.v_hat += g[1];
  if (stealthy) {
    // The bad-data detector bounds total deviation from truth by eps1; a
    // stealthy adversary shapes the injected data to stay inside that budget.
    out.estimate.x_hat = std::clamp(out.estimate.x_hat, truth_x - eps1, truth_x + eps1);
    out.estimate.v_hat = std::clamp(out.estimate.v_hat, truth_v - eps1, truth_v + eps1);
  }
  out.applied = true;
  return out;
}

}  // namespace cavsim
