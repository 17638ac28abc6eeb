#include "cavsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cavsim {

namespace {

double fuel_rate(double v, double u, const FuelParams& fuel) {
  double cruise = fuel.omega[0] + fuel.omega[1] * v + fuel.omega[2] * v * v +
                  fuel.omega[3] * v * v * v;
  double accel = 0.0;
  if (!fuel.accel_only_positive || u > 0.0)
    accel = (fuel.accel[0] + fuel.accel[1] * v + fuel.accel[2] * v * v) * u;
  return cruise + accel;
}

struct Moments {
  double mean = 0.0, sd = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= double(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(acc / double(xs.size() - 1));
  }
  return m;
}

}  // namespace

Summary summarize(const Trace& trace, const FuelParams& fuel) {
  Summary out;
  out.blocked_arrivals = trace.blocked_arrivals;
  out.infeasible_events = trace.infeasible_events;

  // Trapezoidal integration over the per-tick (u, v) samples of each vehicle;
  // the control sample applies over the following tick.
  struct Acc {
    bool has_prev = false;
    double prev_energy = 0.0;
    double prev_fuel = 0.0;
    double energy = 0.0;
    double fuel = 0.0;
  };
  std::map<int, Acc> acc;
  for (const auto& row : trace.rows) {
    if (row.is_fake || std::isnan(row.u)) continue;
    Acc& a = acc[row.vehicle];
    double fe = 0.5 * row.u * row.u;
    double ff = fuel_rate(row.v, row.u, fuel);
    if (a.has_prev) {
      a.energy += 0.5 * (a.prev_energy + fe) * trace.dt;
      a.fuel += 0.5 * (a.prev_fuel + ff) * trace.dt;
    }
    a.prev_energy = fe;
    a.prev_fuel = ff;
    a.has_prev = true;
  }

  std::vector<double> travel, energy, fuel_used;
  for (const auto& [id, info] : trace.vehicles) {
    VehicleMetrics vm;
    vm.id = id;
    vm.is_fake = info.is_fake;
    vm.exited = info.t_exit.has_value();
    vm.qp_solves = info.qp_solves;
    vm.triggers = info.triggers;
    vm.ticks_in_cz = info.ticks_in_cz;
    auto it = acc.find(id);
    if (it != acc.end()) {
      vm.energy = it->second.energy;
      vm.fuel = it->second.fuel;
    }
    if (vm.exited) vm.travel_time = *info.t_exit - info.t_entry;
    out.vehicles.push_back(vm);

    if (info.is_fake) {
      out.qp_solves += info.qp_solves;
      continue;
    }
    out.qp_solves += info.qp_solves;
    if (vm.exited) {
      out.exited_real += 1;
      travel.push_back(vm.travel_time);
      energy.push_back(vm.energy);
      fuel_used.push_back(vm.fuel);
    } else {
      out.holdup += 1;
    }
  }

  Moments mt = moments(travel), me = moments(energy), mf = moments(fuel_used);
  out.mean_travel_time = mt.mean;
  out.sd_travel_time = mt.sd;
  out.mean_energy = me.mean;
  out.sd_energy = me.sd;
  out.mean_fuel = mf.mean;
  out.sd_fuel = mf.sd;

  for (const auto& v : trace.violations) out.violations[to_string(v.kind)] += 1;

  std::set<int> detected;
  for (const auto& e : trace.events) {
    if (e.type == "collision") out.collisions += 1;
    if (e.type == "detection") detected.insert(e.vehicle);
  }
  std::set<int> fakes;
  for (const auto& [id, info] : trace.vehicles)
    if (info.is_fake) fakes.insert(id);
  for (int id : detected) {
    if (fakes.count(id))
      out.detections_tp += 1;
    else
      out.detections_fp += 1;
  }
  for (int id : fakes)
    if (!detected.count(id)) out.detections_fn += 1;
  return out;
}

json Summary::to_json() const {
  json j;
  j["mean_travel_time"] = mean_travel_time;
  j["sd_travel_time"] = sd_travel_time;
  j["mean_energy"] = mean_energy;
  j["sd_energy"] = sd_energy;
  j["mean_fuel"] = mean_fuel;
  j["sd_fuel"] = sd_fuel;
  j["exited_real"] = exited_real;
  j["holdup"] = holdup;
  j["blocked_arrivals"] = blocked_arrivals;
  j["qp_solves"] = qp_solves;
  j["infeasible_events"] = infeasible_events;
  j["collisions"] = collisions;
  j["detections"] = {{"tp", detections_tp}, {"fp", detections_fp}, {"fn", detections_fn}};
  json viol = json::object();
  for (const auto& [kind, count] : violations) viol[kind] = count;
  j["violations"] = viol;
  json vehicles = json::array();
  for (const auto& vm : this->vehicles) {
    vehicles.push_back({{"id", vm.id},
                        {"fake", vm.is_fake},
                        {"exited", vm.exited},
                        {"travel_time", vm.travel_time},
                        {"energy", vm.energy},
                        {"fuel", vm.fuel},
                        {"qp_solves", vm.qp_solves},
                        {"triggers", vm.triggers},
                        {"ticks_in_cz", vm.ticks_in_cz}});
  }
  j["vehicles"] = vehicles;
  return j;
}

}  // namespace cavsim
