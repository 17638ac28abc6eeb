#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cavsim/model.hpp"
#include "cavsim/trace.hpp"

namespace cavsim {

struct VehicleMetrics {
  int id = 0;
  bool is_fake = false;
  bool exited = false;
  double travel_time = 0.0;  // valid when exited
  double energy = 0.0;       // integral of u^2/2
  double fuel = 0.0;
  long qp_solves = 0;
  long triggers = 0;
  long ticks_in_cz = 0;
};

// Post-hoc performance measures; averages cover exited real vehicles only.
struct Summary {
  std::vector<VehicleMetrics> vehicles;
  double mean_travel_time = 0.0;
  double sd_travel_time = 0.0;
  double mean_energy = 0.0;
  double sd_energy = 0.0;
  double mean_fuel = 0.0;
  double sd_fuel = 0.0;
  int exited_real = 0;
  int holdup = 0;            // real vehicles that never exited
  int blocked_arrivals = 0;  // never admitted
  long qp_solves = 0;
  long infeasible_events = 0;
  std::map<std::string, long> violations;  // per constraint kind, tick-instances
  long collisions = 0;
  int detections_tp = 0;
  int detections_fp = 0;
  int detections_fn = 0;  // fakes never detected

  json to_json() const;
};

Summary summarize(const Trace& trace, const FuelParams& fuel);

}  // namespace cavsim
