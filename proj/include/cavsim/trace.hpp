#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cavsim/model.hpp"

namespace cavsim {

struct TraceRow {
  double t = 0.0;
  int vehicle = 0;
  int index = 0;
  bool is_fake = false;
  double x = 0.0;
  double v = 0.0;
  double u = 0.0;
  double x_hat = 0.0;
  double v_hat = 0.0;
  double tau = 0.0;
  double b_rear = std::numeric_limits<double>::quiet_NaN();   // truth, min active
  double b_merge = std::numeric_limits<double>::quiet_NaN();  // truth, min active
  bool triggered = false;
  bool infeasible = false;
};

struct TraceEvent {
  double t = 0.0;
  int vehicle = 0;
  std::string type;
  std::string detail;
};

struct VehicleInfo {
  int id = 0;
  bool is_fake = false;
  std::string route;
  double t_entry = 0.0;
  std::optional<double> t_exit;
  long qp_solves = 0;
  long triggers = 0;
  long ticks_in_cz = 0;
  double plant_energy = 0.0;  // trapezoidal accumulation alongside stepping
};

struct ViolationRecord {
  double t = 0.0;
  int vehicle = 0;
  ConstraintKind kind = ConstraintKind::RearEnd;
  int peer = 0;
  double value = 0.0;
};

struct Trace {
  double dt = 0.01;
  std::vector<TraceRow> rows;
  std::vector<TraceEvent> events;
  std::map<int, VehicleInfo> vehicles;
  std::vector<ViolationRecord> violations;  // one record per violating tick
  long infeasible_events = 0;
  int blocked_arrivals = 0;  // scheduled arrivals that never found entry room

  std::string rows_csv() const;
  std::string events_csv() const;
  void write(const std::string& dir) const;
};

}  // namespace cavsim
