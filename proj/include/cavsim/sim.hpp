#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cavsim/attack.hpp"
#include "cavsim/controller.hpp"
#include "cavsim/coordinator.hpp"
#include "cavsim/geometry.hpp"
#include "cavsim/mitigation.hpp"
#include "cavsim/model.hpp"
#include "cavsim/plant.hpp"
#include "cavsim/trace.hpp"
#include "cavsim/trust.hpp"

namespace cavsim {

// Per-tick view for observers; everything refers to the state after the
// trigger/control phase and before the plant step.
struct VehicleObs {
  int id = 0;
  const VehicleState* truth = nullptr;
  double x_hat = 0.0;
  double v_hat = 0.0;
  const std::map<PeerKey, PeerSnapshot>* peers = nullptr;
  bool triggered = false;
  bool fallback = false;  // holding the max-braking fallback of an infeasible QP
  double u_applied = 0.0;
  double t_entry = 0.0;
  const std::string* route = nullptr;
};

struct TickObs {
  double t = 0.0;
  long tick = 0;
  std::vector<VehicleObs> vehicles;
};

using TickObserver = std::function<void(const TickObs&)>;

// The deterministic event-triggered simulation loop: arrivals, attacks, the
// coordinator (trust, detection, search, packets), per-vehicle triggers and
// QPs, exact plant integration, and trace assembly.  Identical seeds give
// bitwise-identical traces.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg);

  Trace run(const TickObserver& observer = nullptr);

  const IntersectionGeometry& geometry() const { return geometry_; }

 private:
  struct RealVehicle {
    int id = 0;
    std::string route;
    VehicleState truth;
    std::optional<double> v_ref;
    EventAnchor anchor;
    double u_held = 0.0;
    bool fallback = false;
    bool present = false;
    bool exited = false;
    double prev_energy_sample = 0.0;
    bool has_energy_sample = false;
  };

  struct FakeVehicle {
    SybilInstance inst;
    bool present = false;
    bool released = false;
  };

  struct ScheduledArrival {
    double t = 0.0;
    std::string route;
    double v0 = 0.0;
    std::optional<double> v_ref;
    bool admitted = false;
  };

  ScenarioConfig cfg_;
  IntersectionGeometry geometry_;
  NoiseModel noise_;
  PerceptionModel perception_;

  Trace trace_;
  QueueTable table_;
  DetectionMonitor monitor_;
  std::vector<RealVehicle> reals_;
  std::vector<FakeVehicle> fakes_;
  std::vector<ScheduledArrival> schedule_;
  std::map<int, CooperationSets> last_sets_;
  std::vector<PendingOvertake> pending_;
  std::set<std::pair<int, int>> completed_overtakes_;
  std::set<std::pair<int, int>> colliding_;
  std::vector<size_t> sybil_spawned_;
  std::deque<std::map<PeerKey, PeerSnapshot>> obs_peer_maps_;
  bool force_fp_done_ = false;
  int next_fake_id_ = 10000;

  void build_schedule();
  RealVehicle* real_by_id(int id);
  FakeVehicle* fake_by_id(int id);
  void log_event(double t, int vehicle, const std::string& type, const std::string& detail);

  void phase_arrivals(double t, long tick);
  void phase_reports(double t, long tick);
  void phase_coordinator(double t, long tick);
  void run_mitigation(double t);
  std::map<PeerKey, PeerSnapshot> collect_peers(const RealVehicle& rv, long tick, double t,
                                                const InfoPacket& packet);
  void phase_control(double t, long tick, std::vector<TraceRow>& rows, TickObs& obs);
  void phase_plant(double t);
  void record_truth_barriers(double t, std::vector<TraceRow>& rows);

  std::map<int, InfoPacket> packets_;
};

// Fuel/energy helpers shared with the metrics module live there; the engine
// only accumulates the trapezoidal energy alongside stepping.

}  // namespace cavsim
