#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "cavsim/model.hpp"

namespace cavsim {

// Observation-window tracker.  A window opens when a vehicle's trust is at or
// below 1 - delta while non-increasing; after eta consecutive qualifying ticks
// the vehicle is declared fake and stays in the detected set.
class DetectionMonitor {
 public:
  DetectionMonitor(double delta, int eta) : delta_(delta), eta_(eta) {}

  // Feed one tick of trust values (id -> tau). Returns newly detected ids.
  std::vector<int> update(const std::map<int, double>& taus, double t);

  void force_detect(int id) { detected_.insert(id); }
  void forget(int id);  // entry left the queue
  const std::set<int>& detected() const { return detected_; }
  bool window_open(int id) const { return windows_.count(id) > 0; }
  std::optional<double> detection_time(int id) const {
    auto it = detection_time_.find(id);
    if (it == detection_time_.end()) return std::nullopt;
    return it->second;
  }

 private:
  struct Window {
    double opened = 0.0;
    int streak = 0;
  };
  double delta_;
  int eta_;
  std::map<int, double> last_tau_;
  std::map<int, Window> windows_;
  std::set<int> detected_;
  std::map<int, double> detection_time_;
};

// Abstract rescheduling instance: current queue order plus the constraint
// edges the coordinator is using.  Index 0 is the queue head.
struct RescheduleInstance {
  struct Entry {
    int id = 0;
    bool fake = false;                  // detected member of S_f
    bool in_zone = true;                // inside the rescheduling zone
    std::vector<int> rear_peers;        // ids constraining this entry (rear-end)
    std::vector<int> merge_peers;       // ids constraining this entry (merging)
    std::optional<int> physical_leader; // nearest real leader id on the lane
  };
  std::vector<Entry> entries;
};

struct PendingOvertake {
  int follower = 0;
  int fake = 0;
};

struct ReschedulePlan {
  std::vector<int> order;          // immediate queue order (ids, head first)
  std::vector<int> target_order;   // order once all pending overtakes complete
  std::vector<PendingOvertake> pending;
  bool changed = false;

  // New 1-based index of id in the immediate order.
  int index_of(int id) const;
  double objective_on_target(const std::set<int>& fakes) const;
};

// Two-scenario approximate solution of the requeueing problem: fakes with no
// dependents move straight to the tail; a fake with a physical follower slots
// just ahead of it, the block of vehicles constrained by that follower keeps
// its place behind the unconstrained ones, and the follower's overtake is left
// pending until the separation check confirms it.
ReschedulePlan reschedule(const RescheduleInstance& instance);

// Overtake completion: reported separation ahead of the passed vehicle.
bool overtake_done(const StateEstimate& est_follower, const StateEstimate& est_passed,
                   double phi, double big_delta);

// Exhaustive ILP solution used by tests and the verify suites: maximizes the
// summed new indices of the fakes subject to order preservation against real
// rear-end peers, merging peers, and a unit index separation.
struct IlpSolution {
  double objective = -1.0;
  std::vector<int> order;
};
IlpSolution brute_force_requeue(const RescheduleInstance& instance);

}  // namespace cavsim
