#include "cavsim/mitigation.hpp"

#include <algorithm>
#include <numeric>

namespace cavsim {

std::vector<int> DetectionMonitor::update(const std::map<int, double>& taus, double t) {
  std::vector<int> fresh;
  for (const auto& [id, tau] : taus) {
    auto prev_it = last_tau_.find(id);
    bool has_prev = prev_it != last_tau_.end();
    bool qualifying = has_prev && tau <= 1.0 - delta_ && tau <= prev_it->second + 1e-12;
    if (detected_.count(id)) {
      last_tau_[id] = tau;
      continue;
    }
    if (qualifying) {
      auto [it, inserted] = windows_.try_emplace(id, Window{t, 0});
      it->second.streak += 1;
      if (it->second.streak >= eta_) {
        detected_.insert(id);
        detection_time_[id] = t;
        windows_.erase(id);
        fresh.push_back(id);
      }
    } else {
      windows_.erase(id);
    }
    last_tau_[id] = tau;
  }
  return fresh;
}

void DetectionMonitor::forget(int id) {
  last_tau_.erase(id);
  windows_.erase(id);
}

int ReschedulePlan::index_of(int id) const {
  for (size_t k = 0; k < order.size(); ++k)
    if (order[k] == id) return int(k + 1);
  return 0;
}

double ReschedulePlan::objective_on_target(const std::set<int>& fakes) const {
  double sum = 0.0;
  for (size_t k = 0; k < target_order.size(); ++k)
    if (fakes.count(target_order[k])) sum += double(k + 1);
  return sum;
}

namespace {

const RescheduleInstance::Entry* find_entry(const RescheduleInstance& inst, int id) {
  for (const auto& e : inst.entries)
    if (e.id == id) return &e;
  return nullptr;
}

// All ids explicitly or implicitly constrained by `root`: transitive closure
// of the constrained-by edges.
std::set<int> constrained_closure(const RescheduleInstance& inst, int root) {
  std::set<int> closed;
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& e : inst.entries) {
      if (closed.count(e.id)) continue;
      bool hits = false;
      for (int p : e.rear_peers)
        if (p == root || closed.count(p)) { hits = true; break; }
      if (!hits)
        for (int p : e.merge_peers)
          if (p == root || closed.count(p)) { hits = true; break; }
      if (hits) {
        closed.insert(e.id);
        grew = true;
      }
    }
  }
  return closed;
}

size_t position_of(const std::vector<int>& order, int id) {
  return size_t(std::find(order.begin(), order.end(), id) - order.begin());
}

}  // namespace

ReschedulePlan reschedule(const RescheduleInstance& instance) {
  ReschedulePlan plan;
  std::vector<int> order;
  std::set<int> fakes;
  for (const auto& e : instance.entries) {
    order.push_back(e.id);
    if (e.fake) fakes.insert(e.id);
  }
  std::vector<int> original = order;

  // Fakes in ascending current index order; positions re-derived per step.
  std::vector<int> fake_ids;
  for (int id : order)
    if (fakes.count(id)) fake_ids.push_back(id);

  for (int f : fake_ids) {
    // Physical immediate follower: the entry whose nearest leader is this fake.
    const RescheduleInstance::Entry* follower = nullptr;
    for (const auto& e : instance.entries)
      if (!e.fake && e.physical_leader && *e.physical_leader == f) {
        follower = &e;
        break;
      }
    bool scenario2 = follower != nullptr && follower->in_zone &&
                     position_of(order, f) < position_of(order, follower->id);
    if (!scenario2) {
      order.erase(order.begin() + long(position_of(order, f)));
      order.push_back(f);
      continue;
    }

    // Slot the fake just ahead of its follower; everything in between moves up.
    order.erase(order.begin() + long(position_of(order, f)));
    order.insert(order.begin() + long(position_of(order, follower->id)), f);

    // The follower and everything constrained by it stay behind the
    // unconstrained vehicles, which jump ahead of the block.
    std::set<int> block = constrained_closure(instance, follower->id);
    block.insert(follower->id);
    block.insert(f);
    size_t p = position_of(order, f);
    std::vector<int> head(order.begin(), order.begin() + long(p));
    std::vector<int> jumpers, tail_block;
    for (size_t k = p; k < order.size(); ++k) {
      if (block.count(order[k]))
        tail_block.push_back(order[k]);
      else
        jumpers.push_back(order[k]);
    }
    order = head;
    order.insert(order.end(), jumpers.begin(), jumpers.end());
    order.insert(order.end(), tail_block.begin(), tail_block.end());

    plan.pending.push_back({follower->id, f});
  }

  plan.order = order;
  plan.changed = order != original;
  // Target: the fixpoint of the overtake process, with every fake at the tail.
  for (int id : order)
    if (!fakes.count(id)) plan.target_order.push_back(id);
  for (int id : order)
    if (fakes.count(id)) plan.target_order.push_back(id);
  return plan;
}

bool overtake_done(const StateEstimate& est_follower, const StateEstimate& est_passed,
                   double phi, double big_delta) {
  return est_follower.x_hat - est_passed.x_hat - phi * est_passed.v_hat - big_delta >= 0.0;
}

IlpSolution brute_force_requeue(const RescheduleInstance& instance) {
  IlpSolution best;
  const auto& entries = instance.entries;
  int n = int(entries.size());
  int k_min = -1;
  for (int k = 0; k < n; ++k)
    if (entries[size_t(k)].fake) { k_min = k; break; }
  if (k_min < 0) {
    best.objective = 0.0;
    for (const auto& e : entries) best.order.push_back(e.id);
    return best;
  }

  std::vector<int> head, movable;
  for (int k = 0; k < k_min; ++k) head.push_back(entries[size_t(k)].id);
  for (int k = k_min; k < n; ++k) movable.push_back(entries[size_t(k)].id);

  auto is_fake = [&](int id) { return find_entry(instance, id)->fake; };

  std::vector<int> perm = movable;
  std::sort(perm.begin(), perm.end());
  do {
    // New 1-based index per id.
    std::map<int, int> pos;
    for (int k = 0; k < k_min; ++k) pos[head[size_t(k)]] = k + 1;
    for (size_t k = 0; k < perm.size(); ++k) pos[perm[k]] = k_min + int(k) + 1;

    bool ok = true;
    for (const auto& e : entries) {
      auto check_family = [&](const std::vector<int>& peers) {
        for (int p : peers) {
          if (is_fake(p)) continue;  // constraints against fakes are lifted
          if (pos.at(e.id) - pos.at(p) < 1) return false;
        }
        return true;
      };
      if (!check_family(e.rear_peers) || !check_family(e.merge_peers)) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    double obj = 0.0;
    for (const auto& e : entries)
      if (e.fake) obj += double(pos.at(e.id));
    if (obj > best.objective) {
      best.objective = obj;
      best.order = head;
      best.order.insert(best.order.end(), perm.begin(), perm.end());
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace cavsim
