#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "cavsim/geometry.hpp"
#include "cavsim/model.hpp"
#include "cavsim/trust.hpp"

namespace cavsim {

// One row of the coordinator's FIFO queue table.  is_fake is ground truth the
// algorithms never read; it exists for metrics and test oracles.
struct QueueEntry {
  int id = 0;
  std::string route;
  StateEstimate report;       // latest (possibly attacked) reported state
  double last_report_time = 0.0;
  TrustRecord trust;
  std::vector<ReportSample> report_history;
  bool is_fake = false;
  double t_entry = 0.0;
};

class QueueTable {
 public:
  // Appends with index N+1; trust starts at zero. Throws on duplicate id.
  int admit(int id, const std::string& route, double t, size_t history_cap);

  // Removes the entry at the 1-based index; larger indices shift down.
  void release(int index);

  int index_of(int id) const;            // 1-based, 0 if absent
  bool contains(int id) const { return index_of(id) != 0; }
  QueueEntry& at(int index) { return entries_.at(size_t(index - 1)); }
  const QueueEntry& at(int index) const { return entries_.at(size_t(index - 1)); }
  QueueEntry& by_id(int id) { return at(index_of(id)); }
  const QueueEntry& by_id(int id) const { return at(index_of(id)); }
  int size() const { return int(entries_.size()); }
  const std::vector<QueueEntry>& entries() const { return entries_; }

  // Moves the entry with the given id to the position just after another id.
  void move_after(int id, int after_id);
  void move_to_tail(int id);
  // Applies a full 1-based permutation: new_order[k] is the id placed at k+1.
  void apply_order(const std::vector<int>& new_order);

 private:
  std::vector<QueueEntry> entries_;
};

// Cooperation sets from the trust-based search: the rear-end chain and the
// per-merging-point chains.
struct CooperationSets {
  std::vector<int> rear;                            // peer ids, nearest first
  std::vector<std::pair<int, int>> merging;         // (peer id, mp id)
};

struct SearchOptions {
  double delta = 0.1;
  bool trust_aware = true;          // false: every peer treated as zero-trust
  std::set<int> excluded;           // detected fakes dropped by mitigation
};

// Walks backward through the preceding CAVs for each constraint family and
// collects indices until (inclusive) the first peer with tau >= 1 - delta.
CooperationSets trust_based_search(const QueueTable& table, int index,
                                   const IntersectionGeometry& geometry,
                                   const SearchOptions& opts);

struct PacketPeer {
  int id = 0;
  StateEstimate estimate;
  double tau = 0.0;
  ConstraintKind role = ConstraintKind::RearEnd;
  std::optional<int> mp;
  double gap_offset = 0.0;  // gap = x_peer - x_self + gap_offset
};

struct InfoPacket {
  int receiver = 0;
  std::vector<PacketPeer> peers;  // deterministic order: rear chain, then merging
};

InfoPacket assemble_packet(const QueueTable& table, int index,
                           const IntersectionGeometry& geometry,
                           const CooperationSets& sets);

}  // namespace cavsim
