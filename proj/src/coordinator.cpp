#include "cavsim/coordinator.hpp"

#include <algorithm>
#include <stdexcept>

namespace cavsim {

int QueueTable::admit(int id, const std::string& route, double t, size_t history_cap) {
  if (contains(id)) throw std::invalid_argument("vehicle " + std::to_string(id) +
                                                " already in the queue");
  QueueEntry e;
  e.id = id;
  e.route = route;
  e.t_entry = t;
  e.last_report_time = t;
  e.trust.history_cap = history_cap;
  entries_.push_back(std::move(e));
  return int(entries_.size());
}

void QueueTable::release(int index) {
  if (index < 1 || index > size()) throw std::invalid_argument("invalid queue index");
  entries_.erase(entries_.begin() + (index - 1));
}

int QueueTable::index_of(int id) const {
  for (size_t k = 0; k < entries_.size(); ++k)
    if (entries_[k].id == id) return int(k + 1);
  return 0;
}

void QueueTable::move_after(int id, int after_id) {
  int from = index_of(id), anchor = index_of(after_id);
  if (from == 0 || anchor == 0) throw std::invalid_argument("unknown id in move_after");
  QueueEntry moved = std::move(entries_[size_t(from - 1)]);
  entries_.erase(entries_.begin() + (from - 1));
  anchor = index_of(after_id);
  entries_.insert(entries_.begin() + anchor, std::move(moved));
}

void QueueTable::move_to_tail(int id) {
  int from = index_of(id);
  if (from == 0) throw std::invalid_argument("unknown id in move_to_tail");
  QueueEntry moved = std::move(entries_[size_t(from - 1)]);
  entries_.erase(entries_.begin() + (from - 1));
  entries_.push_back(std::move(moved));
}

void QueueTable::apply_order(const std::vector<int>& new_order) {
  if (new_order.size() != entries_.size())
    throw std::invalid_argument("order size mismatch");
  std::vector<QueueEntry> next;
  next.reserve(entries_.size());
  for (int id : new_order) {
    int idx = index_of(id);
    if (idx == 0) throw std::invalid_argument("unknown id in apply_order");
    next.push_back(std::move(entries_[size_t(idx - 1)]));
    entries_[size_t(idx - 1)].id = -1;  // consumed
  }
  entries_ = std::move(next);
}

CooperationSets trust_based_search(const QueueTable& table, int index,
                                   const IntersectionGeometry& geometry,
                                   const SearchOptions& opts) {
  CooperationSets sets;
  if (index < 1 || index > table.size())
    throw std::invalid_argument("index not in table");
  const QueueEntry& self = table.at(index);
  const RouteGeometry& self_route = geometry.route(self.route);
  double threshold = 1.0 - opts.delta;
  auto effective_tau = [&](const QueueEntry& e) {
    return opts.trust_aware ? e.trust.tau : 0.0;
  };

  // Rear-end predecessor chains, one per corridor: the current lane and the
  // committed exit lane are distinct queues of leaders, each walked until its
  // first trusted member.
  bool lane_open = true, exit_open = true;
  for (int k = index - 1; k >= 1 && (lane_open || exit_open); --k) {
    const QueueEntry& peer = table.at(k);
    if (opts.excluded.count(peer.id)) continue;
    const RouteGeometry& rp = geometry.route(peer.route);
    LaneRelation rel =
        lane_relation(self_route, self.report.x_hat, rp, peer.report.x_hat);
    if (rel == LaneRelation::None) continue;
    double gap = peer.report.x_hat - self.report.x_hat +
                 rear_gap_offset(self_route, rp, rel);
    if (gap <= 0.0) continue;
    bool& open = rel == LaneRelation::SharedExit ? exit_open : lane_open;
    if (!open) continue;
    sets.rear.push_back(peer.id);
    if (effective_tau(peer) >= threshold) open = false;
  }

  // Per-merging-point chains over preceding conflicting CAVs.
  for (const auto& [mp, pos] : self_route.merging_points) {
    double d_self = pos - self.report.x_hat;
    if (d_self <= 0.0) continue;  // already passed this point
    for (int k = index - 1; k >= 1; --k) {
      const QueueEntry& peer = table.at(k);
      if (opts.excluded.count(peer.id)) continue;
      const RouteGeometry& peer_route = geometry.route(peer.route);
      auto peer_pos = peer_route.mp_position(mp);
      if (!peer_pos) continue;
      double d_peer = *peer_pos - peer.report.x_hat;
      if (d_peer <= 0.0) continue;  // peer has passed; lane geometry takes over
      sets.merging.emplace_back(peer.id, mp);
      if (effective_tau(peer) >= threshold) break;
    }
  }
  return sets;
}

InfoPacket assemble_packet(const QueueTable& table, int index,
                           const IntersectionGeometry& geometry,
                           const CooperationSets& sets) {
  InfoPacket packet;
  const QueueEntry& self = table.at(index);
  packet.receiver = self.id;
  const RouteGeometry& self_route = geometry.route(self.route);

  for (int peer_id : sets.rear) {
    const QueueEntry& peer = table.by_id(peer_id);
    const RouteGeometry& peer_route = geometry.route(peer.route);
    LaneRelation rel =
        lane_relation(self_route, self.report.x_hat, peer_route, peer.report.x_hat);
    if (rel == LaneRelation::None) continue;
    PacketPeer pp;
    pp.id = peer_id;
    pp.estimate = peer.report;
    pp.tau = peer.trust.tau;
    pp.role = ConstraintKind::RearEnd;
    pp.gap_offset = rear_gap_offset(self_route, peer_route, rel);
    packet.peers.push_back(pp);
  }
  for (const auto& [peer_id, mp] : sets.merging) {
    const QueueEntry& peer = table.by_id(peer_id);
    const RouteGeometry& peer_route = geometry.route(peer.route);
    auto self_pos = self_route.mp_position(mp);
    auto peer_pos = peer_route.mp_position(mp);
    if (!self_pos || !peer_pos) continue;
    PacketPeer pp;
    pp.id = peer_id;
    pp.estimate = peer.report;
    pp.tau = peer.trust.tau;
    pp.role = ConstraintKind::Merging;
    pp.mp = mp;
    // gap = d_self - d_peer = x_peer - x_self + (mp_self - mp_peer)
    pp.gap_offset = *self_pos - *peer_pos;
    packet.peers.push_back(pp);
  }
  return packet;
}

}  // namespace cavsim
