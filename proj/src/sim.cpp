#include "cavsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cavsim/rng.hpp"

namespace cavsim {

namespace {

std::string order_string(const std::vector<int>& ids) {
  std::string s;
  for (size_t k = 0; k < ids.size(); ++k) {
    if (k) s += ' ';
    s += std::to_string(ids[k]);
  }
  return s;
}

}  // namespace

Simulation::Simulation(ScenarioConfig cfg)
    : cfg_(std::move(cfg)),
      geometry_(build_geometry(cfg_.geometry)),
      noise_(NoiseModel::from_config(cfg_.noise, cfg_.params.epsilon1)),
      monitor_(cfg_.trust.delta, cfg_.trust.eta) {
  perception_.radius = cfg_.perception.radius;
  perception_.angle = cfg_.perception.angle;
  perception_.p_detect = cfg_.perception.p_detect;
  perception_.seed = cfg_.perception.seed;
  perception_.epoch_ticks = std::max<uint64_t>(
      1, uint64_t(std::llround(cfg_.perception.redetect_period / cfg_.sim.dt)));
  trace_.dt = cfg_.sim.dt;
  build_schedule();
}

void Simulation::build_schedule() {
  const auto& a = cfg_.arrivals;
  if (a.mode == "explicit") {
    for (const auto& e : a.list) schedule_.push_back({e.t, e.route, e.v0, e.v_ref, false});
  } else {
    SplitMix64 stream(a.seed);
    std::vector<std::string> pool = a.routes;
    if (pool.empty()) pool = geometry_.route_ids();
    double rate = a.rate_veh_per_hour / 3600.0;
    double t = 0.0;
    for (int k = 0; k < a.count; ++k) {
      double gap = -std::log(std::max(stream.unit(), 1e-12)) / rate;
      t += gap;
      std::string route = a.routes.empty()
                              ? pool[size_t(stream.next() % uint64_t(pool.size()))]
                              : pool[size_t(k) % pool.size()];
      schedule_.push_back({t, route, a.initial_speed, std::nullopt, false});
    }
    std::sort(schedule_.begin(), schedule_.end(),
              [](const ScheduledArrival& x, const ScheduledArrival& y) { return x.t < y.t; });
  }
}

Simulation::RealVehicle* Simulation::real_by_id(int id) {
  for (auto& rv : reals_)
    if (rv.id == id) return &rv;
  return nullptr;
}

Simulation::FakeVehicle* Simulation::fake_by_id(int id) {
  for (auto& fv : fakes_)
    if (fv.inst.id == id) return &fv;
  return nullptr;
}

void Simulation::log_event(double t, int vehicle, const std::string& type,
                           const std::string& detail) {
  trace_.events.push_back({t, vehicle, type, detail});
}

void Simulation::phase_arrivals(double t, long tick) {
  (void)tick;
  // Real arrivals, FIFO per schedule; a blocked lane defers its arrival
  // without holding up other lanes.
  for (size_t k = 0; k < schedule_.size(); ++k) {
    auto& s = schedule_[k];
    if (s.admitted || s.t > t) continue;
    const RouteGeometry& route = geometry_.route(s.route);
    // Entry is deferred until every constraint the newcomer would be subject
    // to holds with margin; invariance is only guaranteed from inside the set.
    bool clear = true;
    double needed = cfg_.params.big_delta + cfg_.params.phi * s.v0 +
                    4.0 * cfg_.params.epsilon1 + 1.0;
    for (const auto& rv : reals_) {
      if (!rv.present) continue;
      const RouteGeometry& pr = geometry_.route(rv.route);
      LaneRelation rel = lane_relation(route, 0.0, pr, rv.truth.x);
      if (rel != LaneRelation::None) {
        double gap = rv.truth.x - 0.0 + rear_gap_offset(route, pr, rel);
        if (gap > 0.0 && gap < needed) {
          clear = false;
          break;
        }
      }
      for (const auto& [mp, pos] : route.merging_points) {
        auto peer_pos = pr.mp_position(mp);
        if (!peer_pos) continue;
        double d_peer = *peer_pos - rv.truth.x;
        if (d_peer <= 0.0) continue;
        if (pos - d_peer < needed) {
          clear = false;
          break;
        }
      }
      if (!clear) break;
    }
    if (!clear) continue;

    int id = int(k) + 1;
    RealVehicle rv;
    rv.id = id;
    rv.route = s.route;
    rv.truth = {0.0, s.v0, 0.0, t};
    rv.v_ref = s.v_ref;
    rv.present = true;
    reals_.push_back(rv);
    table_.admit(id, s.route, t, size_t(std::max(cfg_.trust.eta, 64)));
    table_.by_id(id).is_fake = false;
    VehicleInfo info;
    info.id = id;
    info.is_fake = false;
    info.route = s.route;
    info.t_entry = t;
    trace_.vehicles[id] = info;
    s.admitted = true;
    log_event(t, id, "enter", "route=" + s.route);
  }

  // Sybil identity injection.
  if (sybil_spawned_.size() != cfg_.attacks.size())
    sybil_spawned_.assign(cfg_.attacks.size(), 0);
  for (size_t k = 0; k < cfg_.attacks.size(); ++k) {
    const AttackSpec& spec = cfg_.attacks[k];
    if (spec.kind != "sybil" || sybil_spawned_[k] || t < spec.start || t >= spec.stop)
      continue;
    sybil_spawned_[k] = 1;
    auto instances =
        spawn_sybil(spec, t, next_fake_id_, cfg_.mitigation.max_sybil, cfg_.params.u_min);
    next_fake_id_ += int(instances.size());
    for (auto& inst : instances) {
      int fid = inst.id;
      std::string route = inst.route;
      table_.admit(fid, route, t, size_t(std::max(cfg_.trust.eta, 64)));
      table_.by_id(fid).is_fake = true;
      FakeVehicle fv{std::move(inst), true, false};
      fakes_.push_back(std::move(fv));
      VehicleInfo info;
      info.id = fid;
      info.is_fake = true;
      info.route = route;
      info.t_entry = t;
      trace_.vehicles[fid] = info;
      log_event(t, fid, "sybil-spawn", "route=" + route);
    }
  }
}

void Simulation::phase_reports(double t, long tick) {
  // Exits observed from the previous step.
  for (auto& rv : reals_) {
    if (!rv.present || rv.exited) continue;
    if (rv.truth.x >= geometry_.route(rv.route).length) {
      rv.exited = true;
      rv.present = false;
      int idx = table_.index_of(rv.id);
      if (idx) table_.release(idx);
      trace_.vehicles[rv.id].t_exit = t;
      monitor_.forget(rv.id);
      last_sets_.erase(rv.id);
      log_event(t, rv.id, "exit", "");
    }
  }

  // Reports from real vehicles, tampered on the V2I uplink when attacked.
  for (auto& rv : reals_) {
    if (!rv.present) continue;
    StateEstimate report = measure(rv.truth, noise_, uint64_t(rv.id), uint64_t(tick),
                                   EstimateSource::CoordinatorPacket, t);
    for (const AttackSpec& spec : cfg_.attacks) {
      if (spec.kind != "bias-injection" || t < spec.start || t >= spec.stop) continue;
      if (spec.direction == "from-rsu") continue;
      if (!spec.targets.empty() &&
          std::find(spec.targets.begin(), spec.targets.end(), rv.id) == spec.targets.end())
        continue;
      report = bias_inject(report, rv.truth.x, rv.truth.v, spec.bias,
                           cfg_.params.epsilon1, spec.stealthy)
                   .estimate;
    }
    QueueEntry& entry = table_.by_id(rv.id);
    entry.report = report;
    entry.last_report_time = t;
    entry.report_history.push_back({t, report.x_hat, report.v_hat});
    if (entry.report_history.size() > 128)
      entry.report_history.erase(entry.report_history.begin());
  }

  // Fabricated reports from fakes; silence or virtual exit removes them.
  for (auto& fv : fakes_) {
    if (!fv.present) continue;
    QueueEntry& entry = table_.by_id(fv.inst.id);
    if (t <= fv.inst.report_until) {
      auto [x, v] = fv.inst.trajectory.report(t);
      entry.report = {x, v, EstimateSource::CoordinatorPacket, t};
      entry.last_report_time = t;
      entry.report_history.push_back({t, x, v});
      if (entry.report_history.size() > 128)
        entry.report_history.erase(entry.report_history.begin());
    }
    bool silent = t - entry.last_report_time > 2.0;
    bool virtual_exit = entry.report.x_hat >= geometry_.route(fv.inst.route).length;
    if (silent || virtual_exit) {
      table_.release(table_.index_of(fv.inst.id));
      fv.present = false;
      fv.released = true;
      trace_.vehicles[fv.inst.id].t_exit = t;
      monitor_.forget(fv.inst.id);
      last_sets_.erase(fv.inst.id);
      pending_.erase(std::remove_if(pending_.begin(), pending_.end(),
                                    [&](const PendingOvertake& p) {
                                      return p.fake == fv.inst.id ||
                                             p.follower == fv.inst.id;
                                    }),
                     pending_.end());
      log_event(t, fv.inst.id, "release", silent ? "silence" : "virtual-exit");
    }
  }
}

void Simulation::phase_coordinator(double t, long tick) {
  (void)tick;
  // Previous-tick trust snapshot keeps the peer products order-independent.
  std::map<int, double> prev_tau;
  for (const auto& e : table_.entries()) prev_tau[e.id] = e.trust.tau;

  CheckParams cp;
  cp.u_min = cfg_.params.u_min;
  cp.u_max = cfg_.params.u_max;
  cp.v_min = cfg_.params.v_min;
  cp.v_max = cfg_.params.v_max;
  cp.phi = cfg_.params.phi;
  cp.big_delta = cfg_.params.big_delta;
  cp.eps1 = cfg_.params.epsilon1;
  cp.dynamics_window = cfg_.trust.dynamics_window;

  EvidenceMagnitudes mags{cfg_.trust.r, cfg_.trust.p};

  for (int idx = 1; idx <= table_.size(); ++idx) {
    QueueEntry& entry = table_.at(idx);
    CheckContext ctx;
    ctx.dt = cfg_.sim.dt;
    ctx.history = entry.report_history;
    auto sets_it = last_sets_.find(entry.id);
    if (sets_it != last_sets_.end()) {
      const RouteGeometry& self_route = geometry_.route(entry.route);
      for (int peer_id : sets_it->second.rear) {
        if (!table_.contains(peer_id)) continue;
        const QueueEntry& peer = table_.by_id(peer_id);
        const RouteGeometry& pr = geometry_.route(peer.route);
        LaneRelation rel =
            lane_relation(self_route, entry.report.x_hat, pr, peer.report.x_hat);
        if (rel == LaneRelation::None) continue;
        double gap = peer.report.x_hat - entry.report.x_hat +
                     rear_gap_offset(self_route, pr, rel);
        ctx.rear_peers.push_back({peer_id, gap, entry.report.v_hat});
      }
      for (const auto& [peer_id, mp] : sets_it->second.merging) {
        if (!table_.contains(peer_id)) continue;
        const QueueEntry& peer = table_.by_id(peer_id);
        auto self_pos = self_route.mp_position(mp);
        auto peer_pos = geometry_.route(peer.route).mp_position(mp);
        if (!self_pos || !peer_pos) continue;
        double gap = peer.report.x_hat - entry.report.x_hat + (*self_pos - *peer_pos);
        ctx.merge_peers.push_back({peer_id, gap, entry.report.v_hat});
      }
    }
    EvidenceReport report = run_checks(ctx, cp);
    bool failed = false;
    for (const auto& c : report.checks) failed |= c.outcome == CheckOutcome::Fail;
    if (failed) {
      auto& info = trace_.vehicles[entry.id];
      (void)info;
      log_event(t, entry.id, "check-fail", "");
    }
    entry.trust = trust_update(entry.trust, report, prev_tau, mags, cfg_.trust.gamma);
  }

  if (cfg_.mitigation.enabled) run_mitigation(t);

  // Trust-based search and packet assembly for every entry.
  SearchOptions opts;
  opts.delta = cfg_.trust.delta;
  opts.trust_aware = cfg_.toggles.trust_aware;
  if (cfg_.mitigation.enabled)
    for (int id : monitor_.detected())
      if (table_.contains(id)) opts.excluded.insert(id);

  packets_.clear();
  for (int idx = 1; idx <= table_.size(); ++idx) {
    const QueueEntry& entry = table_.at(idx);
    CooperationSets sets = trust_based_search(table_, idx, geometry_, opts);
    last_sets_[entry.id] = sets;
    if (entry.is_fake) continue;
    InfoPacket packet = assemble_packet(table_, idx, geometry_, sets);
    // Tampering on the V2I downlink.
    for (const AttackSpec& spec : cfg_.attacks) {
      if (spec.kind != "bias-injection" || t < spec.start || t >= spec.stop) continue;
      if (spec.direction == "to-rsu") continue;
      if (!spec.targets.empty() &&
          std::find(spec.targets.begin(), spec.targets.end(), entry.id) ==
              spec.targets.end())
        continue;
      for (auto& peer : packet.peers) {
        RealVehicle* peer_rv = real_by_id(peer.id);
        if (!peer_rv || !peer_rv->present) continue;
        peer.estimate = bias_inject(peer.estimate, peer_rv->truth.x, peer_rv->truth.v,
                                    spec.bias, cfg_.params.epsilon1, spec.stealthy)
                            .estimate;
      }
    }
    packets_[entry.id] = std::move(packet);
  }
}

void Simulation::run_mitigation(double t) {
  if (cfg_.mitigation.force_fp_vehicle && !force_fp_done_ &&
      t >= cfg_.mitigation.force_fp_time &&
      table_.contains(*cfg_.mitigation.force_fp_vehicle)) {
    monitor_.force_detect(*cfg_.mitigation.force_fp_vehicle);
    force_fp_done_ = true;
    log_event(t, *cfg_.mitigation.force_fp_vehicle, "detection", "forced");
  }

  std::map<int, double> taus;
  for (const auto& e : table_.entries()) taus[e.id] = e.trust.tau;
  std::vector<int> fresh = monitor_.update(taus, t);
  for (int id : fresh)
    log_event(t, id, "detection",
              table_.contains(id) && table_.by_id(id).is_fake ? "fake" : "real");

  bool dirty = !fresh.empty();

  // Overtake completion: separation confirmed in reported states.
  for (auto it = pending_.begin(); it != pending_.end();) {
    if (!table_.contains(it->follower) || !table_.contains(it->fake)) {
      it = pending_.erase(it);
      continue;
    }
    const QueueEntry& follower = table_.by_id(it->follower);
    const QueueEntry& fake = table_.by_id(it->fake);
    if (overtake_done(follower.report, fake.report, cfg_.params.phi,
                      cfg_.params.big_delta)) {
      table_.move_after(it->fake, it->follower);
      completed_overtakes_.insert({it->fake, it->follower});
      log_event(t, it->follower, "overtake-swap", "passed=" + std::to_string(it->fake));
      dirty = true;
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }

  if (!dirty) return;

  std::set<int> detected_present;
  for (int id : monitor_.detected())
    if (table_.contains(id)) detected_present.insert(id);
  if (detected_present.empty()) return;

  // Build the rescheduling instance from the live queue.
  RescheduleInstance inst;
  double l1 = geometry_.reschedule_zone();
  for (int idx = 1; idx <= table_.size(); ++idx) {
    const QueueEntry& e = table_.at(idx);
    RescheduleInstance::Entry re;
    re.id = e.id;
    re.fake = detected_present.count(e.id) > 0;
    re.in_zone = in_rescheduling_zone(geometry_.route(e.route), e.report.x_hat, l1);
    auto sets_it = last_sets_.find(e.id);
    if (sets_it != last_sets_.end()) {
      re.rear_peers = sets_it->second.rear;
      for (const auto& [peer, mp] : sets_it->second.merging) re.merge_peers.push_back(peer);
    }
    // Nearest vehicle ahead on the lane, by reported positions.
    const RouteGeometry& sr = geometry_.route(e.route);
    double best_gap = 1e18;
    for (int jdx = 1; jdx <= table_.size(); ++jdx) {
      if (jdx == idx) continue;
      const QueueEntry& other = table_.at(jdx);
      const RouteGeometry& orr = geometry_.route(other.route);
      LaneRelation rel = lane_relation(sr, e.report.x_hat, orr, other.report.x_hat);
      if (rel == LaneRelation::None) continue;
      double gap = other.report.x_hat - e.report.x_hat + rear_gap_offset(sr, orr, rel);
      if (gap > 0.0 && gap < best_gap) {
        best_gap = gap;
        re.physical_leader = other.id;
      }
    }
    inst.entries.push_back(std::move(re));
  }

  ReschedulePlan plan = reschedule(inst);
  if (plan.changed) {
    table_.apply_order(plan.order);
    log_event(t, 0, "reschedule", order_string(plan.order));
  }
  for (const auto& p : plan.pending) {
    if (completed_overtakes_.count({p.fake, p.follower})) continue;
    bool exists = false;
    for (const auto& q : pending_)
      if (q.fake == p.fake && q.follower == p.follower) exists = true;
    if (!exists) {
      pending_.push_back(p);
      log_event(t, p.follower, "overtake-pending", "passing=" + std::to_string(p.fake));
    }
  }
}

std::map<PeerKey, PeerSnapshot> Simulation::collect_peers(const RealVehicle& rv, long tick,
                                                          double t,
                                                          const InfoPacket& packet) {
  std::map<PeerKey, PeerSnapshot> peers;
  std::map<int, double> packet_tau;
  for (const auto& pp : packet.peers) {
    PeerSnapshot snap;
    snap.x_hat = pp.estimate.x_hat;
    snap.v_hat = pp.estimate.v_hat;
    snap.tau = pp.tau;
    snap.gap_offset = pp.gap_offset;
    snap.kind = pp.role;
    snap.mp = pp.mp;
    peers[make_peer_key(pp.id, pp.role, pp.mp)] = snap;
    packet_tau[pp.id] = pp.tau;
  }

  // Local perception: an independent channel that can only tighten a row
  // (smaller reported barrier wins) or add one the packet omitted.
  const RouteGeometry& self_route = geometry_.route(rv.route);
  std::vector<PerceptionTarget> targets;
  for (const auto& other : reals_) {
    if (!other.present || other.id == rv.id) continue;
    targets.push_back({other.id, other.truth, &geometry_.route(other.route)});
  }
  StateEstimate self_est = measure(rv.truth, noise_, uint64_t(rv.id), uint64_t(tick),
                                   EstimateSource::SelfMeasurement, t);
  auto detections = perceive(rv.id, rv.truth, self_route, targets, perception_, noise_,
                             uint64_t(tick), t);
  for (const auto& det : detections) {
    const RealVehicle* other = nullptr;
    for (const auto& o : reals_)
      if (o.id == det.id) other = &o;
    if (!other) continue;
    const RouteGeometry& pr = geometry_.route(other->route);

    LaneRelation rel = lane_relation(self_route, self_est.x_hat, pr, det.estimate.x_hat);
    if (rel != LaneRelation::None) {
      double offset = rear_gap_offset(self_route, pr, rel);
      double gap = det.estimate.x_hat - self_est.x_hat + offset;
      if (gap > 0.0) {
        PeerKey key = make_peer_key(det.id, ConstraintKind::RearEnd, std::nullopt);
        auto it = peers.find(key);
        if (it == peers.end()) {
          PeerSnapshot snap;
          snap.x_hat = det.estimate.x_hat;
          snap.v_hat = det.estimate.v_hat;
          auto tau_it = packet_tau.find(det.id);
          snap.tau = tau_it == packet_tau.end() ? 0.0 : tau_it->second;
          snap.gap_offset = offset;
          snap.kind = ConstraintKind::RearEnd;
          peers[key] = snap;
        } else if (det.estimate.x_hat + offset < it->second.x_hat + it->second.gap_offset) {
          it->second.x_hat = det.estimate.x_hat;
          it->second.v_hat = det.estimate.v_hat;
          it->second.gap_offset = offset;
        }
      }
    }
    for (const auto& [mp, pos] : self_route.merging_points) {
      double d_self = pos - self_est.x_hat;
      if (d_self <= 0.0 || d_self > perception_.radius) continue;
      auto peer_pos = pr.mp_position(mp);
      if (!peer_pos) continue;
      double d_peer = *peer_pos - det.estimate.x_hat;
      if (d_peer <= 0.0 || d_peer >= d_self) continue;  // only plausible leaders
      double offset = pos - *peer_pos;
      PeerKey key = make_peer_key(det.id, ConstraintKind::Merging, mp);
      auto it = peers.find(key);
      if (it == peers.end()) {
        PeerSnapshot snap;
        snap.x_hat = det.estimate.x_hat;
        snap.v_hat = det.estimate.v_hat;
        auto tau_it = packet_tau.find(det.id);
        snap.tau = tau_it == packet_tau.end() ? 0.0 : tau_it->second;
        snap.gap_offset = offset;
        snap.kind = ConstraintKind::Merging;
        snap.mp = mp;
        peers[key] = snap;
      } else if (det.estimate.x_hat + offset < it->second.x_hat + it->second.gap_offset) {
        it->second.x_hat = det.estimate.x_hat;
        it->second.v_hat = det.estimate.v_hat;
        it->second.gap_offset = offset;
      }
    }
  }
  return peers;
}

void Simulation::phase_control(double t, long tick, std::vector<TraceRow>& rows,
                               TickObs& obs) {
  static const InfoPacket kEmptyPacket;
  for (auto& rv : reals_) {
    if (!rv.present) continue;
    auto& info = trace_.vehicles[rv.id];
    info.ticks_in_cz += 1;

    StateEstimate self_est = measure(rv.truth, noise_, uint64_t(rv.id), uint64_t(tick),
                                     EstimateSource::SelfMeasurement, t);
    auto packet_it = packets_.find(rv.id);
    const InfoPacket& packet =
        packet_it == packets_.end() ? kEmptyPacket : packet_it->second;
    auto peers = collect_peers(rv, tick, t, packet);

    auto trigger = should_trigger(rv.anchor, self_est.x_hat, self_est.v_hat, peers,
                                  cfg_.event, cfg_.params.epsilon1);
    if (trigger) {
      info.triggers += 1;
      rv.anchor.valid = true;
      rv.anchor.t = t;
      rv.anchor.x_hat = self_est.x_hat;
      rv.anchor.v_hat = self_est.v_hat;
      rv.anchor.peers = peers;

      std::vector<PeerView> views;
      for (const auto& [key, snap] : peers) {
        PeerView pv;
        pv.id = std::get<0>(key);
        pv.x_hat = snap.x_hat;
        pv.v_hat = snap.v_hat;
        pv.tau = snap.tau;
        pv.kind = snap.kind;
        pv.mp = snap.mp;
        pv.gap_offset = snap.gap_offset;
        views.push_back(pv);
      }
      Reference ref =
          reference(t - rv.truth.t_entry, cfg_.reference, cfg_.params, rv.v_ref);
      std::vector<CbfRow> cbf_rows;
      BuildOptions bopts;
      bopts.trust_aware = cfg_.toggles.trust_aware;
      auto nominal = build_constraints(self_est.x_hat, self_est.v_hat, views, ref,
                                       cfg_.params, bopts, &cbf_rows);
      QpResult solved = solve_qp(nominal, ref.u_ref, cfg_.params.lambda);
      info.qp_solves += 1;

      if (cfg_.toggles.robust) {
        double u_sign = solved.status == QpStatus::Optimal ? solved.u : cfg_.params.u_min;
        double dt = cfg_.sim.dt;
        double u_span = std::max(cfg_.params.u_max, -cfg_.params.u_min);
        RowBoxes boxes;
        // The trigger is monitored at tick resolution, so the boxes carry one
        // tick of reachable drift on top of the trigger thresholds.
        boxes.self_pos = (cfg_.event.s_x[0] - 2.0 * cfg_.params.epsilon1) +
                         cfg_.params.v_max * dt + 0.5 * u_span * dt * dt;
        boxes.self_vel = (cfg_.event.s_x[1] - 2.0 * cfg_.params.epsilon1) + u_span * dt;
        boxes.peer_pos = boxes.self_pos;
        boxes.peer_vel = boxes.self_vel;
        boxes.eps1 = cfg_.params.epsilon1;
        std::vector<LinearControlConstraint> event_rows;
        bool outside = false;
        for (const auto& row : cbf_rows) {
          RowBoxes rb = boxes;
          rb.tau_lo = row.tau - cfg_.event.s_tau;
          rb.tau_hi = row.tau + cfg_.event.s_tau;
          RobustMinima minima = robust_event_minima(row, rb, u_sign);
          outside |= !minima.anchor_in_safe_set;
          event_rows.push_back(event_row(row, minima));
        }
        for (const auto& r : nominal)
          if (r.kind == ConstraintKind::UMin || r.kind == ConstraintKind::UMax ||
              r.kind == ConstraintKind::Clf)
            event_rows.push_back(r);
        if (outside) log_event(t, rv.id, "anchor-outside", "");
        solved = solve_qp(event_rows, ref.u_ref, cfg_.params.lambda);
        info.qp_solves += 1;
      }

      if (solved.status == QpStatus::Optimal) {
        rv.u_held = solved.u;
        rv.fallback = false;
        rv.anchor.e_slack = solved.e;
      } else {
        rv.u_held = cfg_.params.u_min;
        rv.fallback = true;
        trace_.infeasible_events += 1;
        log_event(t, rv.id, "infeasible", trigger.value_or(""));
      }
      rv.anchor.u_held = rv.u_held;
      char detail[128];
      std::snprintf(detail, sizeof detail, "reason=%s;rows=%zu;u=%.6g;e=%.6g;status=%s",
                    trigger->c_str(), cbf_rows.size(), rv.u_held, rv.anchor.e_slack,
                    rv.fallback ? "infeasible" : "optimal");
      log_event(t, rv.id, "event", detail);
    }

    double applied = std::clamp(rv.u_held, cfg_.params.u_min, cfg_.params.u_max);
    if (rv.truth.v <= 0.0 && applied < 0.0) applied = 0.0;  // braking at standstill
    rv.truth.u_applied = applied;

    TraceRow row;
    row.t = t;
    row.vehicle = rv.id;
    row.index = table_.index_of(rv.id);
    row.is_fake = false;
    row.x = rv.truth.x;
    row.v = rv.truth.v;
    row.u = applied;
    row.x_hat = self_est.x_hat;
    row.v_hat = self_est.v_hat;
    row.tau = table_.contains(rv.id) ? table_.by_id(rv.id).trust.tau : 0.0;
    row.triggered = trigger.has_value();
    row.infeasible = rv.fallback;
    rows.push_back(row);

    VehicleObs vo;
    vo.id = rv.id;
    vo.truth = &rv.truth;
    vo.x_hat = self_est.x_hat;
    vo.v_hat = self_est.v_hat;
    vo.peers = &rv.anchor.peers;  // replaced below with the live map
    vo.triggered = trigger.has_value();
    vo.fallback = rv.fallback;
    vo.u_applied = applied;
    vo.t_entry = rv.truth.t_entry;
    vo.route = &rv.route;
    obs.vehicles.push_back(vo);
    obs_peer_maps_.push_back(std::move(peers));
    obs.vehicles.back().peers = &obs_peer_maps_.back();
  }

  // Fake rows come straight from their reports.
  for (const auto& fv : fakes_) {
    if (!fv.present) continue;
    const QueueEntry& entry = table_.by_id(fv.inst.id);
    TraceRow row;
    row.t = t;
    row.vehicle = fv.inst.id;
    row.index = table_.index_of(fv.inst.id);
    row.is_fake = true;
    row.x = entry.report.x_hat;
    row.v = entry.report.v_hat;
    row.u = std::numeric_limits<double>::quiet_NaN();
    row.x_hat = entry.report.x_hat;
    row.v_hat = entry.report.v_hat;
    row.tau = entry.trust.tau;
    rows.push_back(row);
  }
}

void Simulation::phase_plant(double t) {
  (void)t;
  for (auto& rv : reals_) {
    if (!rv.present) continue;
    double u = rv.truth.u_applied;
    rv.truth = plant_step(rv.truth, u, cfg_.sim.dt);
    auto& info = trace_.vehicles[rv.id];
    double sample = 0.5 * u * u;
    if (rv.has_energy_sample)
      info.plant_energy += 0.5 * (rv.prev_energy_sample + sample) * cfg_.sim.dt;
    rv.prev_energy_sample = sample;
    rv.has_energy_sample = true;
  }
}

void Simulation::record_truth_barriers(double t, std::vector<TraceRow>& rows) {
  std::map<int, TraceRow*> by_id;
  for (auto& r : rows)
    if (!r.is_fake) by_id[r.vehicle] = &r;

  for (const auto& rv : reals_) {
    if (!rv.present) continue;
    const RouteGeometry& sr = geometry_.route(rv.route);
    double b_rear = std::numeric_limits<double>::quiet_NaN();
    int rear_peer = 0;
    double b_merge = std::numeric_limits<double>::quiet_NaN();
    int merge_peer = 0;

    for (const auto& other : reals_) {
      if (!other.present || other.id == rv.id) continue;
      const RouteGeometry& orr = geometry_.route(other.route);
      LaneRelation rel = lane_relation(sr, rv.truth.x, orr, other.truth.x);
      if (rel != LaneRelation::None) {
        double gap = other.truth.x - rv.truth.x + rear_gap_offset(sr, orr, rel);
        if (gap > 0.0) {
          double b = gap - cfg_.params.phi * rv.truth.v - cfg_.params.big_delta;
          if (std::isnan(b_rear) || b < b_rear) {
            b_rear = b;
            rear_peer = other.id;
          }
        }
        // Ground-truth collision: positions crossed on a shared lane.
        if (table_.contains(rv.id) && table_.contains(other.id)) {
          int self_idx = table_.index_of(rv.id);
          int other_idx = table_.index_of(other.id);
          double gap_raw = other.truth.x - rv.truth.x + rear_gap_offset(sr, orr, rel);
          if (other_idx < self_idx && gap_raw <= 0.0 && gap_raw > -50.0) {
            bool fresh = colliding_.insert({std::min(rv.id, other.id),
                                            std::max(rv.id, other.id)})
                             .second;
            if (fresh) log_event(t, rv.id, "collision", "with=" + std::to_string(other.id));
          }
        }
      }

      // Merging separation against FIFO-preceding conflicting vehicles.
      int self_idx = table_.index_of(rv.id);
      int other_idx = table_.index_of(other.id);
      if (other_idx == 0 || self_idx == 0 || other_idx >= self_idx) continue;
      for (const auto& [mp, pos] : sr.merging_points) {
        double d_self = pos - rv.truth.x;
        if (d_self <= 0.0) continue;
        auto peer_pos = orr.mp_position(mp);
        if (!peer_pos) continue;
        double d_peer = *peer_pos - other.truth.x;
        if (d_peer <= 0.0) continue;
        double b = (d_self - d_peer) - cfg_.params.phi * rv.truth.v - cfg_.params.big_delta;
        if (std::isnan(b_merge) || b < b_merge) {
          b_merge = b;
          merge_peer = other.id;
        }
      }
    }

    // Violations at ground truth.
    if (!std::isnan(b_rear) && b_rear < -1e-9)
      trace_.violations.push_back({t, rv.id, ConstraintKind::RearEnd, rear_peer, b_rear});
    if (!std::isnan(b_merge) && b_merge < -1e-9)
      trace_.violations.push_back({t, rv.id, ConstraintKind::Merging, merge_peer, b_merge});
    if (rv.truth.v > cfg_.params.v_max + 1e-9)
      trace_.violations.push_back(
          {t, rv.id, ConstraintKind::VMax, 0, cfg_.params.v_max - rv.truth.v});
    if (rv.truth.v < cfg_.params.v_min - 1e-9)
      trace_.violations.push_back(
          {t, rv.id, ConstraintKind::VMin, 0, rv.truth.v - cfg_.params.v_min});

    auto it = by_id.find(rv.id);
    if (it != by_id.end()) {
      it->second->b_rear = b_rear;
      it->second->b_merge = b_merge;
    }
  }
}

Trace Simulation::run(const TickObserver& observer) {
  long max_ticks = long(std::ceil(cfg_.sim.t_max / cfg_.sim.dt));
  for (long tick = 0; tick <= max_ticks; ++tick) {
    double t = double(tick) * cfg_.sim.dt;

    phase_arrivals(t, tick);
    phase_reports(t, tick);
    phase_coordinator(t, tick);

    std::vector<TraceRow> rows;
    TickObs obs;
    obs.t = t;
    obs.tick = tick;
    obs_peer_maps_.clear();
    phase_control(t, tick, rows, obs);
    record_truth_barriers(t, rows);
    if (observer) observer(obs);
    for (auto& r : rows) trace_.rows.push_back(std::move(r));

    phase_plant(t);

    bool all_admitted = true;
    for (const auto& s : schedule_) all_admitted &= s.admitted;
    bool all_exited = true;
    for (const auto& rv : reals_) all_exited &= rv.exited;
    if (all_admitted && all_exited && !reals_.empty()) break;
  }

  for (const auto& s : schedule_)
    if (!s.admitted) trace_.blocked_arrivals += 1;
  return std::move(trace_);
}

}  // namespace cavsim
