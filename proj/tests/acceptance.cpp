// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion ...]; no arguments runs all twelve.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <vector>

#include "cavsim/controller.hpp"
#include "cavsim/metrics.hpp"
#include "cavsim/mitigation.hpp"
#include "cavsim/rng.hpp"
#include "cavsim/scenarios.hpp"
#include "cavsim/sim.hpp"
#include "oracles.hpp"

using namespace cavsim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ScenarioConfig randomized_no_attack(uint64_t seed) {
  const double eps_levels[3] = {0.0, 0.05, 0.1};
  std::string preset = seed % 2 ? "fig1-intersection" : "single-merge";
  int vehicles = 2 + int(seed % 9);  // 2..10
  ScenarioConfig cfg = scenarios::no_attack(preset, vehicles, eps_levels[seed % 3], seed);
  cfg.sim.t_max = 40.0;
  return cfg;
}

// --------------------------------------------------------------------------
// 1. Forward invariance across seeded no-attack scenarios.
bool criterion_forward_invariance(std::ostream& out) {
  auto start = Clock::now();
  long violations = 0;
  for (uint64_t seed = 1; seed <= 200; ++seed) {
    Trace trace = Simulation(randomized_no_attack(seed)).run();
    violations += long(trace.violations.size());
  }
  double elapsed = seconds_since(start);
  out << "violations=" << violations << " runs=200 elapsed=" << elapsed << "s";
  return violations == 0 && elapsed < 60.0;
}

// --------------------------------------------------------------------------
// 2. Robust-vs-nonrobust contrast under a combined sybil + bias attack.
bool criterion_robust_contrast(std::ostream& out) {
  int robust_bad_seeds = 0, nonrobust_quiet_seeds = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    Trace with = Simulation(scenarios::bias_attack(seed, true)).run();
    Trace without = Simulation(scenarios::bias_attack(seed, false)).run();
    if (!with.violations.empty()) ++robust_bad_seeds;
    if (without.violations.empty()) ++nonrobust_quiet_seeds;
  }
  out << "robust_seeds_with_violations=" << robust_bad_seeds
      << " nonrobust_seeds_without=" << nonrobust_quiet_seeds;
  return robust_bad_seeds == 0 && nonrobust_quiet_seeds == 0;
}

// --------------------------------------------------------------------------
// 3. Closed-form event minima against a dense grid (21 points per dimension).
bool criterion_minima_oracle(std::ostream& out) {
  SplitMix64 rng(101);
  ControlParams params;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    PeerView pv;
    pv.id = 2;
    pv.x_hat = rng.uniform(30.0, 150.0);
    pv.v_hat = rng.uniform(0.0, 30.0);
    pv.tau = rng.uniform(0.0, 1.0);
    pv.gap_offset = rng.uniform(-10.0, 10.0);
    pv.kind = trial % 3 == 0 ? ConstraintKind::Merging : ConstraintKind::RearEnd;
    CbfRow row;
    switch (trial % 5) {
      case 0: row = make_vmin_row(rng.uniform(0.0, 30.0), params); break;
      case 1: row = make_vmax_row(rng.uniform(0.0, 30.0), params); break;
      default:
        row = make_rear_row(pv, rng.uniform(0.0, 100.0), rng.uniform(0.0, 30.0), params,
                            trial % 2 == 0);
    }
    RowBoxes boxes;
    boxes.self_pos = rng.uniform(0.0, 2.5);
    boxes.self_vel = rng.uniform(0.0, 0.8);
    boxes.peer_pos = rng.uniform(0.0, 2.5);
    boxes.peer_vel = rng.uniform(0.0, 0.8);
    boxes.eps1 = rng.uniform(0.0, 0.15);
    boxes.tau_lo = row.tau - rng.uniform(0.0, 0.3);
    boxes.tau_hi = row.tau + 0.1;
    double u_sign = rng.unit() < 0.5 ? 1.0 : -1.0;

    RobustMinima fast = robust_event_minima(row, boxes, u_sign);
    RobustMinima grid = oracles::grid_minima(row, boxes, 21);
    worst = std::max(worst, std::abs(fast.b_f_min - grid.b_f_min));
    worst = std::max(worst, std::abs(fast.b_kappa_min - grid.b_kappa_min));
    worst = std::max(worst, std::abs(fast.b_g_min - grid.b_g_min));
  }
  out << "anchors=1000 worst_gap=" << worst;
  return worst <= 1e-6;
}

// --------------------------------------------------------------------------
// 4. QP active-set solutions against grid search; infeasibility must agree.
bool criterion_qp_oracle(std::ostream& out) {
  SplitMix64 rng(303);
  int infeasible = 0, bracketed = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    double u_min = -rng.uniform(2.0, 6.0), u_max = rng.uniform(2.0, 6.0);
    double lambda = rng.uniform(0.5, 20.0), u_ref = rng.uniform(-4.0, 4.0);
    double dv = rng.uniform(-2.0, 2.0);
    std::vector<LinearControlConstraint> rows;
    LinearControlConstraint r;
    r.a_u = 1.0;
    r.sense = Sense::Le;
    r.rhs = u_max;
    r.kind = ConstraintKind::UMax;
    rows.push_back(r);
    r.sense = Sense::Ge;
    r.rhs = u_min;
    r.kind = ConstraintKind::UMin;
    rows.push_back(r);
    int extra = 1 + int(rng.next() % 4);
    for (int k = 0; k < extra; ++k) {
      LinearControlConstraint c;
      c.a_u = rng.uniform(-2.0, 2.0);
      c.rhs = rng.uniform(-6.0, 6.0);
      c.sense = rng.unit() < 0.5 ? Sense::Ge : Sense::Le;
      rows.push_back(c);
    }
    LinearControlConstraint clf;
    clf.a_u = 2.0 * dv;
    clf.a_e = -1.0;
    clf.sense = Sense::Le;
    clf.rhs = -2.0 * dv * dv;
    clf.kind = ConstraintKind::Clf;
    rows.push_back(clf);

    QpResult solved = solve_qp(rows, u_ref, lambda);
    auto grid = oracles::grid_qp(rows, u_ref, lambda, u_min, u_max, -4.0, 40.0, 400);
    if (solved.status == QpStatus::Infeasible) {
      ++infeasible;
      if (grid.feasible) {
        out << "solver claimed infeasible but the grid found a point";
        return false;
      }
      continue;
    }
    for (const auto& row : rows)
      if (!row.satisfied(solved.u, solved.e, 1e-7)) {
        out << "solver returned an infeasible point";
        return false;
      }
    if (!grid.feasible) continue;
    if (solved.objective > grid.objective + 1e-9) {
      out << "grid beat the active-set solution";
      return false;
    }
    double lo = u_min, hi = u_max;
    for (const auto& row : rows) {
      if (row.a_e != 0.0 || row.a_u == 0.0) continue;
      double bound_val = row.rhs / row.a_u;
      bool upper = (row.sense == Sense::Le) == (row.a_u > 0.0);
      if (upper)
        hi = std::min(hi, bound_val);
      else
        lo = std::max(lo, bound_val);
    }
    double cell_u = (u_max - u_min) / 399.0, cell_e = 44.0 / 399.0;
    if (hi - lo < 3.0 * cell_u) continue;
    double du = cell_u;
    double de = cell_e + std::abs(2.0 * dv) * cell_u;
    double bound = (std::abs(solved.u - u_ref) + du) * du +
                   (2.0 * lambda * std::abs(solved.e) + lambda * de) * de + 1e-6;
    if (grid.objective - solved.objective > bound) {
      out << "grid excess " << grid.objective - solved.objective
          << " beyond resolution bound " << bound;
      return false;
    }
    ++bracketed;
  }
  out << "instances=1000 infeasible=" << infeasible << " bracketed=" << bracketed;
  return infeasible > 0 && bracketed > 400;
}

// --------------------------------------------------------------------------
// 5. Event soundness: the held control satisfies the trust-aware rows at
//    every tick where the trigger had not fired.
bool criterion_event_soundness(std::ostream& out) {
  long checked = 0, counterexamples = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    ScenarioConfig cfg = randomized_no_attack(seed + 400);
    ControlParams params = cfg.params;
    bool trust_aware = cfg.toggles.trust_aware;
    Simulation sim(cfg);
    sim.run([&](const TickObs& obs) {
      for (const auto& vo : obs.vehicles) {
        if (vo.triggered || vo.fallback) continue;
        std::vector<PeerView> views;
        for (const auto& [key, snap] : *vo.peers) {
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
        Reference ref{0.0, params.v_max};
        BuildOptions opts;
        opts.trust_aware = trust_aware;
        auto rows = build_constraints(vo.x_hat, vo.v_hat, views, ref, params, opts);
        for (const auto& row : rows) {
          if (row.kind == ConstraintKind::Clf || row.kind == ConstraintKind::UMin ||
              row.kind == ConstraintKind::UMax)
            continue;
          ++checked;
          if (!row.satisfied(vo.u_applied, 0.0, 1e-7)) ++counterexamples;
        }
      }
    });
  }
  out << "rows_checked=" << checked << " counterexamples=" << counterexamples;
  return counterexamples == 0 && checked > 0;
}

// --------------------------------------------------------------------------
// 6. Event economy: strictly fewer QP solves than ticks for every vehicle.
bool criterion_event_economy(std::ostream& out) {
  long worst_margin = std::numeric_limits<long>::max();
  int vehicles = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    ScenarioConfig cfg = scenarios::no_attack(
        seed % 2 ? "fig1-intersection" : "single-merge", 8, 0.1, seed + 900);
    cfg.sim.t_max = 90.0;
    Trace trace = Simulation(cfg).run();
    for (const auto& [id, info] : trace.vehicles) {
      if (info.is_fake) continue;
      ++vehicles;
      worst_margin = std::min(worst_margin, info.ticks_in_cz - info.qp_solves);
      if (info.qp_solves >= info.ticks_in_cz) {
        out << "vehicle " << id << " solved " << info.qp_solves << " QPs in "
            << info.ticks_in_cz << " ticks";
        return false;
      }
    }
  }
  out << "vehicles=" << vehicles << " min_tick_margin=" << worst_margin;
  return vehicles > 0;
}

// --------------------------------------------------------------------------
// 7. Trust dynamics: fabricated streams detected within the window; zero
//    false positives for conforming vehicles.
bool criterion_trust_dynamics(std::ostream& out) {
  int detected_in_window = 0, fp = 0, runs = 100;
  for (uint64_t seed = 1; seed <= uint64_t(runs); ++seed) {
    ScenarioConfig cfg = scenarios::stall_sybil(seed, true);
    cfg.attacks[0].generator.x0 = 30.0 + double(seed % 5) * 8.0;
    cfg.attacks[0].generator.v0 = 5.0 + double(seed % 3);
    cfg.attacks[0].generator.stop_before = cfg.attacks[0].generator.x0 + 8.0;
    cfg.sim.t_max = 60.0;
    Trace trace = Simulation(cfg).run();
    double first_fail = -1.0, detection = -1.0;
    for (const auto& e : trace.events) {
      if (e.type == "check-fail" && e.vehicle >= 10000 && first_fail < 0.0)
        first_fail = e.t;
      if (e.type == "detection" && e.vehicle >= 10000 && detection < 0.0) detection = e.t;
      if (e.type == "detection" && e.vehicle < 10000) ++fp;
    }
    if (first_fail >= 0.0 && detection >= 0.0 &&
        detection - first_fail <= double(cfg.trust.eta) * cfg.sim.dt + 1e-9)
      ++detected_in_window;
  }
  out << "detected_within_eta=" << detected_in_window << "/" << runs
      << " false_positives=" << fp;
  return detected_in_window >= 95 && fp == 0;
}

// --------------------------------------------------------------------------
// 8. Mitigation restores travel times against a lane-blocking sybil attack.
bool criterion_mitigation_effect(std::ostream& out) {
  double base = 0.0, with = 0.0, without = 0.0;
  int holdups_without = 0, holdups_with = 0;
  const int repeats = 5;
  for (uint64_t seed = 1; seed <= repeats; ++seed) {
    Summary b = summarize(Simulation(scenarios::stall_sybil(seed, true, 0)).run(), {});
    Summary w = summarize(Simulation(scenarios::stall_sybil(seed, true)).run(), {});
    Summary wo = summarize(Simulation(scenarios::stall_sybil(seed, false)).run(), {});
    base += b.mean_travel_time;
    with += w.mean_travel_time;
    without += wo.mean_travel_time;
    holdups_with += w.holdup + w.blocked_arrivals;
    holdups_without += wo.holdup + wo.blocked_arrivals;
  }
  base /= repeats;
  with /= repeats;
  without /= repeats;
  out << "baseline=" << base << " mitigated=" << with << " unmitigated=" << without
      << " holdup_unmitigated=" << holdups_without;
  bool mitigated_ok = holdups_with == 0 && with <= 1.15 * base;
  bool attack_bites = without >= 1.5 * base || holdups_without > 0;
  return mitigated_ok && attack_bites;
}

// --------------------------------------------------------------------------
// 9. Trust-aware class-K beats the plain slope on travel time.
bool criterion_trust_aware_speedup(std::ostream& out) {
  bool ok = true;
  for (double alpha : {0.9, 0.75, 0.6}) {
    double trust_mean = 0.0, plain_mean = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      Summary ts =
          summarize(Simulation(scenarios::trust_comparison(seed, alpha, true)).run(), {});
      Summary ps =
          summarize(Simulation(scenarios::trust_comparison(seed, alpha, false)).run(), {});
      trust_mean += ts.mean_travel_time;
      plain_mean += ps.mean_travel_time;
    }
    trust_mean /= 5.0;
    plain_mean /= 5.0;
    out << "alpha=" << alpha << " trust=" << trust_mean << " plain=" << plain_mean << " ";
    ok &= trust_mean < plain_mean;
  }
  return ok;
}

// --------------------------------------------------------------------------
// 10. The two-scenario rescheduler matches the exhaustive search objective.
bool criterion_ilp_oracle(std::ostream& out) {
  SplitMix64 rng(777);
  for (int trial = 0; trial < 500; ++trial) {
    int n = 3 + int(rng.next() % 6);
    RescheduleInstance inst;
    std::set<int> fakes;
    for (int id = 1; id <= n; ++id) {
      RescheduleInstance::Entry e;
      e.id = id;
      e.fake = rng.unit() < 0.3;
      inst.entries.push_back(e);
    }
    bool any_fake = false;
    for (const auto& e : inst.entries) any_fake |= e.fake;
    if (!any_fake) inst.entries[size_t(rng.next() % uint64_t(n))].fake = true;
    for (const auto& e : inst.entries)
      if (e.fake) fakes.insert(e.id);
    for (int id = 2; id <= n; ++id) {
      auto& e = inst.entries[size_t(id - 1)];
      for (int peer = 1; peer < id; ++peer) {
        if (rng.unit() < 0.25) e.rear_peers.push_back(peer);
        if (rng.unit() < 0.2) e.merge_peers.push_back(peer);
      }
    }
    for (int id : fakes)
      if (id < n && !inst.entries[size_t(id)].fake && rng.unit() < 0.5) {
        inst.entries[size_t(id)].physical_leader = id;
        inst.entries[size_t(id)].rear_peers.push_back(id);
      }

    ReschedulePlan plan = reschedule(inst);
    IlpSolution exact = brute_force_requeue(inst);
    if (std::abs(plan.objective_on_target(fakes) - exact.objective) > 1e-9) {
      out << "objective mismatch on trial " << trial << ": plan="
          << plan.objective_on_target(fakes) << " exact=" << exact.objective;
      return false;
    }
  }
  out << "instances=500 objective_matches=500";
  return true;
}

// --------------------------------------------------------------------------
// 11. False-positive safety under degraded perception.
bool criterion_fp_safety(std::ostream& out) {
  auto safe_runs = [&](double p_detect) {
    int safe = 0;
    for (uint64_t seed = 1; seed <= 100; ++seed) {
      ScenarioConfig cfg = scenarios::forced_fp(seed, p_detect);
      Summary s = summarize(Simulation(cfg).run(), {});
      if (s.collisions == 0) ++safe;
    }
    return safe;
  };
  int at_full = safe_runs(1.0);
  int at_85 = safe_runs(0.85);
  int at_90 = safe_runs(0.90);
  int at_95 = safe_runs(0.95);
  out << "safe%=[" << at_85 << "," << at_90 << "," << at_95 << "," << at_full
      << "] for p=[0.85,0.90,0.95,1.0]";
  return at_full == 100 && at_85 <= at_90 && at_90 <= at_95 && at_95 <= at_full;
}

// --------------------------------------------------------------------------
// 12. Bitwise determinism of trace bodies under identical seeds.
bool criterion_determinism(std::ostream& out) {
  auto run_twice = [](ScenarioConfig cfg) {
    Trace a = Simulation(cfg).run();
    Trace b = Simulation(cfg).run();
    return a.rows_csv() == b.rows_csv() && a.events_csv() == b.events_csv();
  };
  bool ok = run_twice(scenarios::stall_sybil(3, true)) &&
            run_twice(scenarios::bias_attack(2, true)) &&
            run_twice(randomized_no_attack(17));
  out << (ok ? "byte-identical traces" : "traces diverged");
  return ok;
}

struct Criterion {
  int id;
  const char* label;
  std::function<bool(std::ostream&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "forward-invariance", criterion_forward_invariance},
      {2, "robust-vs-nonrobust", criterion_robust_contrast},
      {3, "event-minima-oracle", criterion_minima_oracle},
      {4, "qp-oracle", criterion_qp_oracle},
      {5, "event-soundness", criterion_event_soundness},
      {6, "event-economy", criterion_event_economy},
      {7, "trust-dynamics", criterion_trust_dynamics},
      {8, "mitigation-effect", criterion_mitigation_effect},
      {9, "trust-aware-speedup", criterion_trust_aware_speedup},
      {10, "requeue-oracle", criterion_ilp_oracle},
      {11, "false-positive-safety", criterion_fp_safety},
      {12, "determinism", criterion_determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int k = 1; k < argc; ++k) wanted.insert(std::atoi(argv[k]));

  bool all_ok = true;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    auto start = Clock::now();
    std::ostringstream detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail << "exception: " << e.what();
    }
    all_ok &= ok;
    std::cout << "criterion " << c.id << " (" << c.label << "): "
              << (ok ? "PASS" : "FAIL") << " [" << detail.str() << "] "
              << seconds_since(start) << "s\n";
  }
  return all_ok ? 0 : 1;
}
