#include "cavsim/trust.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cavsim {

namespace {

// Reachable interval of positions after elapsed time from a reported sample,
// widened by the noise budget on both reports plus a speed-noise drift term.
// A vehicle legitimately riding a control or speed bound sits exactly on the
// interval boundary, so every tolerance carries a numerical guard band.
constexpr double kGuard = 1e-6;

struct Interval {
  double lo, hi;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

Interval reachable_position(const ReportSample& from, double elapsed,
                            const CheckParams& p) {
  double tol = 2.0 * p.eps1 + p.eps1 * elapsed + kGuard;
  double lo = from.x + from.v * elapsed + 0.5 * p.u_min * elapsed * elapsed - tol;
  double hi = from.x + from.v * elapsed + 0.5 * p.u_max * elapsed * elapsed + tol;
  // The plant clamps speed at zero, so braking cannot push the position below
  // the standstill point.
  if (from.v + p.u_min * elapsed < 0.0 && p.u_min < 0.0) {
    double t_stop = std::min(elapsed, -from.v / p.u_min);
    lo = std::min(lo, from.x + from.v * t_stop + 0.5 * p.u_min * t_stop * t_stop - tol);
  }
  return {lo, hi};
}

Interval reachable_speed(const ReportSample& from, double elapsed, const CheckParams& p) {
  double tol = 2.0 * p.eps1 + kGuard;
  double lo = std::max(0.0, from.v + p.u_min * elapsed) - tol;
  double hi = from.v + p.u_max * elapsed + tol;
  return {lo, hi};
}

CheckResult dynamics_check(const CheckContext& ctx, const CheckParams& p) {
  CheckResult res;
  if (ctx.history.size() < 2) return res;  // not applicable
  const ReportSample& now = ctx.history.back();

  // Single-step consistency against the previous report.
  const ReportSample& prev = ctx.history[ctx.history.size() - 2];
  double step = now.t - prev.t;
  bool ok = reachable_position(prev, step, p).contains(now.x) &&
            reachable_speed(prev, step, p).contains(now.v);

  // Windowed consistency: a frozen or replayed stream stays within the
  // one-step tolerance at small dt but drifts over the window.
  if (ok && p.dynamics_window > step) {
    size_t back = std::min(ctx.history.size() - 1,
                           size_t(std::llround(p.dynamics_window / std::max(ctx.dt, 1e-9))));
    const ReportSample& ref = ctx.history[ctx.history.size() - 1 - back];
    double elapsed = now.t - ref.t;
    if (elapsed > 0.0)
      ok = reachable_position(ref, elapsed, p).contains(now.x) &&
           reachable_speed(ref, elapsed, p).contains(now.v);
  }
  res.outcome = ok ? CheckOutcome::Pass : CheckOutcome::Fail;
  return res;
}

CheckResult pairwise_check(const std::vector<PeerReportedState>& peers,
                           const CheckParams& p) {
  CheckResult res;
  if (peers.empty()) return res;  // vacuous
  // Noise on both positions plus the reporter's speed can shift the reported
  // constraint value by eps1*(2 + phi); only a larger deficit counts.
  double slack = p.eps1 * (2.0 + p.phi) + kGuard;
  bool ok = true;
  for (const auto& peer : peers) {
    res.involved_peers.push_back(peer.id);
    double b = peer.gap - p.phi * peer.v_self - p.big_delta;
    if (b < -slack) ok = false;
  }
  res.outcome = ok ? CheckOutcome::Pass : CheckOutcome::Fail;
  return res;
}

CheckResult speed_check(const CheckContext& ctx, const CheckParams& p) {
  CheckResult res;
  if (ctx.history.empty()) return res;
  double v = ctx.history.back().v;
  bool ok = v >= p.v_min - p.eps1 - kGuard && v <= p.v_max + p.eps1 + kGuard;
  res.outcome = ok ? CheckOutcome::Pass : CheckOutcome::Fail;
  return res;
}

}  // namespace

EvidenceReport run_checks(const CheckContext& ctx, const CheckParams& params) {
  EvidenceReport report;
  report.checks[0] = dynamics_check(ctx, params);
  report.checks[1] = pairwise_check(ctx.rear_peers, params);
  report.checks[2] = pairwise_check(ctx.merge_peers, params);
  report.checks[3] = speed_check(ctx, params);
  return report;
}

TrustRecord trust_update(const TrustRecord& record, const EvidenceReport& report,
                         const std::map<int, double>& peer_trust,
                         const EvidenceMagnitudes& mags, double gamma) {
  TrustRecord next = record;
  double r_sum = 0.0, p_sum = 0.0;
  for (int j = 0; j < 4; ++j) {
    const CheckResult& c = report.checks[j];
    if (c.outcome == CheckOutcome::NotApplicable) continue;
    double weight = 1.0;
    if (EvidenceReport::interactive(j)) {
      for (int peer : c.involved_peers) {
        auto it = peer_trust.find(peer);
        if (it == peer_trust.end())
          throw std::invalid_argument("missing trust entry for peer " +
                                      std::to_string(peer));
        weight *= it->second;
      }
    }
    if (c.outcome == CheckOutcome::Pass)
      r_sum += weight * mags.r[size_t(j)];
    else
      p_sum += weight * mags.p[size_t(j)];
  }
  next.R = gamma * record.R + r_sum;
  next.P = gamma * record.P + p_sum;
  next.tau = next.R / (next.R + next.P + next.h);
  next.push_history(next.tau);
  return next;
}

TrustClass classify(const TrustRecord& record, double delta) {
  if (record.tau >= 1.0 - delta) return TrustClass::Trusted;
  if (record.tau <= delta) return TrustClass::Untrusted;
  return TrustClass::Uncertain;
}

}  // namespace cavsim
