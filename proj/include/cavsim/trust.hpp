#pragma once

#include <map>
#include <vector>

#include "cavsim/geometry.hpp"
#include "cavsim/model.hpp"

namespace cavsim {

// The four behavioral specifications, in the order matching the configured
// evidence magnitude vectors:
//   0: physical-model conformity (reported trajectory reachable under the
//      control bounds)
//   1: rear-end conformance in reported states         (interactive)
//   2: merging conformance in reported states          (interactive)
//   3: speed-limit conformance
enum class CheckId : int { Dynamics = 0, RearEnd = 1, Merging = 2, SpeedLimit = 3 };

enum class CheckOutcome : uint8_t { Pass, Fail, NotApplicable };

struct CheckResult {
  CheckOutcome outcome = CheckOutcome::NotApplicable;
  std::vector<int> involved_peers;  // S_{i,j}, only for interactive checks
};

struct EvidenceReport {
  std::array<CheckResult, 4> checks;
  static bool interactive(int j) { return j == 1 || j == 2; }
};

// One reported (position, speed) sample in the coordinator's history.
struct ReportSample {
  double t = 0.0;
  double x = 0.0;
  double v = 0.0;
};

struct PeerReportedState {
  int id = 0;
  double gap = 0.0;    // common-coordinate gap to the peer (ahead positive)
  double v_self = 0.0; // reporter speed used in the constraint
};

// Everything the coordinator knows about vehicle i this tick, expressed in
// reported states only.
struct CheckContext {
  std::vector<ReportSample> history;  // oldest first, includes the current tick
  std::vector<PeerReportedState> rear_peers;
  std::vector<PeerReportedState> merge_peers;
  double dt = 0.01;
};

struct CheckParams {
  double u_min = -5.886;
  double u_max = 4.905;
  double v_min = 0.0;
  double v_max = 30.0;
  double phi = 1.8;
  double big_delta = 3.78;
  double eps1 = 0.1;
  double dynamics_window = 0.2;  // seconds of history the conformity check spans
};

EvidenceReport run_checks(const CheckContext& ctx, const CheckParams& params);

// Evidence accumulation per the trust recursion: time-discounted R and P with
// interactive terms scaled by the product of the involved peers' trust.
struct EvidenceMagnitudes {
  std::array<double, 4> r{};
  std::array<double, 4> p{};
};

TrustRecord trust_update(const TrustRecord& record, const EvidenceReport& report,
                         const std::map<int, double>& peer_trust,
                         const EvidenceMagnitudes& mags, double gamma);

enum class TrustClass : uint8_t { Untrusted, Uncertain, Trusted };

TrustClass classify(const TrustRecord& record, double delta);

}  // namespace cavsim
