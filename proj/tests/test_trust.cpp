#include <doctest.h>

#include <cmath>

#include "cavsim/rng.hpp"
#include "cavsim/trust.hpp"

using namespace cavsim;

namespace {

EvidenceMagnitudes default_mags() {
  EvidenceMagnitudes m;
  m.r = {0.6, 0.6, 0.6, 0.6};
  m.p = {1000.0, 100.0, 50.0, 1.0};
  return m;
}

EvidenceReport all_na() { return EvidenceReport{}; }

}  // namespace

TEST_CASE("evidence accumulation follows the discounted recursion") {
  TrustRecord rec;
  rec.h = 1.0;
  EvidenceMagnitudes mags = default_mags();

  // Two non-interactive passes with r = 0.6 each: R = 1.2, tau = 1.2/2.2.
  EvidenceReport rep = all_na();
  rep.checks[0].outcome = CheckOutcome::Pass;
  rep.checks[3].outcome = CheckOutcome::Pass;
  TrustRecord next = trust_update(rec, rep, {}, mags, 0.9);
  CHECK(next.R == doctest::Approx(1.2));
  CHECK(next.P == doctest::Approx(0.0));
  CHECK(next.tau == doctest::Approx(1.2 / 2.2).epsilon(1e-12));

  // Same passes plus a fully-trusted interactive fail with p = 1000.
  rep.checks[1].outcome = CheckOutcome::Fail;
  rep.checks[1].involved_peers = {7};
  TrustRecord bad = trust_update(rec, rep, {{7, 1.0}}, mags, 0.9);
  CHECK(bad.P == doctest::Approx(100.0));  // p-index 1 carries magnitude 100
  rep.checks[1].outcome = CheckOutcome::NotApplicable;
  rep.checks[0].outcome = CheckOutcome::Fail;  // dynamics fail carries 1000
  rep.checks[3].outcome = CheckOutcome::Pass;
  TrustRecord worst = trust_update(rec, rep, {}, mags, 0.9);
  CHECK(worst.P == doctest::Approx(1000.0));
  CHECK(worst.tau < 0.001);

  // Hand-built combination matching R = 1.2, P = 1000.
  EvidenceReport combo = all_na();
  combo.checks[0].outcome = CheckOutcome::Pass;
  combo.checks[3].outcome = CheckOutcome::Pass;
  combo.checks[1].outcome = CheckOutcome::Fail;
  combo.checks[1].involved_peers = {7};
  EvidenceMagnitudes heavy = mags;
  heavy.p[1] = 1000.0;
  TrustRecord c = trust_update(rec, combo, {{7, 1.0}}, heavy, 0.9);
  CHECK(c.R == doctest::Approx(1.2));
  CHECK(c.P == doctest::Approx(1000.0));
  CHECK(c.tau == doctest::Approx(1.2 / (1.2 + 1000.0 + 1.0)).epsilon(1e-9));
}

TEST_CASE("zero-trust peers void interactive evidence") {
  TrustRecord rec;
  EvidenceReport rep = all_na();
  rep.checks[1].outcome = CheckOutcome::Pass;
  rep.checks[1].involved_peers = {3};
  TrustRecord next = trust_update(rec, rep, {{3, 0.0}}, default_mags(), 0.9);
  CHECK(next.R == doctest::Approx(0.0));
  CHECK(next.tau == doctest::Approx(0.0));
}

TEST_CASE("a missing peer trust entry is an error") {
  TrustRecord rec;
  EvidenceReport rep = all_na();
  rep.checks[1].outcome = CheckOutcome::Pass;
  rep.checks[1].involved_peers = {12};
  CHECK_THROWS_AS(trust_update(rec, rep, {}, default_mags(), 0.9),
                  std::invalid_argument);
}

TEST_CASE("classification against the twin thresholds") {
  TrustRecord rec;
  rec.tau = 0.95;
  CHECK(classify(rec, 0.1) == TrustClass::Trusted);
  rec.tau = 0.05;
  CHECK(classify(rec, 0.1) == TrustClass::Untrusted);
  rec.tau = 0.5;
  CHECK(classify(rec, 0.1) == TrustClass::Uncertain);
}

TEST_CASE("tau stays in [0,1) and responds monotonically to evidence") {
  SplitMix64 rng(5);
  EvidenceMagnitudes mags = default_mags();
  TrustRecord rec;
  for (int step = 0; step < 300; ++step) {
    EvidenceReport rep = all_na();
    for (int j = 0; j < 4; ++j) {
      double roll = rng.unit();
      rep.checks[size_t(j)].outcome = roll < 0.5    ? CheckOutcome::Pass
                                      : roll < 0.75 ? CheckOutcome::Fail
                                                    : CheckOutcome::NotApplicable;
    }
    rec = trust_update(rec, rep, {}, mags, 0.9);
    CHECK(rec.tau >= 0.0);
    CHECK(rec.tau < 1.0);
  }

  // Raising a pass magnitude cannot lower tau; raising a fail magnitude
  // cannot raise it.
  TrustRecord base;
  base.R = 3.0;
  base.P = 2.0;
  EvidenceReport rep = all_na();
  rep.checks[0].outcome = CheckOutcome::Pass;
  rep.checks[3].outcome = CheckOutcome::Fail;
  EvidenceMagnitudes lo = default_mags(), hi = default_mags();
  hi.r[0] = lo.r[0] + 0.3;
  double tau_lo = trust_update(base, rep, {}, lo, 0.9).tau;
  double tau_hi = trust_update(base, rep, {}, hi, 0.9).tau;
  CHECK(tau_hi >= tau_lo);
  hi = lo;
  hi.p[3] = lo.p[3] + 5.0;
  tau_hi = trust_update(base, rep, {}, hi, 0.9).tau;
  CHECK(tau_hi <= tau_lo);
}

TEST_CASE("steady all-pass evidence converges to the fixed point") {
  // R_inf = sum(r) / (1 - gamma); tau_inf = R_inf / (R_inf + h).
  EvidenceMagnitudes mags = default_mags();
  TrustRecord rec;
  rec.h = 1.0;
  EvidenceReport rep = all_na();
  rep.checks[0].outcome = CheckOutcome::Pass;
  rep.checks[3].outcome = CheckOutcome::Pass;
  for (int k = 0; k < 500; ++k) rec = trust_update(rec, rep, {}, mags, 0.9);
  double r_inf = 1.2 / (1.0 - 0.9);
  CHECK(rec.tau == doctest::Approx(r_inf / (r_inf + 1.0)).epsilon(1e-6));
}

TEST_CASE("impossible dynamics drop trust below the lower threshold at once") {
  EvidenceMagnitudes mags = default_mags();
  TrustRecord rec;
  rec.h = 1.0;
  // Saturate positive evidence first.
  EvidenceReport good = all_na();
  good.checks[0].outcome = CheckOutcome::Pass;
  good.checks[3].outcome = CheckOutcome::Pass;
  for (int k = 0; k < 400; ++k) rec = trust_update(rec, good, {}, mags, 0.9);
  CHECK(rec.tau > 0.9);
  EvidenceReport bad = good;
  bad.checks[0].outcome = CheckOutcome::Fail;
  rec = trust_update(rec, bad, {}, mags, 0.9);
  CHECK(rec.tau <= 0.1);
}

TEST_CASE("behavior checks on reported streams") {
  CheckParams params;
  params.eps1 = 0.1;
  params.dynamics_window = 0.2;

  CheckContext ctx;
  ctx.dt = 0.1;
  // Consistent stream: x advances by v*dt under in-range acceleration.
  ctx.history = {{0.0, 0.0, 10.0}, {0.1, 1.0, 10.0}};
  EvidenceReport rep = run_checks(ctx, params);
  CHECK(rep.checks[0].outcome == CheckOutcome::Pass);
  CHECK(rep.checks[1].outcome == CheckOutcome::NotApplicable);  // lone vehicle
  CHECK(rep.checks[2].outcome == CheckOutcome::NotApplicable);
  CHECK(rep.checks[3].outcome == CheckOutcome::Pass);

  // A 10 m jump in one 0.1 s tick is far outside the reachable set.
  ctx.history = {{0.0, 0.0, 10.0}, {0.1, 10.0, 10.0}};
  rep = run_checks(ctx, params);
  CHECK(rep.checks[0].outcome == CheckOutcome::Fail);

  // One sample: not applicable.
  ctx.history = {{0.0, 0.0, 10.0}};
  rep = run_checks(ctx, params);
  CHECK(rep.checks[0].outcome == CheckOutcome::NotApplicable);

  // A frozen position with a claimed speed passes one step at small dt but
  // fails over the window.
  ctx.dt = 0.01;
  ctx.history.clear();
  for (int k = 0; k <= 30; ++k) ctx.history.push_back({0.01 * k, 50.0, 6.0});
  rep = run_checks(ctx, params);
  CHECK(rep.checks[0].outcome == CheckOutcome::Fail);

  // Pairwise conformance in reported states.
  ctx.history = {{0.0, 0.0, 10.0}, {0.01, 0.1, 10.0}};
  ctx.rear_peers = {{4, 30.0, 10.0}};  // gap 30 vs phi*v + Delta = 21.78
  rep = run_checks(ctx, params);
  CHECK(rep.checks[1].outcome == CheckOutcome::Pass);
  CHECK(rep.checks[1].involved_peers == std::vector<int>{4});
  ctx.rear_peers = {{4, 10.0, 10.0}};  // deficit beyond the noise slack
  rep = run_checks(ctx, params);
  CHECK(rep.checks[1].outcome == CheckOutcome::Fail);

  // Speed-limit conformance tolerates the noise bound.
  ctx.rear_peers.clear();
  ctx.history = {{0.0, 0.0, 30.05}, {0.01, 0.3, 30.05}};
  rep = run_checks(ctx, params);
  CHECK(rep.checks[3].outcome == CheckOutcome::Pass);
  ctx.history = {{0.0, 0.0, 31.0}, {0.01, 0.31, 31.0}};
  rep = run_checks(ctx, params);
  CHECK(rep.checks[3].outcome == CheckOutcome::Fail);
}
