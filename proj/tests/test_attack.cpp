#include <doctest.h>

#include <cmath>

#include "cavsim/attack.hpp"
#include "cavsim/rng.hpp"

using namespace cavsim;

TEST_CASE("additive bias with the stealth clamp") {
  StateEstimate clean{50.0, 10.0, EstimateSource::CoordinatorPacket, 0.0};

  BiasResult r = bias_inject(clean, 50.0, 10.0, {0.1, 0.0}, 0.1, true);
  CHECK(r.estimate.x_hat == doctest::Approx(50.1));
  CHECK(r.estimate.v_hat == doctest::Approx(10.0));

  CHECK_THROWS_AS(bias_inject(clean, 50.0, 10.0, {0.2, 0.0}, 0.1, true),
                  std::invalid_argument);

  BiasResult id = bias_inject(clean, 50.0, 10.0, {0.0, 0.0}, 0.1, true);
  CHECK(id.estimate.x_hat == 50.0);
  CHECK(id.estimate.v_hat == 10.0);

  // Non-stealthy tampering is unrestricted when flagged.
  BiasResult loud = bias_inject(clean, 50.0, 10.0, {3.0, 0.0}, 0.1, false);
  CHECK(loud.estimate.x_hat == doctest::Approx(53.0));
}

TEST_CASE("stealthy bias never leaves the detector envelope") {
  SplitMix64 rng(3);
  for (int k = 0; k < 2000; ++k) {
    double tx = rng.uniform(-100.0, 100.0), tv = rng.uniform(0.0, 30.0);
    StateEstimate noisy{tx + rng.uniform(-0.1, 0.1), tv + rng.uniform(-0.1, 0.1),
                        EstimateSource::CoordinatorPacket, 0.0};
    std::array<double, 2> g = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    BiasResult r = bias_inject(noisy, tx, tv, g, 0.1, true);
    CHECK(std::abs(r.estimate.x_hat - tx) <= 0.1 + 1e-12);
    CHECK(std::abs(r.estimate.v_hat - tv) <= 0.1 + 1e-12);
  }
}

TEST_CASE("sybil spawning respects the bound and assigns identities") {
  AttackSpec spec;
  spec.kind = "sybil";
  spec.count = 0;
  spec.routes = {"A"};
  CHECK(spawn_sybil(spec, 1.0, 100, 8, -5.886).empty());

  spec.count = 3;
  spec.routes = {"A", "B"};
  auto fakes = spawn_sybil(spec, 1.0, 100, 8, -5.886);
  REQUIRE(fakes.size() == 3);
  CHECK(fakes[0].id == 100);
  CHECK(fakes[1].id == 101);
  CHECK(fakes[0].route == "A");
  CHECK(fakes[1].route == "B");
  CHECK(fakes[2].route == "A");

  spec.count = 9;
  CHECK_THROWS_AS(spawn_sybil(spec, 1.0, 100, 8, -5.886), std::invalid_argument);
}

TEST_CASE("the stall trajectory brakes consistently then freezes") {
  SybilGeneratorSpec gen;
  gen.kind = "stall";
  gen.x0 = 40.0;
  gen.v0 = 6.0;
  gen.stop_before = 48.0;
  gen.stall_claim_speed = 6.0;
  SybilTrajectory traj(gen, 1.0, -5.886);

  auto [x0, v0] = traj.report(1.0);
  CHECK(x0 == doctest::Approx(40.0));
  CHECK(v0 == doctest::Approx(6.0));

  // During braking the stream satisfies the double-integrator exactly.
  double decel = 36.0 / 16.0;  // v0^2 / (2 * 8 m)
  auto [x1, v1] = traj.report(2.0);
  CHECK(v1 == doctest::Approx(6.0 - decel).epsilon(1e-12));
  CHECK(x1 == doctest::Approx(40.0 + 6.0 - 0.5 * decel).epsilon(1e-12));

  // Fully stopped: frozen position with a nonzero claimed speed.
  auto [xs, vs] = traj.report(20.0);
  CHECK(xs == doctest::Approx(40.0 + 8.0).epsilon(1e-9));
  CHECK(vs == doctest::Approx(6.0));
  auto [xs2, vs2] = traj.report(30.0);
  CHECK(xs2 == xs);
  CHECK(vs2 == vs);
}

TEST_CASE("held-speed and scripted trajectories integrate exactly") {
  SybilGeneratorSpec held;
  held.kind = "held-speed";
  held.x0 = 10.0;
  held.v0 = 5.0;
  SybilTrajectory ht(held, 0.0, -5.886);
  auto [hx, hv] = ht.report(4.0);
  CHECK(hx == doctest::Approx(30.0));
  CHECK(hv == doctest::Approx(5.0));

  SybilGeneratorSpec scripted;
  scripted.kind = "scripted";
  scripted.x0 = 0.0;
  scripted.v0 = 10.0;
  scripted.script = {{1.0, 2.0}, {2.0, -8.0}};  // coast, accelerate, brake hard
  SybilTrajectory st(scripted, 0.0, -5.886);
  auto [sx1, sv1] = st.report(1.0);
  CHECK(sx1 == doctest::Approx(10.0));
  CHECK(sv1 == doctest::Approx(10.0));
  auto [sx2, sv2] = st.report(2.0);
  CHECK(sv2 == doctest::Approx(12.0));
  CHECK(sx2 == doctest::Approx(10.0 + 10.0 + 1.0));
  auto [sx3, sv3] = st.report(3.0);
  CHECK(sv3 == doctest::Approx(4.0));  // -8 for one second: an implied
  CHECK(sx3 == doctest::Approx(21.0 + 12.0 - 4.0));  // deceleration past u_min
}
