#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cavsim {

using json = nlohmann::json;

constexpr double kKmhToMs = 1.0 / 3.6;

// ---------------------------------------------------------------------------
// Core domain types
// ---------------------------------------------------------------------------

// Ground-truth longitudinal state of one vehicle along its own route.
struct VehicleState {
  double x = 0.0;          // distance from CZ entry origin (m)
  double v = 0.0;          // speed (m/s), never negative
  double u_applied = 0.0;  // last applied control (m/s^2)
  double t_entry = 0.0;    // CZ entry time (s)
};

enum class EstimateSource : uint8_t { SelfMeasurement, CoordinatorPacket, LocalPerception };

// A noisy/attacked view of a vehicle state. While no attack or only a stealthy
// attack is active, (x_hat, v_hat) stays within eps1 of truth per component.
struct StateEstimate {
  double x_hat = 0.0;
  double v_hat = 0.0;
  EstimateSource source = EstimateSource::SelfMeasurement;
  double stamp = 0.0;
};

// Cumulative trust evidence for one queue entry: tau = R / (R + P + h).
struct TrustRecord {
  double R = 0.0;
  double P = 0.0;
  double tau = 0.0;
  double h = 1.0;
  std::deque<double> history;  // recent tau values, length >= eta
  size_t history_cap = 64;

  void push_history(double value) {
    history.push_back(value);
    while (history.size() > history_cap) history.pop_front();
  }
};

enum class ConstraintKind : uint8_t { RearEnd, Merging, VMin, VMax, UMin, UMax, Clf };

enum class Sense : uint8_t { Ge, Le };

const char* to_string(ConstraintKind k);

// One affine inequality in the decision variables (u, e):
//   a_u * u + a_e * e  (sense)  rhs
struct LinearControlConstraint {
  double a_u = 0.0;
  double a_e = 0.0;
  double rhs = 0.0;
  Sense sense = Sense::Ge;
  ConstraintKind kind = ConstraintKind::Clf;
  std::optional<int> peer;  // present iff kind in {RearEnd, Merging}
  std::optional<int> mp;    // merging-point id for Merging rows

  double lhs(double u, double e) const { return a_u * u + a_e * e; }
  bool satisfied(double u, double e, double tol = 1e-9) const {
    double g = lhs(u, e);
    return sense == Sense::Ge ? g >= rhs - tol : g <= rhs + tol;
  }
  // Signed slack, nonnegative when satisfied.
  double margin(double u, double e) const {
    double g = lhs(u, e);
    return sense == Sense::Ge ? g - rhs : rhs - g;
  }
};

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

struct RouteSpec {
  std::string id;
  std::string entry_lane;
  std::string exit_lane;
  double length = 0.0;
  double fork_pos = 0.0;  // end of the shared entry segment
  double join_pos = 0.0;  // start of the shared exit segment
  std::vector<std::pair<int, double>> merging_points;  // (mp id, arc position)
};

struct GeometryConfig {
  std::string preset = "fig1-intersection";  // or "single-merge", or "" for custom
  double length = 400.0;                     // L, straight-route length (m)
  double reschedule_zone = 100.0;            // L1 (m)
  std::vector<RouteSpec> custom_routes;      // used when preset is empty
};

struct ExplicitArrival {
  double t = 0.0;
  std::string route;
  double v0 = 10.0;
  std::optional<double> v_ref;  // per-vehicle speed target override
};

struct ArrivalConfig {
  std::string mode = "poisson";  // "poisson" | "explicit"
  double rate_veh_per_hour = 400.0;
  int count = 10;
  uint64_t seed = 1;
  double initial_speed = 10.0;  // m/s
  std::vector<std::string> routes;  // optional pinned route cycle for poisson mode
  std::vector<ExplicitArrival> list;
};

struct ControlParams {
  double phi = 1.8;        // reaction time (s)
  double big_delta = 3.78; // minimum safe distance (m)
  double v_min = 0.0;
  double v_max = 30.0;     // m/s
  double u_min = -5.886;
  double u_max = 4.905;
  double alpha = 0.9;      // time/energy weight
  double beta = 0.0;       // derived from alpha and control bounds
  double lambda = 10.0;    // CLF slack weight in the QP
  double c_clf = 2.0;      // CLF convergence rate
  double class_k = 0.1;    // class-K slope for peer rows in the plain mode
  double class_k_trust = 0.1;  // c_{i,j} scaling for trust-weighted rows
  std::optional<double> class_k_rear;
  std::optional<double> class_k_merging;
  // Speed-limit rows act on exactly-known own state; a unit slope tracks the
  // limit without the crawl a 0.1 slope would impose.
  std::optional<double> class_k_vlimits = 1.0;
  double epsilon1 = 0.1;   // shared noise / stealthy-attack bound

  double class_k_for(ConstraintKind k) const {
    switch (k) {
      case ConstraintKind::RearEnd: return class_k_rear.value_or(class_k);
      case ConstraintKind::Merging: return class_k_merging.value_or(class_k);
      case ConstraintKind::VMin:
      case ConstraintKind::VMax: return class_k_vlimits.value_or(class_k);
      default: return class_k;
    }
  }
};

struct NoiseConfig {
  std::string distribution = "uniform";  // "uniform" | "truncated-gaussian"
  uint64_t seed = 2;
};

struct TrustParams {
  double gamma = 0.9;
  double h = 1.0;
  double delta = 0.1;  // thresholds delta and 1 - delta
  int eta = 40;        // observation-window length (ticks)
  std::array<double, 4> r = {0.6, 0.6, 0.6, 0.6};
  std::array<double, 4> p = {1000.0, 100.0, 50.0, 1.0};
  double dynamics_window = 0.2;  // span of the model-conformity check (s)
};

struct EventParams {
  std::array<double, 2> s_x = {1.5, 0.4};  // state drift box (m, m/s)
  double s_tau = 0.1;                      // trust drift threshold
};

struct PerceptionConfig {
  double radius = 50.0;
  double angle = 3.14159265358979323846;
  double p_detect = 1.0;
  double redetect_period = 0.0;  // seconds per detection draw; 0 = every tick
  uint64_t seed = 3;
};

struct SimParams {
  double dt = 0.01;
  double t_max = 120.0;
};

struct SybilGeneratorSpec {
  std::string kind = "stall";  // "stall" | "held-speed" | "scripted"
  double x0 = 0.0;
  double v0 = 9.0;                 // initial reported speed
  double stop_before = 150.0;      // stall: come to rest before this arc position
  double stall_claim_speed = 6.0;  // stall: speed claimed while position is frozen
  std::vector<std::pair<double, double>> script;  // (t offset, u) pieces
};

struct AttackSpec {
  std::string kind;  // "sybil" | "bias-injection"
  double start = 0.0;
  double stop = 1e30;
  // sybil
  int count = 0;
  std::vector<std::string> routes;
  SybilGeneratorSpec generator;
  // bias-injection
  std::vector<int> targets;            // arrival order numbers of targeted vehicles
  std::string direction = "to-rsu";    // "to-rsu" | "from-rsu" | "both"
  std::array<double, 2> bias = {0.0, 0.0};
  bool stealthy = true;
};

struct MitigationConfig {
  bool enabled = true;
  std::optional<int> force_fp_vehicle;  // arrival order number forced into S_f
  double force_fp_time = 0.0;
  int max_sybil = 8;  // admission-side bound on concurrent fakes
};

struct ReferenceConfig {
  std::string mode = "speed-tracking";  // "speed-tracking" | "linear"
  double a = 0.0;                        // u_ref(t) = a * (t - t_entry) + b
  double b = 0.0;
};

struct FuelParams {
  std::array<double, 4> omega = {0.1569, 0.02450, -0.0007415, 0.00005975};
  std::array<double, 3> accel = {0.07224, 0.09681, 0.001075};
  bool accel_only_positive = true;
};

struct Toggles {
  bool trust_aware = true;
  bool robust = true;
};

struct ScenarioConfig {
  std::string name = "scenario";
  GeometryConfig geometry;
  ArrivalConfig arrivals;
  ControlParams params;
  NoiseConfig noise;
  TrustParams trust;
  EventParams event;
  PerceptionConfig perception;
  SimParams sim;
  std::vector<AttackSpec> attacks;
  MitigationConfig mitigation;
  ReferenceConfig reference;
  FuelParams fuel;
  Toggles toggles;
};

// ---------------------------------------------------------------------------
// Validation and (de)serialization
// ---------------------------------------------------------------------------

double compute_beta(double alpha, double u_min, double u_max);

// Checks every config invariant; computes beta. Returns one message per
// violation, empty on success.
std::vector<std::string> validate_scenario(ScenarioConfig& cfg);

// Strict parser: unknown keys are rejected. Returns errors instead of throwing.
std::vector<std::string> scenario_from_json(const json& j, ScenarioConfig& out);

json scenario_to_json(const ScenarioConfig& cfg);

// Convenience: parse + validate from file text.
struct LoadResult {
  ScenarioConfig config;
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};
LoadResult load_scenario_text(const std::string& text);
LoadResult load_scenario_file(const std::string& path);

}  // namespace cavsim
