#include "cavsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cavsim {

const char* to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::RearEnd: return "rear-end";
    case ConstraintKind::Merging: return "merging";
    case ConstraintKind::VMin: return "v-min";
    case ConstraintKind::VMax: return "v-max";
    case ConstraintKind::UMin: return "u-min";
    case ConstraintKind::UMax: return "u-max";
    case ConstraintKind::Clf: return "clf";
  }
  return "?";
}

double compute_beta(double alpha, double u_min, double u_max) {
  double worst = std::max(u_max * u_max, u_min * u_min);
  return (1.0 - alpha) * worst / (2.0 * alpha);
}

namespace {

// Strict field reader: records unknown keys and type mismatches as errors.
class Fields {
 public:
  Fields(const json& j, std::string path, std::vector<std::string>& errs)
      : j_(j), path_(std::move(path)), errs_(errs) {
    if (!j_.is_object()) errs_.push_back(path_ + ": expected an object");
  }

  ~Fields() {
    if (!j_.is_object()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        errs_.push_back(path_ + ": unknown key \"" + it.key() + "\"");
    }
  }

  bool has(const std::string& key) {
    return j_.is_object() && j_.contains(key);
  }

  const json* take(const std::string& key) {
    seen_.insert(key);
    if (!j_.is_object() || !j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = take(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      errs_.push_back(path_ + "." + key + ": wrong type");
    }
  }

  void get_speed(const std::string& key, double& out) {
    // Speeds may be given in m/s (plain key) or km/h (key + "_kmh").
    std::string kmh = key + "_kmh";
    bool has_ms = has(key), has_kmh = has(kmh);
    if (has_ms && has_kmh)
      errs_.push_back(path_ + ": give either " + key + " or " + kmh + ", not both");
    double tmp;
    if (has_ms) {
      tmp = out;
      get(key, tmp);
      out = tmp;
    } else {
      take(key);
    }
    if (has_kmh) {
      tmp = out / kKmhToMs;
      get(kmh, tmp);
      out = tmp * kKmhToMs;
    } else {
      take(kmh);
    }
  }

  const std::string& path() const { return path_; }
  std::vector<std::string>& errs() { return errs_; }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string>& errs_;
  std::set<std::string> seen_;
};

void parse_geometry(const json& j, GeometryConfig& g, std::vector<std::string>& errs) {
  Fields f(j, "geometry", errs);
  f.get("preset", g.preset);
  f.get("length", g.length);
  f.get("reschedule_zone", g.reschedule_zone);
  if (const json* r = f.take("routes")) {
    g.preset.clear();
    if (!r->is_array()) {
      errs.push_back("geometry.routes: expected an array");
      return;
    }
    int idx = 0;
    for (const auto& rj : *r) {
      Fields rf(rj, "geometry.routes[" + std::to_string(idx++) + "]", errs);
      RouteSpec rs;
      rf.get("id", rs.id);
      rf.get("entry_lane", rs.entry_lane);
      rf.get("exit_lane", rs.exit_lane);
      rf.get("length", rs.length);
      rs.fork_pos = rs.length;
      rs.join_pos = 0.0;
      rf.get("fork", rs.fork_pos);
      rf.get("join", rs.join_pos);
      if (const json* mps = rf.take("merging_points")) {
        for (const auto& m : *mps) {
          Fields mf(m, rf.path() + ".merging_points", errs);
          int id = -1;
          double pos = 0.0;
          mf.get("id", id);
          mf.get("pos", pos);
          rs.merging_points.emplace_back(id, pos);
        }
      }
      g.custom_routes.push_back(std::move(rs));
    }
  }
}

void parse_arrivals(const json& j, ArrivalConfig& a, std::vector<std::string>& errs) {
  Fields f(j, "arrivals", errs);
  f.get("mode", a.mode);
  f.get("rate_veh_per_hour", a.rate_veh_per_hour);
  f.get("count", a.count);
  f.get("seed", a.seed);
  f.get_speed("initial_speed", a.initial_speed);
  f.get("routes", a.routes);
  if (const json* list = f.take("list")) {
    int idx = 0;
    for (const auto& ej : *list) {
      Fields ef(ej, "arrivals.list[" + std::to_string(idx++) + "]", errs);
      ExplicitArrival e;
      ef.get("t", e.t);
      ef.get("route", e.route);
      ef.get_speed("v0", e.v0);
      if (ef.has("v_ref") || ef.has("v_ref_kmh")) {
        double vr = 0.0;
        ef.get_speed("v_ref", vr);
        e.v_ref = vr;
      } else {
        ef.take("v_ref");
        ef.take("v_ref_kmh");
      }
      a.list.push_back(e);
    }
  }
}

void parse_params(const json& j, ControlParams& p, std::vector<std::string>& errs) {
  Fields f(j, "params", errs);
  f.get("phi", p.phi);
  f.get("delta_gap", p.big_delta);
  f.get_speed("v_min", p.v_min);
  f.get_speed("v_max", p.v_max);
  f.get("u_min", p.u_min);
  f.get("u_max", p.u_max);
  f.get("alpha", p.alpha);
  f.get("lambda", p.lambda);
  f.get("c_clf", p.c_clf);
  f.get("class_k", p.class_k);
  p.class_k_trust = p.class_k;
  f.get("class_k_trust", p.class_k_trust);
  if (f.has("class_k_rear")) { double v = 0; f.get("class_k_rear", v); p.class_k_rear = v; }
  else f.take("class_k_rear");
  if (f.has("class_k_merging")) { double v = 0; f.get("class_k_merging", v); p.class_k_merging = v; }
  else f.take("class_k_merging");
  if (f.has("class_k_vlimits")) { double v = 0; f.get("class_k_vlimits", v); p.class_k_vlimits = v; }
  else f.take("class_k_vlimits");
  f.get("epsilon1", p.epsilon1);
}

void parse_attack(const json& j, AttackSpec& a, const std::string& path,
                  std::vector<std::string>& errs) {
  Fields f(j, path, errs);
  f.get("kind", a.kind);
  f.get("start", a.start);
  f.get("stop", a.stop);
  f.get("count", a.count);
  f.get("routes", a.routes);
  if (const json* g = f.take("generator")) {
    Fields gf(*g, path + ".generator", errs);
    gf.get("kind", a.generator.kind);
    gf.get("x0", a.generator.x0);
    gf.get_speed("v0", a.generator.v0);
    gf.get("stop_before", a.generator.stop_before);
    gf.get_speed("stall_claim_speed", a.generator.stall_claim_speed);
    if (const json* s = gf.take("script")) {
      for (const auto& piece : *s) {
        if (piece.is_array() && piece.size() == 2)
          a.generator.script.emplace_back(piece[0].get<double>(), piece[1].get<double>());
        else
          errs.push_back(path + ".generator.script: expected [t, u] pairs");
      }
    }
  }
  f.get("targets", a.targets);
  f.get("direction", a.direction);
  if (const json* b = f.take("bias")) {
    if (b->is_array() && b->size() == 2) {
      a.bias[0] = (*b)[0].get<double>();
      a.bias[1] = (*b)[1].get<double>();
    } else {
      errs.push_back(path + ".bias: expected [x, v]");
    }
  }
  f.get("stealthy", a.stealthy);
}

template <size_t N>
void parse_fixed_array(Fields& f, const std::string& key, std::array<double, N>& out) {
  if (const json* v = f.take(key)) {
    if (v->is_array() && v->size() == N) {
      for (size_t i = 0; i < N; ++i) out[i] = (*v)[i].get<double>();
    } else {
      f.errs().push_back(f.path() + "." + key + ": expected an array of " +
                         std::to_string(N));
    }
  }
}

}  // namespace

std::vector<std::string> scenario_from_json(const json& j, ScenarioConfig& out) {
  std::vector<std::string> errs;
  out = ScenarioConfig{};
  {
    Fields f(j, "scenario", errs);
    f.get("name", out.name);
    if (const json* v = f.take("geometry")) parse_geometry(*v, out.geometry, errs);
    if (const json* v = f.take("arrivals")) parse_arrivals(*v, out.arrivals, errs);
    if (const json* v = f.take("params")) parse_params(*v, out.params, errs);
    if (const json* v = f.take("noise")) {
      Fields nf(*v, "noise", errs);
      nf.get("distribution", out.noise.distribution);
      nf.get("seed", out.noise.seed);
    }
    if (const json* v = f.take("trust")) {
      Fields tf(*v, "trust", errs);
      tf.get("gamma", out.trust.gamma);
      tf.get("h", out.trust.h);
      tf.get("delta", out.trust.delta);
      tf.get("eta", out.trust.eta);
      parse_fixed_array(tf, "r", out.trust.r);
      parse_fixed_array(tf, "p", out.trust.p);
      tf.get("dynamics_window", out.trust.dynamics_window);
    }
    if (const json* v = f.take("event")) {
      Fields ef(*v, "event", errs);
      parse_fixed_array(ef, "s_x", out.event.s_x);
      ef.get("s_tau", out.event.s_tau);
    }
    if (const json* v = f.take("perception")) {
      Fields pf(*v, "perception", errs);
      pf.get("radius", out.perception.radius);
      pf.get("angle", out.perception.angle);
      pf.get("p_detect", out.perception.p_detect);
      pf.get("redetect_period", out.perception.redetect_period);
      pf.get("seed", out.perception.seed);
    }
    if (const json* v = f.take("sim")) {
      Fields sf(*v, "sim", errs);
      sf.get("dt", out.sim.dt);
      sf.get("t_max", out.sim.t_max);
    }
    if (const json* v = f.take("attacks")) {
      int idx = 0;
      for (const auto& aj : *v) {
        AttackSpec a;
        parse_attack(aj, a, "attacks[" + std::to_string(idx++) + "]", errs);
        out.attacks.push_back(std::move(a));
      }
    }
    if (const json* v = f.take("mitigation")) {
      Fields mf(*v, "mitigation", errs);
      mf.get("enabled", out.mitigation.enabled);
      if (mf.has("force_fp_vehicle")) {
        int id = -1;
        mf.get("force_fp_vehicle", id);
        out.mitigation.force_fp_vehicle = id;
      } else {
        mf.take("force_fp_vehicle");
      }
      mf.get("force_fp_time", out.mitigation.force_fp_time);
      mf.get("max_sybil", out.mitigation.max_sybil);
    }
    if (const json* v = f.take("reference")) {
      Fields rf(*v, "reference", errs);
      rf.get("mode", out.reference.mode);
      rf.get("a", out.reference.a);
      rf.get("b", out.reference.b);
    }
    if (const json* v = f.take("fuel")) {
      Fields ff(*v, "fuel", errs);
      parse_fixed_array(ff, "omega", out.fuel.omega);
      parse_fixed_array(ff, "accel", out.fuel.accel);
      ff.get("accel_only_positive", out.fuel.accel_only_positive);
    }
    if (const json* v = f.take("toggles")) {
      Fields tf(*v, "toggles", errs);
      tf.get("trust_aware", out.toggles.trust_aware);
      tf.get("robust", out.toggles.robust);
    }
  }
  return errs;
}

std::vector<std::string> validate_scenario(ScenarioConfig& cfg) {
  std::vector<std::string> errs;
  auto& p = cfg.params;

  if (!(cfg.trust.delta > 0.0 && cfg.trust.delta < 0.5))
    errs.push_back("delta must lie in (0, 1/2)");
  if (!(cfg.trust.gamma > 0.0 && cfg.trust.gamma < 1.0))
    errs.push_back("gamma must lie in (0, 1)");
  if (cfg.trust.h <= 0.0) errs.push_back("trust prior h must be positive");
  if (cfg.trust.eta < 1) errs.push_back("eta must be at least 1");
  for (double r : cfg.trust.r)
    if (r < 0.0) errs.push_back("positive-evidence magnitudes must be nonnegative");
  for (double q : cfg.trust.p)
    if (q < 0.0) errs.push_back("negative-evidence magnitudes must be nonnegative");

  if (!(p.u_min < 0.0 && 0.0 < p.u_max))
    errs.push_back("control bounds must satisfy u_min < 0 < u_max");
  if (!(0.0 <= p.v_min && p.v_min < p.v_max))
    errs.push_back("speed bounds must satisfy 0 <= v_min < v_max");
  if (!(p.alpha > 0.0 && p.alpha <= 1.0))
    errs.push_back("alpha must lie in (0, 1]");
  if (p.phi <= 0.0) errs.push_back("phi must be positive");
  if (p.big_delta <= 0.0) errs.push_back("delta_gap must be positive");
  if (p.epsilon1 < 0.0) errs.push_back("epsilon1 must be nonnegative");
  if (p.lambda <= 0.0) errs.push_back("lambda must be positive");

  for (int i = 0; i < 2; ++i)
    if (!(cfg.event.s_x[i] > 2.0 * p.epsilon1))
      errs.push_back("event box s_x[" + std::to_string(i) +
                     "] must exceed 2*epsilon1, otherwise the trigger fires every tick");
  if (cfg.event.s_tau <= 0.0) errs.push_back("s_tau must be positive");

  if (cfg.geometry.length <= 0.0) errs.push_back("geometry length must be positive");
  if (cfg.geometry.reschedule_zone < 0.0)
    errs.push_back("reschedule_zone must be nonnegative");
  if (cfg.geometry.preset.empty()) {
    std::set<std::string> route_ids;
    for (const auto& r : cfg.geometry.custom_routes) {
      if (r.length <= 0.0)
        errs.push_back("route " + r.id + ": length must be positive");
      if (!route_ids.insert(r.id).second)
        errs.push_back("duplicate route id " + r.id);
      double prev = 0.0;
      for (const auto& [mp, pos] : r.merging_points) {
        if (pos <= prev || pos >= r.length)
          errs.push_back("route " + r.id + ": merging-point positions must be strictly " +
                         "increasing and interior");
        prev = pos;
      }
    }
  } else if (cfg.geometry.preset != "fig1-intersection" &&
             cfg.geometry.preset != "single-merge") {
    errs.push_back("unknown geometry preset \"" + cfg.geometry.preset + "\"");
  }

  if (!(cfg.perception.p_detect >= 0.0 && cfg.perception.p_detect <= 1.0))
    errs.push_back("p_detect must lie in [0, 1]");
  if (cfg.perception.radius < 0.0) errs.push_back("perception radius must be nonnegative");
  if (cfg.perception.redetect_period < 0.0)
    errs.push_back("redetect_period must be nonnegative");

  if (cfg.sim.dt <= 0.0) errs.push_back("dt must be positive");
  if (cfg.sim.t_max <= 0.0) errs.push_back("t_max must be positive");

  if (cfg.noise.distribution != "uniform" && cfg.noise.distribution != "truncated-gaussian")
    errs.push_back("unknown noise distribution \"" + cfg.noise.distribution + "\"");

  if (cfg.arrivals.mode != "poisson" && cfg.arrivals.mode != "explicit")
    errs.push_back("arrivals mode must be poisson or explicit");
  if (cfg.arrivals.mode == "poisson" && cfg.arrivals.rate_veh_per_hour <= 0.0)
    errs.push_back("arrival rate must be positive");
  if (cfg.arrivals.initial_speed < 0.0 || cfg.arrivals.initial_speed > p.v_max)
    errs.push_back("initial_speed must lie in [0, v_max]");

  for (size_t i = 0; i < cfg.attacks.size(); ++i) {
    const auto& a = cfg.attacks[i];
    std::string at = "attacks[" + std::to_string(i) + "]";
    if (a.kind != "sybil" && a.kind != "bias-injection")
      errs.push_back(at + ": kind must be sybil or bias-injection");
    if (a.kind == "sybil" && a.count > cfg.mitigation.max_sybil)
      errs.push_back(at + ": sybil count exceeds the configured bound");
    if (a.kind == "bias-injection" && a.stealthy) {
      double g = std::max(std::abs(a.bias[0]), std::abs(a.bias[1]));
      if (g > p.epsilon1 + 1e-12)
        errs.push_back(at + ": stealthy bias magnitude exceeds epsilon1");
    }
  }

  if (cfg.reference.mode != "speed-tracking" && cfg.reference.mode != "linear")
    errs.push_back("reference mode must be speed-tracking or linear");

  if (errs.empty()) p.beta = compute_beta(p.alpha, p.u_min, p.u_max);
  return errs;
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  json g;
  if (!cfg.geometry.preset.empty()) g["preset"] = cfg.geometry.preset;
  g["length"] = cfg.geometry.length;
  g["reschedule_zone"] = cfg.geometry.reschedule_zone;
  if (cfg.geometry.preset.empty()) {
    json routes = json::array();
    for (const auto& r : cfg.geometry.custom_routes) {
      json rj;
      rj["id"] = r.id;
      rj["entry_lane"] = r.entry_lane;
      rj["exit_lane"] = r.exit_lane;
      rj["length"] = r.length;
      rj["fork"] = r.fork_pos;
      rj["join"] = r.join_pos;
      json mps = json::array();
      for (const auto& [id, pos] : r.merging_points) mps.push_back({{"id", id}, {"pos", pos}});
      rj["merging_points"] = mps;
      routes.push_back(rj);
    }
    g["routes"] = routes;
  }
  j["geometry"] = g;

  json a;
  a["mode"] = cfg.arrivals.mode;
  a["rate_veh_per_hour"] = cfg.arrivals.rate_veh_per_hour;
  a["count"] = cfg.arrivals.count;
  a["seed"] = cfg.arrivals.seed;
  a["initial_speed"] = cfg.arrivals.initial_speed;
  if (!cfg.arrivals.routes.empty()) a["routes"] = cfg.arrivals.routes;
  if (!cfg.arrivals.list.empty()) {
    json list = json::array();
    for (const auto& e : cfg.arrivals.list) {
      json ej{{"t", e.t}, {"route", e.route}, {"v0", e.v0}};
      if (e.v_ref) ej["v_ref"] = *e.v_ref;
      list.push_back(ej);
    }
    a["list"] = list;
  }
  j["arrivals"] = a;

  json p;
  p["phi"] = cfg.params.phi;
  p["delta_gap"] = cfg.params.big_delta;
  p["v_min"] = cfg.params.v_min;
  p["v_max"] = cfg.params.v_max;
  p["u_min"] = cfg.params.u_min;
  p["u_max"] = cfg.params.u_max;
  p["alpha"] = cfg.params.alpha;
  p["lambda"] = cfg.params.lambda;
  p["c_clf"] = cfg.params.c_clf;
  p["class_k"] = cfg.params.class_k;
  p["class_k_trust"] = cfg.params.class_k_trust;
  if (cfg.params.class_k_rear) p["class_k_rear"] = *cfg.params.class_k_rear;
  if (cfg.params.class_k_merging) p["class_k_merging"] = *cfg.params.class_k_merging;
  if (cfg.params.class_k_vlimits) p["class_k_vlimits"] = *cfg.params.class_k_vlimits;
  p["epsilon1"] = cfg.params.epsilon1;
  j["params"] = p;

  j["noise"] = {{"distribution", cfg.noise.distribution}, {"seed", cfg.noise.seed}};
  j["trust"] = {{"gamma", cfg.trust.gamma}, {"h", cfg.trust.h},
                {"delta", cfg.trust.delta}, {"eta", cfg.trust.eta},
                {"r", cfg.trust.r},         {"p", cfg.trust.p},
                {"dynamics_window", cfg.trust.dynamics_window}};
  j["event"] = {{"s_x", cfg.event.s_x}, {"s_tau", cfg.event.s_tau}};
  j["perception"] = {{"radius", cfg.perception.radius},
                     {"angle", cfg.perception.angle},
                     {"p_detect", cfg.perception.p_detect},
                     {"redetect_period", cfg.perception.redetect_period},
                     {"seed", cfg.perception.seed}};
  j["sim"] = {{"dt", cfg.sim.dt}, {"t_max", cfg.sim.t_max}};

  if (!cfg.attacks.empty()) {
    json attacks = json::array();
    for (const auto& at : cfg.attacks) {
      json aj;
      aj["kind"] = at.kind;
      aj["start"] = at.start;
      aj["stop"] = at.stop;
      if (at.kind == "sybil") {
        aj["count"] = at.count;
        aj["routes"] = at.routes;
        json gj;
        gj["kind"] = at.generator.kind;
        gj["x0"] = at.generator.x0;
        gj["v0"] = at.generator.v0;
        gj["stop_before"] = at.generator.stop_before;
        gj["stall_claim_speed"] = at.generator.stall_claim_speed;
        if (!at.generator.script.empty()) {
          json s = json::array();
          for (auto& [t, u] : at.generator.script) s.push_back({t, u});
          gj["script"] = s;
        }
        aj["generator"] = gj;
      } else {
        aj["targets"] = at.targets;
        aj["direction"] = at.direction;
        aj["bias"] = at.bias;
        aj["stealthy"] = at.stealthy;
      }
      attacks.push_back(aj);
    }
    j["attacks"] = attacks;
  }

  json m;
  m["enabled"] = cfg.mitigation.enabled;
  if (cfg.mitigation.force_fp_vehicle) {
    m["force_fp_vehicle"] = *cfg.mitigation.force_fp_vehicle;
    m["force_fp_time"] = cfg.mitigation.force_fp_time;
  }
  m["max_sybil"] = cfg.mitigation.max_sybil;
  j["mitigation"] = m;

  j["reference"] = {{"mode", cfg.reference.mode},
                    {"a", cfg.reference.a},
                    {"b", cfg.reference.b}};
  j["fuel"] = {{"omega", cfg.fuel.omega},
               {"accel", cfg.fuel.accel},
               {"accel_only_positive", cfg.fuel.accel_only_positive}};
  j["toggles"] = {{"trust_aware", cfg.toggles.trust_aware},
                  {"robust", cfg.toggles.robust}};
  return j;
}

LoadResult load_scenario_text(const std::string& text) {
  LoadResult out;
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    out.errors.push_back("invalid JSON");
    return out;
  }
  out.errors = scenario_from_json(j, out.config);
  if (out.errors.empty()) {
    auto verrs = validate_scenario(out.config);
    out.errors.insert(out.errors.end(), verrs.begin(), verrs.end());
  }
  return out;
}

LoadResult load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    LoadResult out;
    out.errors.push_back("cannot open " + path);
    return out;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario_text(ss.str());
}

}  // namespace cavsim
