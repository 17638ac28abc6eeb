#include "cavsim/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace cavsim {

namespace {

struct Vec2 {
  double x = 0.0, y = 0.0;
};

struct Polyline {
  std::vector<Vec2> pts;      // vertices
  std::vector<double> cum;    // cumulative arc length at each vertex

  void finish() {
    cum.assign(pts.size(), 0.0);
    for (size_t i = 1; i < pts.size(); ++i)
      cum[i] = cum[i - 1] + std::hypot(pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
  }
  double length() const { return cum.empty() ? 0.0 : cum.back(); }
};

// Proper segment intersection; tangential touches are ignored on purpose so
// that a turn joining a lane does not register as a crossing.
bool segment_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d, double& s, double& t) {
  double rx = b.x - a.x, ry = b.y - a.y;
  double qx = d.x - c.x, qy = d.y - c.y;
  double denom = rx * qy - ry * qx;
  if (std::abs(denom) < 1e-12) return false;
  double cx = c.x - a.x, cy = c.y - a.y;
  s = (cx * qy - cy * qx) / denom;
  t = (cx * ry - cy * rx) / denom;
  const double eps = 1e-9;
  return s > eps && s < 1.0 - eps && t > eps && t < 1.0 - eps;
}

struct LaidRoute {
  RouteSpec spec;
  Polyline line;
};

constexpr double kBox = 12.0;       // intersection box half-size (m)
constexpr double kInner = 1.75;     // inner lane offset (m)
constexpr double kOuter = 5.25;     // outer lane offset (m)

Vec2 rot(Vec2 p, int quarter) {
  switch (((quarter % 4) + 4) % 4) {
    case 0: return p;
    case 1: return {-p.y, p.x};
    case 2: return {-p.x, -p.y};
    default: return {p.y, -p.x};
  }
}

void append_arc(Polyline& pl, Vec2 center, double radius, double a0, double a1) {
  const int steps = 48;
  for (int i = 1; i <= steps; ++i) {
    double a = a0 + (a1 - a0) * double(i) / steps;
    pl.pts.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
}

// Lays out the four-approach, two-lanes-per-approach intersection.  Quarter 0
// is the approach from the west heading east; the rest are rotations of it.
std::vector<LaidRoute> layout_fig1(double length) {
  double approach = (length - 2.0 * kBox) / 2.0;
  if (approach <= 0.0) throw std::invalid_argument("geometry length too small for preset");
  double start = -(kBox + approach);
  double end = kBox + approach;

  // Quarter q rotates the westbound template counterclockwise q times.
  const char* approach_name[4] = {"W", "S", "E", "N"};
  const char* straight_exit[4] = {"E", "N", "W", "S"};
  const char* right_exit[4] = {"S", "E", "N", "W"};
  const char* left_exit[4] = {"N", "W", "S", "E"};

  std::vector<LaidRoute> out;
  for (int q = 0; q < 4; ++q) {
    std::string road = approach_name[q];
    auto make = [&](const std::string& lane_letter, const std::string& movement,
                    Polyline pl, const std::string& exit_lane) {
      LaidRoute lr;
      lr.spec.id = road + "." + lane_letter + "." + movement;
      lr.spec.entry_lane = road + "." + lane_letter;
      lr.spec.exit_lane = exit_lane;
      for (auto& p : pl.pts) p = rot(p, q);
      pl.finish();
      lr.line = std::move(pl);
      lr.spec.length = lr.line.length();
      out.push_back(std::move(lr));
    };

    // Straight, outer lane (rightmost): y = -kOuter.
    {
      Polyline pl;
      pl.pts = {{start, -kOuter}, {-kBox, -kOuter}, {kBox, -kOuter}, {end, -kOuter}};
      make("R", "S", pl, "out." + std::string(straight_exit[q]) + ".R");
    }
    // Straight, inner lane (leftmost): y = -kInner.
    {
      Polyline pl;
      pl.pts = {{start, -kInner}, {-kBox, -kInner}, {kBox, -kInner}, {end, -kInner}};
      make("L", "S", pl, "out." + std::string(straight_exit[q]) + ".L");
    }
    // Right turn from the outer lane: quarter arc in the near corner.
    {
      Polyline pl;
      pl.pts = {{start, -kOuter}, {-kBox, -kOuter}};
      append_arc(pl, {-kBox, -kBox}, kBox - kOuter, M_PI / 2.0, 0.0);
      pl.pts.push_back({-kOuter, -(kBox + approach)});
      make("R", "R", pl, "out." + std::string(right_exit[q]) + ".R");
    }
    // Left turn from the inner lane: wide quarter arc through the box.
    {
      Polyline pl;
      pl.pts = {{start, -kInner}, {-kBox, -kInner}};
      append_arc(pl, {-kBox, kBox}, kBox + kInner, -M_PI / 2.0, 0.0);
      pl.pts.push_back({kInner, kBox + approach});
      make("L", "L", pl, "out." + std::string(left_exit[q]) + ".L");
    }
  }
  return out;
}

double arc_pos_in_box(const Polyline& pl, bool entering) {
  // Arc length at which the polyline crosses the box boundary.  The layout
  // places explicit vertices on the boundary, so the crossing vertex is exact.
  auto inside = [](const Vec2& p) {
    return std::max(std::abs(p.x), std::abs(p.y)) <= kBox + 1e-9;
  };
  for (size_t i = 1; i < pl.pts.size(); ++i) {
    bool prev_in = inside(pl.pts[i - 1]);
    bool cur_in = inside(pl.pts[i]);
    if (entering && !prev_in && cur_in) return pl.cum[i];
    if (!entering && prev_in && !cur_in) return pl.cum[i - 1];
  }
  return entering ? pl.length() : 0.0;
}

std::vector<RouteGeometry> resolve_crossings(std::vector<LaidRoute>& laid) {
  struct Crossing {
    double x, y;
    std::vector<std::pair<size_t, double>> hits;  // (route idx, arc pos)
  };
  std::vector<Crossing> crossings;

  auto arc_at = [](const Polyline& pl, size_t seg, double s) {
    double seg_len = pl.cum[seg + 1] - pl.cum[seg];
    return pl.cum[seg] + s * seg_len;
  };

  for (size_t i = 0; i < laid.size(); ++i) {
    for (size_t j = i + 1; j < laid.size(); ++j) {
      if (laid[i].spec.entry_lane == laid[j].spec.entry_lane) continue;
      if (laid[i].spec.exit_lane == laid[j].spec.exit_lane) continue;
      const Polyline& a = laid[i].line;
      const Polyline& b = laid[j].line;
      for (size_t sa = 0; sa + 1 < a.pts.size(); ++sa) {
        for (size_t sb = 0; sb + 1 < b.pts.size(); ++sb) {
          double s, t;
          if (!segment_cross(a.pts[sa], a.pts[sa + 1], b.pts[sb], b.pts[sb + 1], s, t))
            continue;
          double px = a.pts[sa].x + s * (a.pts[sa + 1].x - a.pts[sa].x);
          double py = a.pts[sa].y + s * (a.pts[sa + 1].y - a.pts[sa].y);
          if (std::max(std::abs(px), std::abs(py)) > kBox + 1.0) continue;
          Crossing* self = nullptr;
          for (auto& c : crossings)
            if (std::hypot(c.x - px, c.y - py) < 0.75) { self = &c; break; }
          if (!self) {
            crossings.push_back({px, py, {}});
            self = &crossings.back();
          }
          self->hits.emplace_back(i, arc_at(a, sa, s));
          self->hits.emplace_back(j, arc_at(b, sb, t));
        }
      }
    }
  }

  // Canonical mp ids: sorted by rounded location so the preset is stable.
  std::sort(crossings.begin(), crossings.end(), [](const Crossing& a, const Crossing& b) {
    double ax = std::round(a.x * 100.0), ay = std::round(a.y * 100.0);
    double bx = std::round(b.x * 100.0), by = std::round(b.y * 100.0);
    return ax != bx ? ax < bx : ay < by;
  });

  std::vector<RouteGeometry> routes(laid.size());
  for (size_t i = 0; i < laid.size(); ++i) {
    routes[i].id = laid[i].spec.id;
    routes[i].entry_lane = laid[i].spec.entry_lane;
    routes[i].exit_lane = laid[i].spec.exit_lane;
    routes[i].length = laid[i].spec.length;
    routes[i].fork_pos = arc_pos_in_box(laid[i].line, true);
    routes[i].join_pos = arc_pos_in_box(laid[i].line, false);
  }
  for (size_t mp = 0; mp < crossings.size(); ++mp) {
    for (auto& [ri, pos] : crossings[mp].hits) {
      auto& mps = routes[ri].merging_points;
      bool dup = false;
      for (auto& [id, p] : mps)
        if (id == int(mp)) { dup = true; break; }
      if (!dup) mps.emplace_back(int(mp), pos);
    }
  }

  // Routes converging into a shared exit lane meet at the junction; that is a
  // merging point too, guarding the approach until rear-end geometry takes
  // over on the exit segment.
  int next_mp = int(crossings.size());
  std::map<std::string, std::vector<size_t>> by_exit;
  for (size_t i = 0; i < routes.size(); ++i) by_exit[routes[i].exit_lane].push_back(i);
  for (auto& [lane, members] : by_exit) {
    if (members.size() < 2) continue;
    int mp = next_mp++;
    for (size_t ri : members) routes[ri].merging_points.emplace_back(mp, routes[ri].join_pos);
  }

  for (auto& r : routes)
    std::sort(r.merging_points.begin(), r.merging_points.end(),
              [](auto& a, auto& b) { return a.second < b.second; });
  return routes;
}

}  // namespace

IntersectionGeometry IntersectionGeometry::from_routes(std::vector<RouteGeometry> routes,
                                                       double reschedule_zone) {
  IntersectionGeometry g;
  g.reschedule_zone_ = reschedule_zone;
  for (auto& r : routes) {
    for (const auto& [mp, pos] : r.merging_points)
      g.conflicts_.crossings[mp].emplace_back(r.id, pos);
    g.routes_.emplace(r.id, std::move(r));
  }
  return g;
}

IntersectionGeometry IntersectionGeometry::preset(const std::string& name, double length,
                                                  double reschedule_zone) {
  if (name == "single-merge") {
    RouteGeometry a;
    a.id = "A";
    a.entry_lane = "in.A";
    a.exit_lane = "out.M";
    a.length = length;
    a.fork_pos = length / 2.0;
    a.join_pos = length / 2.0;
    a.merging_points = {{0, length / 2.0}};
    RouteGeometry b = a;
    b.id = "B";
    b.entry_lane = "in.B";
    return from_routes({a, b}, reschedule_zone);
  }
  if (name == "fig1-intersection") {
    auto laid = layout_fig1(length);
    return from_routes(resolve_crossings(laid), reschedule_zone);
  }
  throw std::invalid_argument("unknown geometry preset " + name);
}

const RouteGeometry& IntersectionGeometry::route(const std::string& id) const {
  auto it = routes_.find(id);
  if (it == routes_.end()) throw std::invalid_argument("unknown route " + id);
  return it->second;
}

std::vector<std::string> IntersectionGeometry::route_ids() const {
  std::vector<std::string> ids;
  ids.reserve(routes_.size());
  for (const auto& [id, r] : routes_) ids.push_back(id);
  return ids;
}

double distance_to_mp(const RouteGeometry& route, double x, int mp_id) {
  auto pos = route.mp_position(mp_id);
  if (!pos) throw std::invalid_argument("merging point " + std::to_string(mp_id) +
                                        " is not on route " + route.id);
  return *pos - x;
}

std::vector<int> conflict_pairs(const RouteGeometry& route_i, const RouteGeometry& route_j,
                                const ConflictMap& map) {
  std::vector<int> shared;
  for (const auto& [mp, pos] : route_i.merging_points) {
    auto it = map.crossings.find(mp);
    if (it == map.crossings.end()) continue;
    for (const auto& [rid, rpos] : it->second) {
      if (rid == route_j.id) {
        shared.push_back(mp);
        break;
      }
    }
  }
  return shared;
}

bool in_rescheduling_zone(const RouteGeometry&, double x, double l1) { return x < l1; }

LaneRelation lane_relation(const RouteGeometry& a, double xa, const RouteGeometry& b,
                           double xb) {
  if (a.id == b.id) return LaneRelation::SameRoute;
  if (a.entry_lane == b.entry_lane && xa < a.fork_pos && xb < b.fork_pos)
    return LaneRelation::SharedEntry;
  if (a.exit_lane == b.exit_lane) {
    // Rear-end geometry takes over as soon as the leading vehicle commits to
    // the shared exit lane; the follower's remaining path funnels into it.
    double rem_a = a.length - xa, rem_b = b.length - xb;
    bool leader_committed = rem_a <= rem_b ? xa >= a.join_pos : xb >= b.join_pos;
    if (leader_committed) return LaneRelation::SharedExit;
  }
  return LaneRelation::None;
}

double rear_gap_offset(const RouteGeometry& self, const RouteGeometry& peer,
                       LaneRelation rel) {
  switch (rel) {
    case LaneRelation::SameRoute:
    case LaneRelation::SharedEntry:
      return 0.0;
    case LaneRelation::SharedExit:
      // Compare remaining distance to the exit: gap = remaining_self - remaining_peer.
      return self.length - peer.length;
    case LaneRelation::None:
      break;
  }
  throw std::invalid_argument("no rear-end relation between " + self.id + " and " + peer.id);
}

IntersectionGeometry build_geometry(const GeometryConfig& cfg) {
  if (!cfg.preset.empty())
    return IntersectionGeometry::preset(cfg.preset, cfg.length, cfg.reschedule_zone);
  std::vector<RouteGeometry> routes;
  for (const auto& rs : cfg.custom_routes) {
    RouteGeometry r;
    r.id = rs.id;
    r.entry_lane = rs.entry_lane;
    r.exit_lane = rs.exit_lane;
    r.length = rs.length;
    r.fork_pos = rs.fork_pos;
    r.join_pos = rs.join_pos;
    r.merging_points = rs.merging_points;
    routes.push_back(std::move(r));
  }
  return IntersectionGeometry::from_routes(std::move(routes), cfg.reschedule_zone);
}

}  // namespace cavsim
