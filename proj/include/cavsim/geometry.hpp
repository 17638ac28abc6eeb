#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cavsim/model.hpp"

namespace cavsim {

// A route is a 1-D arc-length curve from its CZ entry origin to its exit.
// fork_pos ends the segment shared with other routes from the same entry lane;
// join_pos starts the segment shared with other routes into the same exit lane.
struct RouteGeometry {
  std::string id;
  std::string entry_lane;
  std::string exit_lane;
  double length = 0.0;
  double fork_pos = 0.0;
  double join_pos = 0.0;
  std::vector<std::pair<int, double>> merging_points;  // ordered by position

  std::optional<double> mp_position(int mp_id) const {
    for (const auto& [id, pos] : merging_points)
      if (id == mp_id) return pos;
    return std::nullopt;
  }
};

// For each merging point, who crosses it and where along their own routes.
struct ConflictMap {
  std::map<int, std::vector<std::pair<std::string, double>>> crossings;
};

class IntersectionGeometry {
 public:
  static IntersectionGeometry preset(const std::string& name, double length,
                                     double reschedule_zone);
  static IntersectionGeometry from_routes(std::vector<RouteGeometry> routes,
                                          double reschedule_zone);

  const RouteGeometry& route(const std::string& id) const;
  bool has_route(const std::string& id) const { return routes_.count(id) > 0; }
  const std::map<std::string, RouteGeometry>& routes() const { return routes_; }
  const ConflictMap& conflicts() const { return conflicts_; }
  double reschedule_zone() const { return reschedule_zone_; }

  std::vector<std::string> route_ids() const;

 private:
  std::map<std::string, RouteGeometry> routes_;
  ConflictMap conflicts_;
  double reschedule_zone_ = 0.0;
};

// Signed arc distance from x to the merging point: positive while the point is
// ahead, negative once passed. Throws if the point is not on the route.
double distance_to_mp(const RouteGeometry& route, double x, int mp_id);

// Shared merging points of two routes, ordered along route_i.
std::vector<int> conflict_pairs(const RouteGeometry& route_i, const RouteGeometry& route_j,
                                const ConflictMap& map);

// True iff x < L1 (boundary excluded).
bool in_rescheduling_zone(const RouteGeometry& route, double x, double l1);

// Longitudinal relations used for rear-end constraints.  Positions on two
// routes are only comparable on a shared entry segment, a shared exit segment,
// or along the very same route; merging points cover everything in between.
enum class LaneRelation { None, SameRoute, SharedEntry, SharedExit };

LaneRelation lane_relation(const RouteGeometry& a, double xa, const RouteGeometry& b,
                           double xb);

// Gap offset such that gap = x_peer - x_self + offset measures the distance
// from self to peer in a common coordinate (valid for the returned relation).
double rear_gap_offset(const RouteGeometry& self, const RouteGeometry& peer,
                       LaneRelation rel);

// Build the runtime geometry named by the scenario config.
IntersectionGeometry build_geometry(const GeometryConfig& cfg);

}  // namespace cavsim
