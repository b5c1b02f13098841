#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "guide/topo_map.hpp"

namespace guide {

struct PlanConstraints {
  /// Nodes and edges carrying any of these tags are excluded outright.
  std::set<std::string> avoid_tags;
  bool avoid_blocked = true;
  int max_routes = 3;
};

enum class TurnKind { kStraight, kLeft, kRight, kTurnAround };

/// "straight", "left", "right", "turn_around".
std::string_view to_string(TurnKind kind);
TurnKind turn_kind_from_string(std::string_view s);

struct RouteLeg {
  TurnKind turn = TurnKind::kStraight;
  Edge edge;
  double distance = 0.0;
  NodeId to;
  /// Display name of `to` at planning time (label or id).
  std::string to_name;
  Heading absolute_direction;

  bool operator==(const RouteLeg&) const = default;
};

struct Route {
  NodeId start;
  NodeId goal;
  std::string goal_name;
  Heading initial_heading;
  std::vector<RouteLeg> legs;
  double total_distance = 0.0;
  std::string description;

  bool empty() const { return legs.empty(); }
  /// start followed by every leg target.
  std::vector<NodeId> node_sequence() const;
  bool operator==(const Route&) const = default;
};

class UnreachableError : public std::runtime_error {
 public:
  enum class Reason {
    kNoPath,           // goal unreachable even with every constraint lifted
    kConstraintsOnly,  // a path exists but uses avoided tags or blocked edges
  };
  UnreachableError(Reason reason, const std::string& what)
      : std::runtime_error(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

/// Minimum-distance route honoring `constraints`; equal-distance candidates are
/// ordered by their node-id sequence, smallest first. start == goal gives an
/// empty route. Throws MapLookupError for unknown nodes and UnreachableError.
Route plan_route(const TopoMap& map, const NodeId& start, const NodeId& goal, Heading initial_heading,
                 const PlanConstraints& constraints = {});

/// Up to k loop-free routes in nondecreasing distance, same tie order as plan_route.
/// Element 0 is plan_route's result.
std::vector<Route> k_alternative_routes(const TopoMap& map, const NodeId& start, const NodeId& goal,
                                        int k, const PlanConstraints& constraints = {},
                                        Heading initial_heading = {});

/// (edge_direction - heading) mod 360: 0 straight, 90 left, 180 turn_around, 270 right.
TurnKind relative_turn(Heading heading, Heading edge_direction);
/// Integer overload; throws std::invalid_argument on non-quantized input.
TurnKind relative_turn(int heading_degrees, int edge_direction_degrees);

/// Heading after applying `turn` to `heading`.
Heading apply_turn(Heading heading, TurnKind turn);

/// One line per leg: "Leg <n>: turn <kind>, walk <d> m to <name>.".
std::string describe_route(const Route& route);

/// Builds a Route (legs, turns, totals, description) from an explicit node sequence.
/// Throws MapLookupError when consecutive nodes are not joined by an edge.
Route route_from_nodes(const TopoMap& map, const std::vector<NodeId>& nodes, Heading initial_heading);

/// True when the node/edge is usable under `constraints` (start node tags are exempt).
bool node_allowed(const Node& node, const PlanConstraints& constraints);
bool edge_allowed(const Edge& edge, const PlanConstraints& constraints);

}  // namespace guide
