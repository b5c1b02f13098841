#include "guide/planner.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>

namespace guide {

namespace {

// Dense view of the map: index order equals node-id order, so comparing index
// sequences lexicographically is the same as comparing id sequences.
struct DenseGraph {
  std::vector<NodeId> ids;
  std::vector<const Node*> nodes;
  struct Arc {
    int to;
    const Edge* edge;
  };
  std::vector<std::vector<Arc>> out;

  explicit DenseGraph(const TopoMap& map) {
    std::map<NodeId, int> index;
    for (const auto& [id, node] : map.nodes()) {
      index.emplace(id, static_cast<int>(ids.size()));
      ids.push_back(id);
      nodes.push_back(&node);
    }
    out.resize(ids.size());
    for (const auto& [key, edge] : map.edges()) {
      out[index.at(edge.from)].push_back({index.at(edge.to), &edge});
    }
  }

  int index_of(const NodeId& id) const {
    auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) throw MapLookupError("unknown node '" + id.str() + "'");
    return static_cast<int>(it - ids.begin());
  }
};

struct Path {
  double cost = 0.0;
  std::vector<int> nodes;
};

bool path_less(const Path& a, const Path& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  return a.nodes < b.nodes;
}

struct Exclusions {
  std::vector<bool> nodes;                 // excluded node indices
  std::set<std::pair<int, int>> arcs;      // excluded (from, to)
};

// Dijkstra over full-path labels. With strictly positive weights every
// equal-cost predecessor of v is settled before v, so the label of v is final
// (minimum cost, then lexicographically smallest sequence) when popped.
std::optional<Path> shortest(const DenseGraph& g, int source, int target,
                             const PlanConstraints& constraints, const Exclusions* excl) {
  const std::size_t n = g.ids.size();
  std::vector<std::optional<Path>> best(n);
  std::vector<bool> settled(n, false);
  auto cmp = [](const Path& a, const Path& b) { return path_less(b, a); };
  std::priority_queue<Path, std::vector<Path>, decltype(cmp)> pq(cmp);

  best[source] = Path{0.0, {source}};
  pq.push(*best[source]);
  while (!pq.empty()) {
    Path cur = pq.top();
    pq.pop();
    const int u = cur.nodes.back();
    if (settled[u]) continue;
    if (best[u]->cost != cur.cost || best[u]->nodes != cur.nodes) continue;
    settled[u] = true;
    if (u == target) return cur;
    for (const auto& arc : g.out[u]) {
      const int v = arc.to;
      if (settled[v]) continue;
      if (excl && (excl->nodes[v] || excl->arcs.contains({u, v}))) continue;
      if (!edge_allowed(*arc.edge, constraints)) continue;
      if (!node_allowed(*g.nodes[v], constraints)) continue;
      Path next{cur.cost + arc.edge->distance, cur.nodes};
      next.nodes.push_back(v);
      if (!best[v] || path_less(next, *best[v])) {
        best[v] = next;
        pq.push(std::move(next));
      }
    }
  }
  return std::nullopt;
}

double path_cost(const DenseGraph& g, const std::vector<int>& nodes) {
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    for (const auto& arc : g.out[nodes[i]]) {
      if (arc.to == nodes[i + 1]) {
        c += arc.edge->distance;
        break;
      }
    }
  }
  return c;
}

std::vector<NodeId> to_ids(const DenseGraph& g, const std::vector<int>& nodes) {
  std::vector<NodeId> out;
  out.reserve(nodes.size());
  for (int i : nodes) out.push_back(g.ids[i]);
  return out;
}

[[noreturn]] void throw_unreachable(const DenseGraph& g, int s, int t) {
  PlanConstraints lifted;
  lifted.avoid_blocked = false;
  const auto& from = g.ids[s].str();
  const auto& to = g.ids[t].str();
  if (shortest(g, s, t, lifted, nullptr)) {
    throw UnreachableError(UnreachableError::Reason::kConstraintsOnly,
                           "no route from " + from + " to " + to +
                               " satisfies the current constraints");
  }
  throw UnreachableError(UnreachableError::Reason::kNoPath,
                         "no route exists from " + from + " to " + to);
}

}  // namespace

std::string_view to_string(TurnKind kind) {
  switch (kind) {
    case TurnKind::kStraight: return "straight";
    case TurnKind::kLeft: return "left";
    case TurnKind::kRight: return "right";
    case TurnKind::kTurnAround: return "turn_around";
  }
  return "straight";
}

TurnKind turn_kind_from_string(std::string_view s) {
  if (s == "straight") return TurnKind::kStraight;
  if (s == "left") return TurnKind::kLeft;
  if (s == "right") return TurnKind::kRight;
  if (s == "turn_around") return TurnKind::kTurnAround;
  throw std::invalid_argument("unknown turn '" + std::string(s) + "'");
}

bool node_allowed(const Node& node, const PlanConstraints& constraints) {
  for (const auto& t : node.tags) {
    if (constraints.avoid_tags.contains(t)) return false;
  }
  return true;
}

bool edge_allowed(const Edge& edge, const PlanConstraints& constraints) {
  if (constraints.avoid_blocked && edge.blocked) return false;
  for (const auto& t : edge.tags) {
    if (constraints.avoid_tags.contains(t)) return false;
  }
  return true;
}

std::vector<NodeId> Route::node_sequence() const {
  std::vector<NodeId> out{start};
  for (const auto& leg : legs) out.push_back(leg.to);
  return out;
}

TurnKind relative_turn(Heading heading, Heading edge_direction) {
  const int r = ((edge_direction.degrees() - heading.degrees()) % 360 + 360) % 360;
  switch (r) {
    case 0: return TurnKind::kStraight;
    case 90: return TurnKind::kLeft;
    case 180: return TurnKind::kTurnAround;
    default: return TurnKind::kRight;
  }
}

TurnKind relative_turn(int heading_degrees, int edge_direction_degrees) {
  return relative_turn(Heading::from_degrees(heading_degrees),
                       Heading::from_degrees(edge_direction_degrees));
}

Heading apply_turn(Heading heading, TurnKind turn) {
  switch (turn) {
    case TurnKind::kStraight: return heading;
    case TurnKind::kLeft: return heading.rotated(90);
    case TurnKind::kRight: return heading.rotated(270);
    case TurnKind::kTurnAround: return heading.rotated(180);
  }
  return heading;
}

std::string describe_route(const Route& route) {
  if (route.legs.empty()) {
    return "You are already at " + (route.goal_name.empty() ? route.goal.str() : route.goal_name) +
           ".";
  }
  std::string out;
  for (std::size_t i = 0; i < route.legs.size(); ++i) {
    const auto& leg = route.legs[i];
    const std::string_view kind = leg.turn == TurnKind::kTurnAround ? "around" : to_string(leg.turn);
    if (i) out += '\n';
    out += "Leg " + std::to_string(i + 1) + ": turn " + std::string(kind) + ", walk " +
           format_real(leg.distance) + " m to " + leg.to_name + ".";
  }
  return out;
}

Route route_from_nodes(const TopoMap& map, const std::vector<NodeId>& nodes, Heading initial_heading) {
  if (nodes.empty()) throw std::invalid_argument("route needs at least one node");
  Route route;
  route.start = nodes.front();
  route.goal = nodes.back();
  route.goal_name = map.node(route.goal).display_name();
  route.initial_heading = initial_heading;
  Heading heading = initial_heading;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const Edge* e = map.find_edge(nodes[i], nodes[i + 1]);
    if (!e) throw MapLookupError("no edge " + nodes[i].str() + "->" + nodes[i + 1].str());
    RouteLeg leg;
    leg.turn = relative_turn(heading, e->direction);
    leg.edge = *e;
    leg.distance = e->distance;
    leg.to = e->to;
    leg.to_name = map.node(e->to).display_name();
    leg.absolute_direction = e->direction;
    route.total_distance += e->distance;
    route.legs.push_back(std::move(leg));
    heading = e->direction;
  }
  route.description = describe_route(route);
  return route;
}

Route plan_route(const TopoMap& map, const NodeId& start, const NodeId& goal, Heading initial_heading,
                 const PlanConstraints& constraints) {
  const DenseGraph g(map);
  const int s = g.index_of(start);
  const int t = g.index_of(goal);
  if (s == t) return route_from_nodes(map, {start}, initial_heading);
  auto path = shortest(g, s, t, constraints, nullptr);
  if (!path) throw_unreachable(g, s, t);
  return route_from_nodes(map, to_ids(g, path->nodes), initial_heading);
}

std::vector<Route> k_alternative_routes(const TopoMap& map, const NodeId& start, const NodeId& goal,
                                        int k, const PlanConstraints& constraints,
                                        Heading initial_heading) {
  if (k < 1) throw std::invalid_argument("k must be at least 1");
  const DenseGraph g(map);
  const int s = g.index_of(start);
  const int t = g.index_of(goal);
  if (s == t) return {route_from_nodes(map, {start}, initial_heading)};

  auto first = shortest(g, s, t, constraints, nullptr);
  if (!first) throw_unreachable(g, s, t);

  std::vector<Path> accepted{*first};
  std::vector<Path> candidates;
  auto known = [&](const std::vector<int>& nodes) {
    auto same = [&](const Path& p) { return p.nodes == nodes; };
    return std::any_of(accepted.begin(), accepted.end(), same) ||
           std::any_of(candidates.begin(), candidates.end(), same);
  };

  while (static_cast<int>(accepted.size()) < k) {
    const std::vector<int> prev = accepted.back().nodes;
    for (std::size_t i = 0; i + 1 < prev.size(); ++i) {
      const int spur = prev[i];
      const std::vector<int> root(prev.begin(), prev.begin() + static_cast<long>(i) + 1);
      Exclusions excl;
      excl.nodes.assign(g.ids.size(), false);
      for (std::size_t j = 0; j < i; ++j) excl.nodes[root[j]] = true;
      for (const auto& p : accepted) {
        if (p.nodes.size() > i + 1 && std::equal(root.begin(), root.end(), p.nodes.begin())) {
          excl.arcs.insert({p.nodes[i], p.nodes[i + 1]});
        }
      }
      auto spur_path = shortest(g, spur, t, constraints, &excl);
      if (!spur_path) continue;
      std::vector<int> total = root;
      total.insert(total.end(), spur_path->nodes.begin() + 1, spur_path->nodes.end());
      if (known(total)) continue;
      candidates.push_back(Path{path_cost(g, total), std::move(total)});
    }
    if (candidates.empty()) break;
    auto best = std::min_element(candidates.begin(), candidates.end(), path_less);
    accepted.push_back(std::move(*best));
    candidates.erase(best);
  }

  std::vector<Route> out;
  out.reserve(accepted.size());
  for (const auto& p : accepted) out.push_back(route_from_nodes(map, to_ids(g, p.nodes), initial_heading));
  return out;
}

}  // namespace guide
