#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace guide {

/// Identifier of a map node: a non-empty token of letters, digits, '_' and '-'.
class NodeId {
 public:
  NodeId() = default;
  explicit NodeId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  auto operator<=>(const NodeId&) const = default;
  bool operator==(const NodeId&) const = default;

  static bool is_valid_token(std::string_view s);

 private:
  std::string value_;
};

inline std::ostream& operator<<(std::ostream& os, const NodeId& id) { return os << id.str(); }

/// Absolute heading quantized to right angles. 0 is +x, counterclockwise positive.
class Heading {
 public:
  constexpr Heading() = default;

  /// Throws std::invalid_argument unless degrees is one of 0, 90, 180, 270.
  static Heading from_degrees(int degrees);
  static bool is_quantized(int degrees) {
    return degrees == 0 || degrees == 90 || degrees == 180 || degrees == 270;
  }

  constexpr int degrees() const { return degrees_; }
  /// Heading rotated counterclockwise by a multiple of 90 degrees.
  Heading rotated(int delta_degrees) const;
  Heading reversed() const { return rotated(180); }

  auto operator<=>(const Heading&) const = default;

 private:
  constexpr explicit Heading(int d) : degrees_(d) {}
  int degrees_ = 0;
};

struct Coordinate {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Coordinate&) const = default;
};

struct Node {
  NodeId id;
  Coordinate position;
  std::set<std::string> tags;
  std::optional<std::string> label;

  /// Label when present, otherwise the id.
  const std::string& display_name() const { return label ? *label : id.str(); }
  bool operator==(const Node&) const = default;
};

struct Edge {
  NodeId from;
  NodeId to;
  double distance = 0.0;
  Heading direction;
  std::set<std::string> tags;
  bool blocked = false;

  bool operator==(const Edge&) const = default;
};

using EdgeKey = std::pair<NodeId, NodeId>;

/// Syntax or semantic error in map text, with 1-based position.
class MapParseError : public std::runtime_error {
 public:
  MapParseError(int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Lookup of a node or edge that is not in the map.
class MapLookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Directed weighted graph with planar node coordinates.
///
/// Nodes and edges live in ordered containers so every traversal is in id order;
/// planner tie-breaking depends on that.
class TopoMap {
 public:
  std::string name = "map";

  const std::map<NodeId, Node>& nodes() const { return nodes_; }
  const std::map<EdgeKey, Edge>& edges() const { return edges_; }

  bool has_node(const NodeId& id) const { return nodes_.contains(id); }
  const Node& node(const NodeId& id) const;
  const Edge* find_edge(const NodeId& from, const NodeId& to) const;

  /// Throws std::invalid_argument on a duplicate id.
  void add_node(Node node);
  /// Throws std::invalid_argument on unknown endpoints, non-positive distance or duplicate pair.
  void add_edge(Edge edge);

  /// Outgoing edges of `id`, sorted by target id.
  std::vector<Edge> neighbors(const NodeId& id) const;
  /// Edge leaving `from` with the given absolute direction, if any.
  const Edge* edge_towards(const NodeId& from, Heading direction) const;

  /// Sets the runtime blocked flag on from->to and on to->from when present.
  void set_blocked(const NodeId& from, const NodeId& to, bool blocked);

  bool operator==(const TopoMap&) const = default;

 private:
  std::map<NodeId, Node> nodes_;
  std::map<EdgeKey, Edge> edges_;
};

TopoMap parse_map(std::string_view text);
TopoMap load_map_file(const std::string& path);
std::string serialize_map(const TopoMap& map);

/// Copy of `map` with the blocked overlay changed for one edge (and its reverse).
TopoMap set_edge_blocked(const TopoMap& map, const NodeId& from, const NodeId& to, bool blocked);

std::vector<Edge> neighbors(const TopoMap& map, const NodeId& node);

struct Violation {
  enum class Kind { kPositionMismatch, kMissingReverse };
  Kind kind = Kind::kPositionMismatch;
  EdgeKey edge;
  /// Euclidean residual |p_to - (p_from + d (cos, sin))|; zero for warnings.
  double residual = 0.0;
  std::string message;
};

/// One kPositionMismatch per edge whose endpoint disagrees with its distance and
/// direction by more than rel_tol * max(distance, 1). Empty means consistent.
std::vector<Violation> validate_geometry(const TopoMap& map, double rel_tol = 1e-6);

/// Advisory kMissingReverse entries for one-way edges. Never makes a map invalid.
std::vector<Violation> reverse_edge_warnings(const TopoMap& map);

/// Unit displacement (cos, sin) of a quantized heading, exact.
Coordinate unit_step(Heading heading);

/// Shortest decimal text that round-trips to `value`.
std::string format_real(double value);

}  // namespace guide

template <>
struct std::hash<guide::NodeId> {
  std::size_t operator()(const guide::NodeId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
