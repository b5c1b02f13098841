#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "guide/messages.hpp"
#include "guide/rng.hpp"
#include "guide/topo_map.hpp"
#include "guide/vector_store.hpp"

namespace guide {

struct Pose {
  NodeId node;
  Heading heading;
  bool operator==(const Pose&) const = default;
};

struct WorldObject {
  std::string label;
  EdgeKey at_edge;
  bool hazard = false;
};

/// Teleport after the trigger_leg-th completed leg. Belief and odometry are untouched.
struct Kidnap {
  int trigger_leg = 1;
  NodeId teleport_to;
  Heading new_heading;
};
struct NoiseSigma {
  double sigma = 0.0;
};
using FaultSpec = std::variant<Kidnap, NoiseSigma>;

struct MoveResult {
  /// ArrivalReport on success, MoveBlocked when no edge lies in the commanded direction.
  AgentEvent event;
  double duration_s = 0.0;
  bool kidnapped = false;
};

/// Node-resolution kinematic world with a virtual clock.
class SimWorld {
 public:
  /// `appearance` lets one node look like another (aliased places): observations
  /// at a key node are rendered with the mapped node's descriptor.
  SimWorld(TopoMap map, Pose start, std::vector<WorldObject> objects, std::vector<FaultSpec> faults,
           std::uint64_t seed, std::map<NodeId, NodeId> appearance = {});

  MoveResult execute(const MoveCommand& command);
  Observation observe();

  const Pose& pose() const { return pose_; }
  const TopoMap& map() const { return map_; }
  double odometer() const { return odometer_; }
  double clock_s() const { return clock_s_; }
  int legs_completed() const { return legs_; }
  bool kidnap_fired() const { return kidnap_fired_; }
  double sigma() const { return sigma_; }
  const std::vector<WorldObject>& objects() const { return objects_; }

  /// Objects on the outgoing edges of the true node, each tagged with its edge direction.
  std::vector<VisibleObject> visible_objects() const;

 private:
  TopoMap map_;
  Pose pose_;
  std::vector<WorldObject> objects_;
  std::vector<Kidnap> kidnaps_;
  double sigma_ = 0.0;
  std::map<NodeId, NodeId> appearance_;
  Xoshiro256pp rng_;
  double odometer_ = 0.0;
  double clock_s_ = 0.0;
  int legs_ = 0;
  bool kidnap_fired_ = false;
};

/// One record per (node, heading) with id "env:<node>/<deg>", 4 per node.
VectorStore build_environment_store(const TopoMap& map, double sigma = 0.0, std::uint64_t seed = 0,
                                    std::size_t dim = kDefaultEmbeddingDim);

}  // namespace guide
