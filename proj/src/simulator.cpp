#include "guide/simulator.hpp"

#include <stdexcept>

#include "guide/planner.hpp"

namespace guide {

SimWorld::SimWorld(TopoMap map, Pose start, std::vector<WorldObject> objects, std::vector<FaultSpec> faults,
                   std::uint64_t seed, std::map<NodeId, NodeId> appearance)
    : map_(std::move(map)),
      pose_(std::move(start)),
      objects_(std::move(objects)),
      appearance_(std::move(appearance)),
      rng_(seed) {
  if (!map_.has_node(pose_.node)) throw std::invalid_argument("start node not in map: " + pose_.node.str());
  for (const auto& o : objects_) {
    if (!map_.find_edge(o.at_edge.first, o.at_edge.second)) {
      throw std::invalid_argument("object " + o.label + " placed on a missing edge");
    }
  }
  for (const auto& f : faults) {
    if (const auto* k = std::get_if<Kidnap>(&f)) {
      if (!map_.has_node(k->teleport_to)) throw std::invalid_argument("kidnap target not in map");
      if (k->trigger_leg < 1) throw std::invalid_argument("kidnap trigger_leg must be >= 1");
      kidnaps_.push_back(*k);
    } else {
      const double s = std::get<NoiseSigma>(f).sigma;
      if (!(s >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
      sigma_ = s;
    }
  }
  for (const auto& [from, to] : appearance_) {
    if (!map_.has_node(from) || !map_.has_node(to)) throw std::invalid_argument("appearance alias names a missing node");
  }
}

MoveResult SimWorld::execute(const MoveCommand& command) {
  const Heading heading = apply_turn(pose_.heading, command.turn);
  const Edge* edge = map_.edge_towards(pose_.node, heading);
  if (edge == nullptr) {
    return {MoveBlocked{"no edge at " + pose_.node.str() + " toward " + std::to_string(heading.degrees())}, 0.0,
            false};
  }
  if (edge->blocked) return {MoveBlocked{"edge " + edge->from.str() + "->" + edge->to.str() + " is blocked"}, 0.0, false};

  const double speed = command.speed_mps > 0.0 ? command.speed_mps : 1.0;
  const double duration = edge->distance / speed;
  pose_ = Pose{edge->to, heading};
  odometer_ += edge->distance;
  clock_s_ += duration;
  ++legs_;

  MoveResult result{ArrivalReport{edge->distance}, duration, false};
  for (const auto& k : kidnaps_) {
    if (k.trigger_leg == legs_) {
      pose_ = Pose{k.teleport_to, k.new_heading};
      kidnap_fired_ = true;
      result.kidnapped = true;
    }
  }
  return result;
}

std::vector<VisibleObject> SimWorld::visible_objects() const {
  std::vector<VisibleObject> out;
  for (const auto& o : objects_) {
    if (o.at_edge.first != pose_.node) continue;
    const Edge* e = map_.find_edge(o.at_edge.first, o.at_edge.second);
    out.push_back(VisibleObject{o.label, e->direction});
  }
  return out;
}

Observation SimWorld::observe() {
  const auto alias = appearance_.find(pose_.node);
  const NodeId& look = alias == appearance_.end() ? pose_.node : alias->second;
  Observation obs;
  obs.embedding = stub_embed(place_descriptor(look, pose_.heading), sigma_, rng_());
  obs.objects = visible_objects();
  return obs;
}

VectorStore build_environment_store(const TopoMap& map, double sigma, std::uint64_t seed, std::size_t dim) {
  VectorStore store(StoreKind::kEnvironment, dim);
  for (const auto& [id, node] : map.nodes()) {
    for (int deg : {0, 90, 180, 270}) {
      const Heading h = Heading::from_degrees(deg);
      EmbeddingRecord rec;
      rec.id = "env:" + id.str() + "/" + std::to_string(deg);
      rec.embedding = stub_embed(place_descriptor(id, h), sigma, seed, dim);
      rec.meta = RecordMeta{id, h, StoreKind::kEnvironment, "generated"};
      store.insert(std::move(rec));
    }
  }
  return store;
}

}  // namespace guide
