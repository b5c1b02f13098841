#include "guide/messages.hpp"

#include <sstream>

namespace guide {

std::vector<std::string> Observation::object_labels() const {
  std::vector<std::string> labels;
  labels.reserve(objects.size());
  for (const auto& o : objects) labels.push_back(o.label);
  return labels;
}

namespace {

std::string join_nodes(const Route& r) {
  std::string s;
  for (const auto& n : r.node_sequence()) {
    if (!s.empty()) s += ">";
    s += n.str();
  }
  return s;
}

struct EventText {
  std::string operator()(const UserUtterance& e) const { return "user: " + e.text; }
  std::string operator()(const UserIntent& e) const { return "intent: " + std::string(to_string(e.intent.kind)); }
  std::string operator()(const ArrivalReport& e) const {
    return "arrival_report odometry=" + format_real(e.odometry_distance);
  }
  std::string operator()(const Observation& e) const {
    std::string s = "observation objects=[";
    for (std::size_t i = 0; i < e.objects.size(); ++i) {
      if (i) s += ",";
      s += e.objects[i].label + "@" + std::to_string(e.objects[i].direction.degrees());
    }
    return s + "]";
  }
  std::string operator()(const UserDecision& e) const {
    return "decision prompt=" + std::to_string(e.prompt_id) + " choice=" + std::string(to_string(e.choice));
  }
  std::string operator()(const MoveBlocked& e) const { return "move_blocked " + e.reason; }
};

struct OutputText {
  std::string operator()(const Say& o) const { return "say: " + o.text; }
  std::string operator()(const MoveCommand& o) const {
    return "move turn=" + std::string(to_string(o.turn)) + " distance=" + format_real(o.distance) +
           " speed=" + format_real(o.speed_mps);
  }
  std::string operator()(const QueryImages& o) const {
    std::string s = "query_images store=" + std::string(to_string(o.store));
    if (o.node) s += " node=" + o.node->str();
    if (o.orientation) s += " dir=" + std::to_string(o.orientation->degrees());
    return s;
  }
  std::string operator()(const HazardPrompt& o) const {
    std::string s = "hazard_prompt id=" + std::to_string(o.prompt_id) + " edge=" + o.edge.first.str() + "->" +
                    o.edge.second.str() + " reason=" + o.verdict.reason;
    s += " alternative=" + (o.alternative ? join_nodes(*o.alternative) : std::string("none"));
    return s;
  }
  std::string operator()(const SessionResult& o) const {
    return std::string("result ") + (o.success ? "success" : "failure") + " " + o.reason;
  }
};

}  // namespace

std::string describe(const AgentEvent& event) { return std::visit(EventText{}, event); }
std::string describe(const AgentOutput& output) { return std::visit(OutputText{}, output); }

}  // namespace guide
