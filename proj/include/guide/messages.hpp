#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "guide/llm_gateway.hpp"
#include "guide/planner.hpp"
#include "guide/vector_store.hpp"

namespace guide {

/// An object the robot can see from its node, on the outgoing edge in `direction`.
struct VisibleObject {
  std::string label;
  Heading direction;
  bool operator==(const VisibleObject&) const = default;
};

// ---- inbound ----

struct UserUtterance {
  std::string text;
};
struct ArrivalReport {
  double odometry_distance = 0.0;
};
struct Observation {
  Embedding embedding;
  std::vector<VisibleObject> objects;

  std::vector<std::string> object_labels() const;
};
struct UserDecision {
  int prompt_id = 0;
  HazardChoice choice = HazardChoice::kProceed;
};
/// An already structured request (console controls), handled like an interpreted utterance.
struct UserIntent {
  Intent intent;
};
/// The low-level controller found no edge in the commanded direction.
struct MoveBlocked {
  std::string reason;
};

using AgentEvent = std::variant<UserUtterance, UserIntent, ArrivalReport, Observation, UserDecision, MoveBlocked>;

// ---- outbound ----

struct Say {
  std::string text;
};
struct MoveCommand {
  TurnKind turn = TurnKind::kStraight;
  double distance = 0.0;
  double speed_mps = 1.0;
};
/// Image lookup request. Navigational lookups name the expected place; an
/// environment lookup without a key is the broad relocalization search.
struct QueryImages {
  StoreKind store = StoreKind::kNavigational;
  std::optional<NodeId> node;
  std::optional<Heading> orientation;
};
struct HazardPrompt {
  int prompt_id = 0;
  HazardVerdict verdict;
  EdgeKey edge;
  std::optional<Route> alternative;
};
struct SessionResult {
  bool success = false;
  std::string reason;
};

using AgentOutput = std::variant<Say, MoveCommand, QueryImages, HazardPrompt, SessionResult>;

/// Single-line, deterministic renderings used for transcripts.
std::string describe(const AgentEvent& event);
std::string describe(const AgentOutput& output);

}  // namespace guide
