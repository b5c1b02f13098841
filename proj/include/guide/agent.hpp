#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "guide/llm_gateway.hpp"
#include "guide/messages.hpp"
#include "guide/planner.hpp"
#include "guide/topo_map.hpp"
#include "guide/vector_store.hpp"

namespace guide {

inline constexpr double kMinSpeedMps = 0.3;
inline constexpr double kMaxSpeedMps = 2.0;
inline constexpr double kFasterFactor = 1.25;
inline constexpr double kSlowerFactor = 0.8;
inline constexpr int kMaxRecoveryAttempts = 2;

struct SessionPrefs {
  std::set<std::string> avoid_tags;
  double speed_mps = 1.0;
  Verbosity verbosity = Verbosity::kBrief;
  /// Arrival verification passes when similarity >= this.
  double arrival_threshold = 0.85;
  /// Relocalization accepts the best environment match when similarity >= this.
  double reloc_threshold = 0.80;

  /// Throws std::invalid_argument unless thresholds are in (0, 1) and speed > 0.
  void validate() const;
  bool operator==(const SessionPrefs&) const = default;
};

enum class Phase {
  kIdle,
  kPlanning,
  kTraversing,
  kVerifying,
  kAwaitingDecision,
  kRecovering,
  kCompleted,
  kFailed,
};
std::string_view to_string(Phase phase);

struct PendingHazard {
  int prompt_id = 0;
  EdgeKey edge;
  HazardVerdict verdict;
  std::optional<Route> alternative;
};

struct AgentState {
  Phase phase = Phase::kIdle;
  std::optional<Route> route;
  std::size_t leg_index = 0;
  NodeId believed_node;
  Heading believed_heading;
  std::optional<int> pending_prompt;

  std::optional<NodeId> goal;
  SessionPrefs prefs;
  /// Expected observations for the current route.
  VectorStore navigational{StoreKind::kNavigational};
  std::optional<PendingHazard> hazard;
  /// Session-local blocked overlay (both directions are stored).
  std::set<EdgeKey> blocked_edges;
  /// Edges the user chose to walk despite a hazard prompt.
  std::set<EdgeKey> acknowledged_hazards;
  /// Objects seen from the believed node at the last accepted observation.
  std::vector<VisibleObject> visible;
  bool replan_pending = false;
  int recovery_attempts = 0;
  int next_prompt_id = 1;
  std::size_t legs_completed = 0;
  std::string failure_reason;

  /// Fresh session at a known start pose.
  static AgentState start_at(NodeId node, Heading heading, SessionPrefs prefs = {});
};

/// Checks the phase-dependent field rules; returns a description of the first
/// violation, or nullopt.
std::optional<std::string> check_invariants(const AgentState& state);

struct AgentDeps {
  const TopoMap& map;
  const VectorStore& environment;
  Gateway& gateway;
  /// Off: the raw map text goes to the gateway instead of planner output.
  bool planner_enabled = true;
};

/// The controller transition function. Never throws for well-typed input;
/// illegal events get a Say and no transition, internal failures end in kFailed.
std::pair<AgentState, std::vector<AgentOutput>> handle_event(const AgentState& state, const AgentEvent& event,
                                                             const AgentDeps& deps);

struct ArrivalCheck {
  bool arrived = false;
  double similarity = -1.0;
};

/// arrived iff cosine(expected, observation) >= threshold. A missing expected
/// record is a mismatch with similarity -1.
ArrivalCheck verify_arrival(const std::optional<EmbeddingRecord>& expected, const Embedding& observation,
                            double threshold);

/// For phase kVerifying: true iff the observation fails arrival verification
/// against the navigational record of the current leg's target.
bool detect_localization_error(const AgentState& state, const Observation& observation);

/// Top-1 environment search; on a match >= reloc threshold adopts the record's
/// pose and replans to the goal, otherwise fails with localization_lost.
std::pair<AgentState, std::vector<AgentOutput>> recover_localization(const AgentState& state,
                                                                     const Observation& observation,
                                                                     const AgentDeps& deps);

/// Blocks the current leg's edge, looks for an alternative and opens a prompt.
std::pair<AgentState, std::vector<AgentOutput>> handle_hazard(const AgentState& state, const HazardVerdict& verdict,
                                                              const AgentDeps& deps);

/// Pure preference update (speed x1.25 / x0.8, clamped to [0.3, 2.0] m/s).
/// Intents that are not preference kinds leave prefs unchanged.
SessionPrefs apply_preference(const SessionPrefs& prefs, const Intent& intent);
bool is_preference_intent(const Intent& intent);

/// Environment records for the route's (node, heading) sequence, re-labelled
/// as navigational records.
VectorStore navigational_records(const VectorStore& environment, const Route& route);

/// Map with the session's blocked overlay applied.
TopoMap effective_map(const TopoMap& base, const std::set<EdgeKey>& blocked);

}  // namespace guide
