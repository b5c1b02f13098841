#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guide/planner.hpp"
#include "guide/rng.hpp"
#include "guide/topo_map.hpp"

namespace guide {

enum class IntentKind {
  kNavigateTo,
  kSetAvoidTag,
  kClearAvoidTag,
  kSetSpeed,
  kAdjustSpeed,
  kSetVerbosity,
  kHazardDecision,
  kAskStatus,
  kUnknown,
};

enum class SpeedDelta { kFaster, kSlower };
enum class HazardChoice { kProceed, kReroute };
enum class Verbosity { kBrief, kDetailed };

std::string_view to_string(IntentKind kind);
std::string_view to_string(SpeedDelta d);
std::string_view to_string(HazardChoice c);
std::string_view to_string(Verbosity v);
HazardChoice hazard_choice_from_string(std::string_view s);
Verbosity verbosity_from_string(std::string_view s);

struct Intent {
  IntentKind kind = IntentKind::kUnknown;
  /// Resolved destination; absent when `place` matched nothing.
  std::optional<NodeId> destination;
  /// Place phrase as the user said it.
  std::optional<std::string> place;
  std::optional<std::string> tag;
  std::optional<double> speed_mps;
  std::optional<SpeedDelta> delta;
  std::optional<HazardChoice> decision;
  std::optional<Verbosity> verbosity;
  /// Free text from the model for unknown intents (remote path only).
  std::optional<std::string> reply;

  static Intent navigate_to(std::optional<NodeId> node, std::string place);
  static Intent set_avoid_tag(std::string tag);
  static Intent clear_avoid_tag(std::string tag);
  static Intent set_speed(double mps);
  static Intent adjust_speed(SpeedDelta d);
  static Intent set_verbosity(Verbosity v);
  static Intent hazard_decision(HazardChoice c);
  static Intent ask_status();
  static Intent unknown(std::optional<std::string> reply = std::nullopt);

  /// True when exactly the fields required by `kind` are present.
  bool well_formed() const;
  bool operator==(const Intent&) const = default;
};

struct HazardVerdict {
  bool hazardous = false;
  std::string reason;
  double confidence = 0.0;
  bool operator==(const HazardVerdict&) const = default;
};

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The language side of the agent. The mock is pure rule tables; the remote
/// implementation speaks a chat-completion wire protocol.
class Gateway {
 public:
  virtual ~Gateway() = default;

  /// Precondition: utterance is non-empty (std::invalid_argument otherwise).
  virtual Intent interpret_query(std::string_view utterance, const TopoMap& map) = 0;
  /// Precondition: labels non-empty (std::invalid_argument otherwise).
  virtual HazardVerdict classify_hazard(const std::vector<std::string>& labels,
                                        std::string_view context) = 0;
  /// Route inference from raw map text, used when the planner is ablated.
  virtual std::optional<std::vector<NodeId>> infer_route(std::string_view map_text, const NodeId& start,
                                                         const NodeId& goal) = 0;
  virtual std::string_view name() const = 0;
};

/// Resolves a place phrase against node ids, labels and tags (case-insensitive).
/// Precedence: exact id, exact label, exact tag, label containing the phrase, tag
/// containing the phrase; ties go to the lexicographically smallest node id.
std::optional<NodeId> resolve_place(std::string_view phrase, const TopoMap& map);

/// Maps a tag phrase ("noisy areas") onto the map's tag vocabulary when possible.
std::string resolve_tag(std::string_view phrase, const TopoMap& map);

struct ConfusionConfig {
  double false_positive = 0.0;  // probability a non-hazard is reported hazardous
  double false_negative = 0.0;  // probability a hazard is reported safe
  std::uint64_t seed = 0;
};

/// Deterministic offline gateway.
class MockGateway final : public Gateway {
 public:
  MockGateway() : MockGateway(ConfusionConfig{}) {}
  explicit MockGateway(ConfusionConfig confusion);

  Intent interpret_query(std::string_view utterance, const TopoMap& map) override;
  /// Rule table, then optional seeded confusion flip (one uniform draw per call
  /// when any flip probability is non-zero).
  HazardVerdict classify_hazard(const std::vector<std::string>& labels, std::string_view context) override;
  /// The mock has no route inference: always nullopt.
  std::optional<std::vector<NodeId>> infer_route(std::string_view, const NodeId&, const NodeId&) override {
    return std::nullopt;
  }
  std::string_view name() const override { return "mock"; }

  int flips() const { return flips_; }
  int calls() const { return calls_; }

 private:
  ConfusionConfig confusion_;
  Xoshiro256pp rng_;
  int flips_ = 0;
  int calls_ = 0;
};

/// Rule table without any injection.
HazardVerdict rule_table_verdict(const std::vector<std::string>& labels);

// ---- user-facing messages ----

namespace message {
struct RoutePlanned {
  Route route;
};
struct Arrived {
  std::string place;
};
struct HazardAlert {
  HazardVerdict verdict;
  std::optional<Route> alternative;
};
struct LocalizationWarning {
  std::string expected_place;
  double similarity = 0.0;
};
struct Relocalized {
  std::string place;
  Route route;
};
struct Unreachable {
  std::string goal;
  UnreachableError::Reason reason;
  std::vector<std::string> avoid_tags;
};
struct Failure {
  std::string reason;
};
struct Status {
  std::string place;
  int heading = 0;
  std::string phase;
  std::optional<Route> route;
  std::size_t leg_index = 0;
};
struct PreferenceChanged {
  std::string summary;
};
}  // namespace message

using AgentMessageEvent =
    std::variant<message::RoutePlanned, message::Arrived, message::HazardAlert, message::LocalizationWarning,
                 message::Relocalized, message::Unreachable, message::Failure, message::Status,
                 message::PreferenceChanged>;

/// Deterministic templates. Detailed mode carries leg-by-leg route text; brief
/// mode summarizes destination, total distance and leg count.
std::string compose_user_message(const AgentMessageEvent& event, Verbosity verbosity);

}  // namespace guide
