#include "guide/agent.hpp"

#include <algorithm>
#include <cmath>

namespace guide {

void SessionPrefs::validate() const {
  if (!(speed_mps > 0.0) || !std::isfinite(speed_mps)) throw std::invalid_argument("speed must be positive");
  if (!(arrival_threshold > 0.0 && arrival_threshold < 1.0)) {
    throw std::invalid_argument("arrival threshold must lie in (0, 1)");
  }
  if (!(reloc_threshold > 0.0 && reloc_threshold < 1.0)) {
    throw std::invalid_argument("relocalization threshold must lie in (0, 1)");
  }
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::kIdle: return "idle";
    case Phase::kPlanning: return "planning";
    case Phase::kTraversing: return "traversing";
    case Phase::kVerifying: return "verifying";
    case Phase::kAwaitingDecision: return "awaiting_decision";
    case Phase::kRecovering: return "recovering";
    case Phase::kCompleted: return "completed";
    case Phase::kFailed: return "failed";
  }
  return "idle";
}

AgentState AgentState::start_at(NodeId node, Heading heading, SessionPrefs prefs) {
  prefs.validate();
  AgentState s;
  s.believed_node = std::move(node);
  s.believed_heading = heading;
  s.prefs = std::move(prefs);
  return s;
}

std::optional<std::string> check_invariants(const AgentState& s) {
  const bool en_route = s.phase == Phase::kTraversing || s.phase == Phase::kVerifying ||
                        s.phase == Phase::kAwaitingDecision;
  if (en_route != s.route.has_value()) {
    return "route presence does not match phase " + std::string(to_string(s.phase));
  }
  if (s.route) {
    if (s.leg_index >= s.route->legs.size()) return "leg_index past the end of an active route";
    if (!s.goal || *s.goal != s.route->goal) return "active route does not lead to the goal";
  }
  if ((s.phase == Phase::kAwaitingDecision) != s.pending_prompt.has_value()) {
    return "pending prompt presence does not match phase";
  }
  if (s.pending_prompt.has_value() != s.hazard.has_value()) return "pending prompt without hazard details";
  if (s.phase == Phase::kPlanning) return "planning is transient and never observable";
  if (s.believed_node.empty()) return "believed node is empty";
  if (s.recovery_attempts > kMaxRecoveryAttempts) return "recovery attempts above cap";
  try {
    s.prefs.validate();
  } catch (const std::exception& e) {
    return std::string("prefs: ") + e.what();
  }
  return std::nullopt;
}

ArrivalCheck verify_arrival(const std::optional<EmbeddingRecord>& expected, const Embedding& observation,
                            double threshold) {
  if (!expected) return {false, -1.0};
  const double sim = cosine_similarity(expected->embedding, observation);
  return {sim >= threshold, sim};
}

bool detect_localization_error(const AgentState& state, const Observation& observation) {
  if (state.phase != Phase::kVerifying || !state.route) return false;
  const RouteLeg& leg = state.route->legs[state.leg_index];
  const auto expected = state.navigational.find_by_meta(leg.to, leg.absolute_direction);
  return !verify_arrival(expected, observation.embedding, state.prefs.arrival_threshold).arrived;
}

bool is_preference_intent(const Intent& intent) {
  switch (intent.kind) {
    case IntentKind::kSetAvoidTag:
    case IntentKind::kClearAvoidTag:
    case IntentKind::kSetSpeed:
    case IntentKind::kAdjustSpeed:
    case IntentKind::kSetVerbosity: return true;
    default: return false;
  }
}

SessionPrefs apply_preference(const SessionPrefs& prefs, const Intent& intent) {
  SessionPrefs p = prefs;
  switch (intent.kind) {
    case IntentKind::kSetAvoidTag:
      if (intent.tag) p.avoid_tags.insert(*intent.tag);
      break;
    case IntentKind::kClearAvoidTag:
      if (intent.tag) p.avoid_tags.erase(*intent.tag);
      break;
    case IntentKind::kSetSpeed:
      if (intent.speed_mps) p.speed_mps = std::clamp(*intent.speed_mps, kMinSpeedMps, kMaxSpeedMps);
      break;
    case IntentKind::kAdjustSpeed:
      if (intent.delta) {
        const double f = *intent.delta == SpeedDelta::kFaster ? kFasterFactor : kSlowerFactor;
        p.speed_mps = std::clamp(p.speed_mps * f, kMinSpeedMps, kMaxSpeedMps);
      }
      break;
    case IntentKind::kSetVerbosity:
      if (intent.verbosity) p.verbosity = *intent.verbosity;
      break;
    default: break;
  }
  return p;
}

VectorStore navigational_records(const VectorStore& environment, const Route& route) {
  VectorStore nav(StoreKind::kNavigational, environment.dim());
  std::vector<std::pair<NodeId, Heading>> keys{{route.start, route.initial_heading}};
  for (const auto& leg : route.legs) keys.emplace_back(leg.to, leg.absolute_direction);
  for (const auto& [node, heading] : keys) {
    auto rec = environment.find_by_meta(node, heading);
    if (!rec) continue;
    rec->id = "nav:" + node.str() + "/" + std::to_string(heading.degrees());
    if (nav.contains(rec->id)) continue;
    rec->meta.kind = StoreKind::kNavigational;
    nav.insert(std::move(*rec));
  }
  return nav;
}

TopoMap effective_map(const TopoMap& base, const std::set<EdgeKey>& blocked) {
  TopoMap m = base;
  for (const auto& [from, to] : blocked) {
    if (m.find_edge(from, to)) m.set_blocked(from, to, true);
  }
  return m;
}

namespace {

using Outputs = std::vector<AgentOutput>;

// One transition in progress: a private copy of the state plus the outputs
// emitted so far, in order.
class Transition {
 public:
  Transition(const AgentState& s, const AgentDeps& d) : s_(s), d_(d) {}

  std::pair<AgentState, Outputs> finish() && { return {std::move(s_), std::move(out_)}; }

  void on(const UserUtterance& e);
  void on(const UserIntent& e) { apply(e.intent); }
  void on(const ArrivalReport& e);
  void on(const Observation& e);
  void on(const UserDecision& e);
  void on(const MoveBlocked& e);

  void recover(const Observation& obs);
  void hazard(const HazardVerdict& verdict);

 private:
  void say(const AgentMessageEvent& e) { out_.push_back(Say{compose_user_message(e, s_.prefs.verbosity)}); }
  void say_text(std::string text) { out_.push_back(Say{std::move(text)}); }

  PlanConstraints constraints() const {
    PlanConstraints c;
    c.avoid_tags = s_.prefs.avoid_tags;
    return c;
  }
  TopoMap map() const { return effective_map(d_.map, s_.blocked_edges); }
  std::string place_name(const NodeId& id) const {
    return d_.map.has_node(id) ? d_.map.node(id).display_name() : id.str();
  }

  void clear_route() {
    s_.route.reset();
    s_.leg_index = 0;
    s_.hazard.reset();
    s_.pending_prompt.reset();
  }
  void fail(const std::string& reason) {
    clear_route();
    s_.phase = Phase::kFailed;
    s_.failure_reason = reason;
    out_.push_back(SessionResult{false, reason});
  }
  void complete() {
    clear_route();
    s_.phase = Phase::kCompleted;
    say(message::Arrived{place_name(s_.believed_node)});
    out_.push_back(SessionResult{true, "arrived"});
  }

  enum class Announce { kPlanned, kRelocalized };
  void plan_and_go(Announce announce);
  void adopt(Route route) {
    s_.navigational = navigational_records(d_.environment, route);
    s_.route = std::move(route);
    s_.leg_index = 0;
  }
  void begin_leg();
  void apply(const Intent& intent);
  void decide(HazardChoice choice);
  void status() {
    say(message::Status{place_name(s_.believed_node), s_.believed_heading.degrees(),
                        std::string(to_string(s_.phase)), s_.route, s_.leg_index});
  }

  AgentState s_;
  const AgentDeps& d_;
  Outputs out_;
};

void Transition::plan_and_go(Announce announce) {
  s_.phase = Phase::kPlanning;
  s_.replan_pending = false;
  clear_route();
  const NodeId goal = *s_.goal;

  Route route;
  if (!d_.planner_enabled) {
    const auto nodes = d_.gateway.infer_route(serialize_map(d_.map), s_.believed_node, goal);
    if (!nodes) {
      say(message::Failure{"no route could be inferred without the path planner"});
      fail("no_route_inference");
      return;
    }
    try {
      route = route_from_nodes(map(), *nodes, s_.believed_heading);
      if (route.start != s_.believed_node || route.goal != goal) throw std::invalid_argument("wrong endpoints");
    } catch (const std::exception&) {
      say(message::Failure{"the inferred route is not valid on this map"});
      fail("invalid_inferred_route");
      return;
    }
  } else {
    try {
      route = plan_route(map(), s_.believed_node, goal, s_.believed_heading, constraints());
    } catch (const UnreachableError& e) {
      std::vector<std::string> tags(s_.prefs.avoid_tags.begin(), s_.prefs.avoid_tags.end());
      say(message::Unreachable{place_name(goal), e.reason(), tags});
      fail(e.reason() == UnreachableError::Reason::kNoPath ? "unreachable" : "unreachable_under_constraints");
      return;
    }
  }

  if (route.empty()) {
    complete();
    return;
  }
  if (announce == Announce::kRelocalized) {
    say(message::Relocalized{place_name(s_.believed_node), route});
  } else {
    say(message::RoutePlanned{route});
  }
  adopt(std::move(route));
  begin_leg();
}

void Transition::begin_leg() {
  const RouteLeg& leg = s_.route->legs[s_.leg_index];
  const EdgeKey key{leg.edge.from, leg.edge.to};
  if (!s_.acknowledged_hazards.contains(key)) {
    std::vector<std::string> labels;
    for (const auto& obj : s_.visible) {
      if (obj.direction == leg.absolute_direction) labels.push_back(obj.label);
    }
    if (!labels.empty()) {
      const HazardVerdict verdict =
          d_.gateway.classify_hazard(labels, "next leg toward " + leg.to_name);
      if (verdict.hazardous) {
        hazard(verdict);
        return;
      }
    }
  }
  s_.phase = Phase::kTraversing;
  out_.push_back(MoveCommand{relative_turn(s_.believed_heading, leg.absolute_direction), leg.distance,
                             s_.prefs.speed_mps});
}

void Transition::hazard(const HazardVerdict& verdict) {
  const RouteLeg& leg = s_.route->legs[s_.leg_index];
  const EdgeKey key{leg.edge.from, leg.edge.to};
  s_.blocked_edges.insert(key);
  if (d_.map.find_edge(key.second, key.first)) s_.blocked_edges.insert({key.second, key.first});

  std::optional<Route> alternative;
  try {
    PlanConstraints c = constraints();
    auto alts = k_alternative_routes(map(), s_.believed_node, *s_.goal, c.max_routes, c, s_.believed_heading);
    if (!alts.empty()) alternative = std::move(alts.front());
  } catch (const UnreachableError&) {
  }

  const int id = s_.next_prompt_id++;
  s_.hazard = PendingHazard{id, key, verdict, alternative};
  s_.pending_prompt = id;
  s_.phase = Phase::kAwaitingDecision;
  out_.push_back(HazardPrompt{id, verdict, key, alternative});
  say(message::HazardAlert{verdict, alternative});
}

void Transition::decide(HazardChoice choice) {
  const PendingHazard pending = *s_.hazard;
  if (choice == HazardChoice::kProceed) {
    s_.blocked_edges.erase(pending.edge);
    s_.blocked_edges.erase({pending.edge.second, pending.edge.first});
    s_.acknowledged_hazards.insert(pending.edge);
    s_.hazard.reset();
    s_.pending_prompt.reset();
    say_text("Proceeding with care.");
    begin_leg();
    return;
  }
  if (!pending.alternative) {
    say_text("There is no alternative route from here. You can proceed with care or wait.");
    return;
  }
  s_.hazard.reset();
  s_.pending_prompt.reset();
  Route alt = *pending.alternative;
  if (alt.empty()) {
    complete();
    return;
  }
  say(message::RoutePlanned{alt});
  adopt(std::move(alt));
  begin_leg();
}

void Transition::recover(const Observation& obs) {
  s_.phase = Phase::kRecovering;
  clear_route();
  if (s_.recovery_attempts >= kMaxRecoveryAttempts) {
    say(message::Failure{"I could not determine where we are"});
    fail("localization_lost");
    return;
  }
  ++s_.recovery_attempts;
  if (d_.environment.empty()) {
    say(message::Failure{"no reference images are available for relocalization"});
    fail("localization_lost");
    return;
  }
  const auto top = d_.environment.query_top_k(obs.embedding, 1);
  if (top.front().similarity < s_.prefs.reloc_threshold) {
    say(message::Failure{"I could not determine where we are"});
    fail("localization_lost");
    return;
  }
  s_.believed_node = top.front().record.meta.node;
  s_.believed_heading = top.front().record.meta.orientation;
  s_.visible = obs.objects;
  plan_and_go(Announce::kRelocalized);
}

void Transition::on(const UserUtterance& e) {
  Intent intent;
  try {
    intent = d_.gateway.interpret_query(e.text, d_.map);
  } catch (const std::invalid_argument&) {
    say_text("I did not catch that. Please say it again.");
    return;
  } catch (const GatewayError& err) {
    say_text(std::string("The assistant is unavailable right now (") + err.what() + ").");
    return;
  }
  apply(intent);
}

void Transition::apply(const Intent& intent) {
  if (!intent.well_formed()) {
    say_text("Sorry, I did not understand that request.");
    return;
  }
  switch (intent.kind) {
    case IntentKind::kNavigateTo: {
      if (!intent.destination) {
        say_text("I could not find \"" + intent.place.value_or("") + "\" on the map.");
        return;
      }
      if (d_.map.has_node(*intent.destination) == false) {
        say_text("I could not find that place on the map.");
        return;
      }
      switch (s_.phase) {
        case Phase::kIdle:
        case Phase::kCompleted:
        case Phase::kFailed:
          s_.goal = intent.destination;
          s_.recovery_attempts = 0;
          plan_and_go(Announce::kPlanned);
          return;
        case Phase::kTraversing:
        case Phase::kVerifying:
          s_.goal = intent.destination;
          s_.replan_pending = true;
          // the active route must keep pointing at the goal until the replan
          s_.route->goal = *s_.goal;
          say_text("New destination: " + place_name(*s_.goal) + ". I will update the route at the next node.");
          return;
        default:
          say_text("Please answer the current question first.");
          return;
      }
    }
    case IntentKind::kHazardDecision:
      if (s_.phase == Phase::kAwaitingDecision) {
        decide(*intent.decision);
      } else {
        say_text("There is no pending question.");
      }
      return;
    case IntentKind::kAskStatus:
      status();
      return;
    case IntentKind::kUnknown:
      say_text(intent.reply.value_or("Sorry, I did not understand. You can ask me to take you somewhere."));
      return;
    default: break;
  }

  // preference kinds
  s_.prefs = apply_preference(s_.prefs, intent);
  std::string summary;
  switch (intent.kind) {
    case IntentKind::kSetAvoidTag: summary = "I will avoid " + *intent.tag + "."; break;
    case IntentKind::kClearAvoidTag: summary = "I will no longer avoid " + *intent.tag + "."; break;
    case IntentKind::kSetSpeed:
    case IntentKind::kAdjustSpeed: summary = "Walking speed is now " + format_real(s_.prefs.speed_mps) + " m/s."; break;
    default: summary = std::string("Instructions will be ") + std::string(to_string(s_.prefs.verbosity)) + "."; break;
  }
  const bool route_affecting = intent.kind == IntentKind::kSetAvoidTag || intent.kind == IntentKind::kClearAvoidTag;
  if (route_affecting && s_.route) {
    s_.replan_pending = true;
    summary += " The route will be updated at the next node.";
  }
  say(message::PreferenceChanged{summary});
}

void Transition::on(const ArrivalReport&) {
  if (s_.phase != Phase::kTraversing) {
    status();
    return;
  }
  const RouteLeg& leg = s_.route->legs[s_.leg_index];
  s_.phase = Phase::kVerifying;
  out_.push_back(QueryImages{StoreKind::kNavigational, leg.to, leg.absolute_direction});
}

void Transition::on(const Observation& e) {
  switch (s_.phase) {
    case Phase::kIdle:
    case Phase::kCompleted:
    case Phase::kFailed:
      s_.visible = e.objects;
      return;
    case Phase::kRecovering:
      recover(e);
      return;
    case Phase::kVerifying:
      break;
    default:
      say_text("Observation ignored while " + std::string(to_string(s_.phase)) + ".");
      return;
  }

  const RouteLeg leg = s_.route->legs[s_.leg_index];
  const auto expected = s_.navigational.find_by_meta(leg.to, leg.absolute_direction);
  const ArrivalCheck check = verify_arrival(expected, e.embedding, s_.prefs.arrival_threshold);
  if (!check.arrived) {
    say(message::LocalizationWarning{leg.to_name, check.similarity});
    recover(e);
    return;
  }
  s_.believed_node = leg.to;
  s_.believed_heading = leg.absolute_direction;
  s_.visible = e.objects;
  ++s_.leg_index;
  ++s_.legs_completed;
  if (s_.leg_index == s_.route->legs.size() && s_.believed_node == *s_.goal) {
    complete();
    return;
  }
  if (s_.replan_pending || s_.leg_index == s_.route->legs.size()) {
    plan_and_go(Announce::kPlanned);
    return;
  }
  begin_leg();
}

void Transition::on(const UserDecision& e) {
  if (s_.phase != Phase::kAwaitingDecision || s_.pending_prompt != e.prompt_id) {
    say_text("That question is no longer open.");
    return;
  }
  decide(e.choice);
}

void Transition::on(const MoveBlocked& e) {
  if (s_.phase != Phase::kTraversing) {
    status();
    return;
  }
  say_text("I could not move as planned (" + e.reason + "). Checking my location.");
  s_.phase = Phase::kRecovering;
  clear_route();
  out_.push_back(QueryImages{StoreKind::kEnvironment, std::nullopt, std::nullopt});
}

}  // namespace

std::pair<AgentState, std::vector<AgentOutput>> handle_event(const AgentState& state, const AgentEvent& event,
                                                             const AgentDeps& deps) {
  Transition t(state, deps);
  std::visit([&](const auto& e) { t.on(e); }, event);
  return std::move(t).finish();
}

std::pair<AgentState, std::vector<AgentOutput>> recover_localization(const AgentState& state,
                                                                     const Observation& observation,
                                                                     const AgentDeps& deps) {
  if (state.phase != Phase::kRecovering) throw std::logic_error("recover_localization requires phase recovering");
  Transition t(state, deps);
  t.recover(observation);
  return std::move(t).finish();
}

std::pair<AgentState, std::vector<AgentOutput>> handle_hazard(const AgentState& state, const HazardVerdict& verdict,
                                                              const AgentDeps& deps) {
  if (state.phase != Phase::kTraversing && state.phase != Phase::kVerifying) {
    throw std::logic_error("handle_hazard requires phase traversing or verifying");
  }
  if (!verdict.hazardous) throw std::invalid_argument("handle_hazard requires a hazardous verdict");
  Transition t(state, deps);
  t.hazard(verdict);
  return std::move(t).finish();
}

}  // namespace guide
