#include "guide/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <map>
#include <regex>
#include <sstream>

namespace guide {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Lowercase, punctuation to spaces (keeping '.', '_' and '-' inside words), single spaces.
std::string normalize_utterance(std::string_view s) {
  std::string tmp;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    if (std::isalnum(c) || c == '_' || c == '-' || c == '/') {
      tmp.push_back(static_cast<char>(std::tolower(c)));
    } else if (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
      tmp.push_back('.');
    } else if (c == '\'') {
      // "don't" -> "dont"
    } else {
      tmp.push_back(' ');
    }
  }
  std::string out;
  std::istringstream in(tmp);
  std::string w;
  while (in >> w) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool has_word(const std::vector<std::string>& ws, std::string_view w) {
  return std::find(ws.begin(), ws.end(), w) != ws.end();
}

std::string strip_filler(std::string phrase) {
  static const std::vector<std::string> leading = {"the ", "a ", "an ", "my "};
  static const std::vector<std::string> trailing = {" please", " now", " thanks"};
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& p : leading) {
      if (phrase.rfind(p, 0) == 0) {
        phrase.erase(0, p.size());
        changed = true;
      }
    }
    for (const auto& t : trailing) {
      if (phrase.size() > t.size() && phrase.compare(phrase.size() - t.size(), t.size(), t) == 0) {
        phrase.resize(phrase.size() - t.size());
        changed = true;
      }
    }
  }
  return phrase;
}

struct HazardRule {
  bool hazardous;
  const char* reason;
};

const std::map<std::string, HazardRule, std::less<>>& hazard_rules() {
  static const std::map<std::string, HazardRule, std::less<>> rules = {
      {"wet_floor_sign", {true, "wet floor sign ahead, the floor may be slippery"}},
      {"warning_tape", {true, "warning tape across the path"}},
      {"barrier", {true, "a physical barrier blocks the path"}},
      {"broken_glass", {true, "broken glass on the floor"}},
      {"chair", {false, "a chair beside the path"}},
      {"pot", {false, "a plant pot beside the path"}},
      {"poster", {false, "a poster on the wall"}},
      {"trash_can", {false, "a trash can beside the path"}},
  };
  return rules;
}

}  // namespace

std::string_view to_string(IntentKind kind) {
  switch (kind) {
    case IntentKind::kNavigateTo: return "navigate_to";
    case IntentKind::kSetAvoidTag: return "set_avoid_tag";
    case IntentKind::kClearAvoidTag: return "clear_avoid_tag";
    case IntentKind::kSetSpeed: return "set_speed";
    case IntentKind::kAdjustSpeed: return "adjust_speed";
    case IntentKind::kSetVerbosity: return "set_verbosity";
    case IntentKind::kHazardDecision: return "hazard_decision";
    case IntentKind::kAskStatus: return "ask_status";
    case IntentKind::kUnknown: return "unknown";
  }
  return "unknown";
}

std::string_view to_string(SpeedDelta d) { return d == SpeedDelta::kFaster ? "faster" : "slower"; }
std::string_view to_string(HazardChoice c) { return c == HazardChoice::kProceed ? "proceed" : "reroute"; }
std::string_view to_string(Verbosity v) { return v == Verbosity::kBrief ? "brief" : "detailed"; }

HazardChoice hazard_choice_from_string(std::string_view s) {
  if (s == "proceed") return HazardChoice::kProceed;
  if (s == "reroute") return HazardChoice::kReroute;
  throw std::invalid_argument("unknown hazard choice '" + std::string(s) + "'");
}

Verbosity verbosity_from_string(std::string_view s) {
  if (s == "brief") return Verbosity::kBrief;
  if (s == "detailed") return Verbosity::kDetailed;
  throw std::invalid_argument("unknown verbosity '" + std::string(s) + "'");
}

Intent Intent::navigate_to(std::optional<NodeId> node, std::string place) {
  Intent i;
  i.kind = IntentKind::kNavigateTo;
  i.destination = std::move(node);
  i.place = std::move(place);
  return i;
}
Intent Intent::set_avoid_tag(std::string tag) {
  Intent i;
  i.kind = IntentKind::kSetAvoidTag;
  i.tag = std::move(tag);
  return i;
}
Intent Intent::clear_avoid_tag(std::string tag) {
  Intent i;
  i.kind = IntentKind::kClearAvoidTag;
  i.tag = std::move(tag);
  return i;
}
Intent Intent::set_speed(double mps) {
  Intent i;
  i.kind = IntentKind::kSetSpeed;
  i.speed_mps = mps;
  return i;
}
Intent Intent::adjust_speed(SpeedDelta d) {
  Intent i;
  i.kind = IntentKind::kAdjustSpeed;
  i.delta = d;
  return i;
}
Intent Intent::set_verbosity(Verbosity v) {
  Intent i;
  i.kind = IntentKind::kSetVerbosity;
  i.verbosity = v;
  return i;
}
Intent Intent::hazard_decision(HazardChoice c) {
  Intent i;
  i.kind = IntentKind::kHazardDecision;
  i.decision = c;
  return i;
}
Intent Intent::ask_status() {
  Intent i;
  i.kind = IntentKind::kAskStatus;
  return i;
}
Intent Intent::unknown(std::optional<std::string> reply) {
  Intent i;
  i.kind = IntentKind::kUnknown;
  i.reply = std::move(reply);
  return i;
}

bool Intent::well_formed() const {
  const bool has_dest = destination.has_value() || place.has_value();
  const int extras = static_cast<int>(tag.has_value()) + static_cast<int>(speed_mps.has_value()) +
                     static_cast<int>(delta.has_value()) + static_cast<int>(decision.has_value()) +
                     static_cast<int>(verbosity.has_value());
  switch (kind) {
    case IntentKind::kNavigateTo: return place.has_value() && extras == 0 && !reply;
    case IntentKind::kSetAvoidTag:
    case IntentKind::kClearAvoidTag: return tag.has_value() && !tag->empty() && extras == 1 && !has_dest && !reply;
    case IntentKind::kSetSpeed: return speed_mps.has_value() && *speed_mps > 0 && extras == 1 && !has_dest && !reply;
    case IntentKind::kAdjustSpeed: return delta.has_value() && extras == 1 && !has_dest && !reply;
    case IntentKind::kSetVerbosity: return verbosity.has_value() && extras == 1 && !has_dest && !reply;
    case IntentKind::kHazardDecision: return decision.has_value() && extras == 1 && !has_dest && !reply;
    case IntentKind::kAskStatus: return extras == 0 && !has_dest && !reply;
    case IntentKind::kUnknown: return extras == 0 && !has_dest;
  }
  return false;
}

std::optional<NodeId> resolve_place(std::string_view phrase_in, const TopoMap& map) {
  const std::string phrase = strip_filler(normalize_utterance(phrase_in));
  if (phrase.empty()) return std::nullopt;
  const std::string phrase_tag = [&] {
    std::string t = phrase;
    std::replace(t.begin(), t.end(), ' ', '_');
    return t;
  }();

  int best_tier = 99;
  std::optional<NodeId> best;
  for (const auto& [id, node] : map.nodes()) {  // id order, so first hit per tier wins ties
    const std::string lid = lower(id.str());
    const std::string label = node.label ? normalize_utterance(*node.label) : std::string();
    int tier = 99;
    if (lid == phrase || lid == phrase_tag) {
      tier = 0;
    } else if (!label.empty() && label == phrase) {
      tier = 1;
    } else if (node.tags.contains(phrase_tag)) {
      tier = 2;
    } else if (!label.empty() && label.find(phrase) != std::string::npos) {
      tier = 3;
    } else if (std::any_of(node.tags.begin(), node.tags.end(),
                           [&](const std::string& t) { return t.find(phrase_tag) != std::string::npos; })) {
      tier = 4;
    }
    if (tier < best_tier) {
      best_tier = tier;
      best = id;
    }
  }
  return best;
}

std::string resolve_tag(std::string_view phrase_in, const TopoMap& map) {
  std::string phrase = strip_filler(normalize_utterance(phrase_in));
  std::replace(phrase.begin(), phrase.end(), ' ', '_');
  std::set<std::string> vocab;
  for (const auto& [id, n] : map.nodes()) vocab.insert(n.tags.begin(), n.tags.end());
  for (const auto& [k, e] : map.edges()) vocab.insert(e.tags.begin(), e.tags.end());

  std::vector<std::string> candidates{phrase};
  // "noisy_areas" -> "noisy_area", "stairs" stays first
  if (phrase.size() > 1 && phrase.back() == 's') candidates.push_back(phrase.substr(0, phrase.size() - 1));
  if (phrase.size() > 2 && phrase.ends_with("es")) candidates.push_back(phrase.substr(0, phrase.size() - 2));
  for (const auto& c : candidates) {
    if (vocab.contains(c)) return c;
  }
  return phrase;
}

MockGateway::MockGateway(ConfusionConfig confusion) : confusion_(confusion), rng_(confusion.seed) {
  if (confusion.false_positive < 0 || confusion.false_positive > 1 || confusion.false_negative < 0 ||
      confusion.false_negative > 1) {
    throw std::invalid_argument("confusion probabilities must lie in [0, 1]");
  }
}

Intent MockGateway::interpret_query(std::string_view utterance, const TopoMap& map) {
  if (utterance.empty()) throw std::invalid_argument("utterance must not be empty");
  const std::string u = normalize_utterance(utterance);
  const auto ws = words(u);
  std::smatch m;

  static const std::regex clear_re(R"(^(?:stop avoiding|dont avoid|do not avoid|allow|no longer avoid) (.+)$)");
  static const std::regex avoid_re(R"((?:^|\b)avoid(?:ing)? (.+)$)");
  static const std::regex nav_re(R"((?:go to|take me to|navigate to|bring me to|guide me to|head to) (.+)$)");
  static const std::regex speed_re(R"((?:set (?:my |the )?speed to|walk at|speed of) ([0-9]+(?:\.[0-9]+)?))");

  if (std::regex_search(u, m, clear_re)) return Intent::clear_avoid_tag(resolve_tag(m[1].str(), map));
  if (std::regex_search(u, m, avoid_re)) return Intent::set_avoid_tag(resolve_tag(m[1].str(), map));
  if (std::regex_search(u, m, nav_re)) {
    const std::string place = strip_filler(m[1].str());
    return Intent::navigate_to(resolve_place(place, map), place);
  }
  if (std::regex_search(u, m, speed_re)) {
    double v = 0.0;
    const std::string num = m[1].str();
    std::from_chars(num.data(), num.data() + num.size(), v);
    if (v > 0) return Intent::set_speed(v);
  }
  if (u.find("slow down") != std::string::npos || has_word(ws, "slower")) {
    return Intent::adjust_speed(SpeedDelta::kSlower);
  }
  if (u.find("speed up") != std::string::npos || has_word(ws, "faster") || u.find("hurry") != std::string::npos) {
    return Intent::adjust_speed(SpeedDelta::kFaster);
  }
  if (u.find("more detail") != std::string::npos || has_word(ws, "detailed") ||
      u.find("step by step") != std::string::npos) {
    return Intent::set_verbosity(Verbosity::kDetailed);
  }
  if (has_word(ws, "brief") || has_word(ws, "briefly") || u.find("shorter instructions") != std::string::npos) {
    return Intent::set_verbosity(Verbosity::kBrief);
  }
  if (u.find("where am i") != std::string::npos || has_word(ws, "status")) return Intent::ask_status();
  if (has_word(ws, "no") || has_word(ws, "reroute") || has_word(ws, "alternative")) {
    return Intent::hazard_decision(HazardChoice::kReroute);
  }
  if (has_word(ws, "yes") || has_word(ws, "proceed") || has_word(ws, "continue")) {
    return Intent::hazard_decision(HazardChoice::kProceed);
  }
  return Intent::unknown();
}

HazardVerdict rule_table_verdict(const std::vector<std::string>& labels) {
  if (labels.empty()) throw std::invalid_argument("hazard classification needs at least one label");
  const auto& rules = hazard_rules();
  std::vector<std::string> hazards, benign, unknown;
  for (const auto& l : labels) {
    auto it = rules.find(l);
    if (it == rules.end()) {
      unknown.push_back(l);
    } else if (it->second.hazardous) {
      hazards.push_back(it->second.reason);
    } else {
      benign.push_back(it->second.reason);
    }
  }
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "; " : "") + v[i];
    return s;
  };
  if (!hazards.empty()) return {true, join(hazards), 0.95};
  if (!benign.empty() && unknown.empty()) return {false, join(benign), 0.95};
  if (!benign.empty()) return {false, join(benign) + "; unrecognized: " + join(unknown), 0.5};
  return {false, "unrecognized objects: " + join(unknown), 0.5};
}

HazardVerdict MockGateway::classify_hazard(const std::vector<std::string>& labels, std::string_view) {
  HazardVerdict v = rule_table_verdict(labels);
  ++calls_;
  if (confusion_.false_positive == 0.0 && confusion_.false_negative == 0.0) return v;
  const double draw = rng_.uniform01();
  if (v.hazardous && draw < confusion_.false_negative) {
    ++flips_;
    return {false, "nothing hazardous noticed", 0.6};
  }
  if (!v.hazardous && draw < confusion_.false_positive) {
    ++flips_;
    std::string what = labels.front();
    std::replace(what.begin(), what.end(), '_', ' ');
    return {true, "possible obstacle: " + what, 0.6};
  }
  return v;
}

std::string compose_user_message(const AgentMessageEvent& event, Verbosity verbosity) {
  const bool detailed = verbosity == Verbosity::kDetailed;
  auto summary = [](const Route& r) {
    return "Route to " + r.goal_name + ": " + format_real(r.total_distance) + " m in " +
           std::to_string(r.legs.size()) + (r.legs.size() == 1 ? " leg." : " legs.");
  };
  struct Visitor {
    bool detailed;
    decltype(summary)& sum;

    std::string operator()(const message::RoutePlanned& e) const {
      if (e.route.empty()) return e.route.description;
      std::string s = sum(e.route);
      if (detailed) s += "\n" + e.route.description;
      return s;
    }
    std::string operator()(const message::Arrived& e) const {
      return "You have arrived at " + e.place + ".";
    }
    std::string operator()(const message::HazardAlert& e) const {
      std::string s = "Caution: " + e.verdict.reason + ".";
      if (e.alternative) {
        s += " An alternative route is available (" + format_real(e.alternative->total_distance) + " m).";
        if (detailed) s += "\n" + e.alternative->description;
        s += "\nWould you like to proceed or reroute?";
      } else {
        s += " There is no alternative route. You may proceed with care or wait.";
      }
      return s;
    }
    std::string operator()(const message::LocalizationWarning& e) const {
      std::string s = "I may not be where I expected (" + e.expected_place + "). Checking my location.";
      if (detailed) s += " Match score " + format_real(std::round(e.similarity * 1000) / 1000) + ".";
      return s;
    }
    std::string operator()(const message::Relocalized& e) const {
      std::string s = "I found our position: " + e.place + ". ";
      s += e.route.empty() ? e.route.description : sum(e.route);
      if (detailed && !e.route.empty()) s += "\n" + e.route.description;
      return s;
    }
    std::string operator()(const message::Unreachable& e) const {
      if (e.reason == UnreachableError::Reason::kConstraintsOnly) {
        std::string tags;
        for (std::size_t i = 0; i < e.avoid_tags.size(); ++i) tags += (i ? ", " : "") + e.avoid_tags[i];
        std::string s = "I cannot reach " + e.goal + " while avoiding the current restrictions";
        if (!tags.empty()) s += " (" + tags + ")";
        return s + ". A route exists if you relax them.";
      }
      return "There is no route to " + e.goal + ".";
    }
    std::string operator()(const message::Failure& e) const { return "Navigation stopped: " + e.reason + "."; }
    std::string operator()(const message::Status& e) const {
      std::string s = "You are at " + e.place + ", facing " + std::to_string(e.heading) + " degrees (" + e.phase + ").";
      if (e.route) {
        s += " Leg " + std::to_string(std::min(e.leg_index + 1, e.route->legs.size())) + " of " +
             std::to_string(e.route->legs.size()) + " toward " + e.route->goal_name + ".";
        if (detailed) s += "\n" + e.route->description;
      }
      return s;
    }
    std::string operator()(const message::PreferenceChanged& e) const { return e.summary; }
  };
  return std::visit(Visitor{detailed, summary}, event);
}

}  // namespace guide
