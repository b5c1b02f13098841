#include "guide/scenario_runner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <omp.h>

namespace guide {

using nlohmann::json;

namespace {

constexpr int kStepLimit = 5000;

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ScenarioError(where + ": unknown field '" + key + "'");
    }
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ScenarioError(where + ": missing field '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ScenarioError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? get_as<T>(obj, key, where) : fallback;
}

Heading heading_field(const json& obj, const char* key, const std::string& where) {
  try {
    return Heading::from_degrees(get_as<int>(obj, key, where));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(where + ": " + e.what());
  }
}

NodeId node_field(const json& obj, const char* key, const TopoMap& map, const std::string& where) {
  NodeId id(get_as<std::string>(obj, key, where));
  if (!map.has_node(id)) throw ScenarioError(where + ": unknown node '" + id.str() + "'");
  return id;
}

NodeId node_value(const std::string& s, const TopoMap& map, const std::string& where) {
  NodeId id(s);
  if (!map.has_node(id)) throw ScenarioError(where + ": unknown node '" + s + "'");
  return id;
}

std::string pose_text(const Pose& p) { return p.node.str() + "/" + std::to_string(p.heading.degrees()); }

}  // namespace

ScenarioSpec parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc,
             {"name", "map", "store", "store_sigma", "start", "script", "faults", "objects", "appearance", "prefs",
              "gateway", "confusion", "hazard_response", "ablations", "expected"},
             "scenario");
  ScenarioSpec spec;
  spec.name = get_as<std::string>(doc, "name", "scenario");
  const std::string where = "scenario " + spec.name;
  if (spec.name.empty()) throw ScenarioError("scenario: empty name");

  spec.map_path = base_dir / get_as<std::string>(doc, "map", where);
  TopoMap map;
  try {
    map = load_map_file(spec.map_path.string());
  } catch (const std::exception& e) {
    throw ScenarioError(where + ": cannot load map: " + e.what());
  }

  const std::string store = get_or<std::string>(doc, "store", "generate", where);
  if (store != "generate") spec.store_path = base_dir / store;
  spec.store_sigma = get_or<double>(doc, "store_sigma", 0.0, where);

  const json& start = doc.contains("start") ? doc.at("start") : throw ScenarioError(where + ": missing start");
  check_keys(start, {"node", "heading"}, where + " start");
  spec.start = Pose{node_field(start, "node", map, where + " start"), heading_field(start, "heading", where)};

  if (doc.contains("script")) {
    if (!doc.at("script").is_array()) throw ScenarioError(where + ": script must be an array");
    int default_at = 1;
    for (const auto& item : doc.at("script")) {
      ScriptedUtterance u;
      if (item.is_string()) {
        u.text = item.get<std::string>();
        u.at_event = default_at;
      } else {
        check_keys(item, {"utterance", "at_event"}, where + " script");
        u.text = get_as<std::string>(item, "utterance", where + " script");
        u.at_event = get_or<int>(item, "at_event", default_at, where + " script");
      }
      if (u.at_event < 0) throw ScenarioError(where + ": at_event must be >= 0");
      default_at = u.at_event;
      spec.script.push_back(std::move(u));
    }
  }

  if (doc.contains("faults")) {
    for (const auto& f : doc.at("faults")) {
      const std::string type = get_as<std::string>(f, "type", where + " fault");
      if (type == "kidnap") {
        check_keys(f, {"type", "trigger_leg", "teleport_to", "heading"}, where + " kidnap");
        spec.faults.push_back(Kidnap{get_as<int>(f, "trigger_leg", where), node_field(f, "teleport_to", map, where),
                                     heading_field(f, "heading", where)});
      } else if (type == "noise") {
        check_keys(f, {"type", "sigma"}, where + " noise");
        const double sigma = get_as<double>(f, "sigma", where);
        if (!(sigma >= 0.0)) throw ScenarioError(where + ": noise sigma must be >= 0");
        spec.faults.push_back(NoiseSigma{sigma});
      } else {
        throw ScenarioError(where + ": unknown fault type '" + type + "'");
      }
    }
  }

  if (doc.contains("objects")) {
    for (const auto& o : doc.at("objects")) {
      check_keys(o, {"label", "edge", "hazard"}, where + " object");
      const auto edge = get_as<std::vector<std::string>>(o, "edge", where + " object");
      if (edge.size() != 2) throw ScenarioError(where + ": object edge must name two nodes");
      WorldObject obj{get_as<std::string>(o, "label", where), {node_value(edge[0], map, where), node_value(edge[1], map, where)},
                      get_or<bool>(o, "hazard", false, where)};
      if (!map.find_edge(obj.at_edge.first, obj.at_edge.second)) {
        throw ScenarioError(where + ": object on missing edge " + edge[0] + "->" + edge[1]);
      }
      spec.objects.push_back(std::move(obj));
    }
  }

  if (doc.contains("appearance")) {
    for (const auto& [from, to] : doc.at("appearance").items()) {
      spec.appearance[node_value(from, map, where)] = node_value(to.get<std::string>(), map, where);
    }
  }

  if (doc.contains("prefs")) {
    const json& p = doc.at("prefs");
    check_keys(p, {"avoid_tags", "speed_mps", "verbosity", "arrival_threshold", "reloc_threshold"}, where + " prefs");
    for (const auto& t : get_or<std::vector<std::string>>(p, "avoid_tags", {}, where)) spec.prefs.avoid_tags.insert(t);
    spec.prefs.speed_mps = get_or<double>(p, "speed_mps", spec.prefs.speed_mps, where);
    if (p.contains("verbosity")) {
      try {
        spec.prefs.verbosity = verbosity_from_string(get_as<std::string>(p, "verbosity", where));
      } catch (const std::invalid_argument& e) {
        throw ScenarioError(where + ": " + e.what());
      }
    }
    spec.prefs.arrival_threshold = get_or<double>(p, "arrival_threshold", spec.prefs.arrival_threshold, where);
    spec.prefs.reloc_threshold = get_or<double>(p, "reloc_threshold", spec.prefs.reloc_threshold, where);
  }
  try {
    spec.prefs.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(where + ": " + e.what());
  }

  const std::string gw = get_or<std::string>(doc, "gateway", "mock", where);
  if (gw == "mock") {
    spec.gateway = GatewayMode::kMock;
  } else if (gw == "remote") {
    spec.gateway = GatewayMode::kRemote;
  } else {
    throw ScenarioError(where + ": gateway must be mock or remote");
  }

  if (doc.contains("confusion")) {
    const json& c = doc.at("confusion");
    check_keys(c, {"false_positive", "false_negative"}, where + " confusion");
    spec.confusion.false_positive = get_or<double>(c, "false_positive", 0.0, where);
    spec.confusion.false_negative = get_or<double>(c, "false_negative", 0.0, where);
    for (double p : {spec.confusion.false_positive, spec.confusion.false_negative}) {
      if (!(p >= 0.0 && p <= 1.0)) throw ScenarioError(where + ": confusion probabilities must lie in [0, 1]");
    }
  }

  const std::string hr = get_or<std::string>(doc, "hazard_response", "auto", where);
  if (hr == "auto") {
    spec.hazard_response = HazardResponse::kAuto;
  } else if (hr == "proceed") {
    spec.hazard_response = HazardResponse::kProceed;
  } else if (hr == "reroute") {
    spec.hazard_response = HazardResponse::kReroute;
  } else {
    throw ScenarioError(where + ": hazard_response must be auto, proceed or reroute");
  }

  if (doc.contains("ablations")) {
    const json& a = doc.at("ablations");
    check_keys(a, {"no_system_prompt", "no_planner"}, where + " ablations");
    spec.no_system_prompt = get_or<bool>(a, "no_system_prompt", false, where);
    spec.no_planner = get_or<bool>(a, "no_planner", false, where);
  }

  if (doc.contains("expected")) {
    const json& e = doc.at("expected");
    check_keys(e,
               {"goal_node", "success", "should_detect_kidnap", "should_recover", "hazard_ground_truth", "final_reason",
                "speed_trace"},
               where + " expected");
    if (e.contains("goal_node")) spec.expected.goal_node = node_field(e, "goal_node", map, where);
    if (e.contains("success")) spec.expected.success = get_as<bool>(e, "success", where);
    if (e.contains("should_detect_kidnap")) {
      spec.expected.should_detect_kidnap = get_as<bool>(e, "should_detect_kidnap", where);
    }
    if (e.contains("should_recover")) spec.expected.should_recover = get_as<bool>(e, "should_recover", where);
    if (e.contains("hazard_ground_truth")) {
      spec.expected.hazard_ground_truth = get_as<bool>(e, "hazard_ground_truth", where);
    }
    if (e.contains("final_reason")) spec.expected.final_reason = get_as<std::string>(e, "final_reason", where);
    if (e.contains("speed_trace")) spec.expected.speed_trace = get_as<std::vector<double>>(e, "speed_trace", where);
  }
  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("cannot open scenario " + file.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError(file.string() + ": " + e.what());
  }
  return parse_scenario(doc, file.parent_path());
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  tn += o.tn;
  return *this;
}

std::uint64_t run_seed_for(const ScenarioSpec& spec, std::uint64_t seed) {
  std::uint64_t state = fnv1a64(spec.name) ^ seed;
  return splitmix64_next(state);
}

std::unique_ptr<Gateway> default_gateway_factory(const ScenarioSpec& spec, std::uint64_t run_seed) {
  if (spec.gateway != GatewayMode::kMock) return nullptr;
  ConfusionConfig c = spec.confusion;
  c.seed = run_seed;
  return std::make_unique<MockGateway>(c);
}

namespace {

void check_expectations(const ScenarioSpec& spec, RunReport& r) {
  const auto& e = spec.expected;
  auto fail = [&](std::string msg) { r.expectation_failures.push_back(std::move(msg)); };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  if (e.success && *e.success != r.success) {
    fail("expected success=" + b(*e.success) + ", got " + b(r.success) + " (" + r.result_reason + ")");
  }
  if (e.goal_node && r.success && r.final_node != *e.goal_node) {
    fail("expected to end at " + e.goal_node->str() + ", ended at " + r.final_node.str());
  }
  if (e.should_detect_kidnap && r.detected_kidnap.value_or(false) != *e.should_detect_kidnap) {
    fail("expected detected_kidnap=" + b(*e.should_detect_kidnap) + ", got " + b(r.detected_kidnap.value_or(false)));
  }
  if (e.should_recover && r.recovered.value_or(false) != *e.should_recover) {
    fail("expected recovered=" + b(*e.should_recover) + ", got " + b(r.recovered.value_or(false)));
  }
  if (e.final_reason && *e.final_reason != r.result_reason) {
    fail("expected result reason " + *e.final_reason + ", got " + r.result_reason);
  }
  if (e.speed_trace) {
    bool same = e.speed_trace->size() == r.speed_trace.size();
    for (std::size_t i = 0; same && i < r.speed_trace.size(); ++i) {
      same = std::abs((*e.speed_trace)[i] - r.speed_trace[i]) <= 1e-9;
    }
    if (!same) {
      std::string got;
      for (double v : r.speed_trace) got += (got.empty() ? "" : ",") + format_real(v);
      fail("speed trace mismatch, got [" + got + "]");
    }
  }
  if (!r.hazard_order_ok) fail("moved onto an edge before its hazard prompt");
  if (!r.expectation_failures.empty()) {
    // tail of the transcript for context
    const std::size_t from = r.transcript.size() > 12 ? r.transcript.size() - 12 : 0;
    for (std::size_t i = from; i < r.transcript.size(); ++i) r.expectation_failures.push_back("  | " + r.transcript[i]);
  }
}

}  // namespace

RunReport run_scenario(const ScenarioSpec& spec, std::uint64_t seed, const GatewayFactory& factory) {
  RunReport r;
  r.scenario = spec.name;
  r.seed = seed;
  r.final_node = spec.start.node;

  if (spec.no_system_prompt && spec.gateway == GatewayMode::kMock) {
    r.skipped = true;
    r.skip_reason = "no_system_prompt is a remote-only ablation";
    return r;
  }
  const std::uint64_t rs = run_seed_for(spec, seed);
  std::unique_ptr<Gateway> gateway = factory(spec, rs);
  if (!gateway) {
    r.skipped = true;
    r.skip_reason = "remote gateway not configured";
    return r;
  }

  const TopoMap map = load_map_file(spec.map_path.string());
  const VectorStore env = spec.store_path.empty() ? build_environment_store(map, spec.store_sigma)
                                                  : load_store(spec.store_path.string(), StoreKind::kEnvironment);
  SimWorld world(map, spec.start, spec.objects, spec.faults, rs, spec.appearance);
  const AgentDeps deps{map, env, *gateway, !spec.no_planner};
  AgentState state = AgentState::start_at(spec.start.node, spec.start.heading, spec.prefs);

  const bool has_kidnap =
      std::any_of(spec.faults.begin(), spec.faults.end(), [](const FaultSpec& f) { return std::holds_alternative<Kidnap>(f); });
  bool detected = false;
  bool first_check_pending = false;
  bool reloc_ok = false;
  bool prompted = false;
  std::set<EdgeKey> moved_edges;
  std::optional<SessionResult> result;

  std::deque<AgentEvent> queue;
  queue.push_back(world.observe());
  std::size_t script_i = 0;
  int handled = 0;

  while (true) {
    AgentEvent event;
    if (script_i < spec.script.size() && (spec.script[script_i].at_event <= handled || queue.empty())) {
      event = UserUtterance{spec.script[script_i++].text};
    } else if (!queue.empty()) {
      event = std::move(queue.front());
      queue.pop_front();
    } else {
      break;
    }
    if (handled >= kStepLimit) {
      result = SessionResult{false, "step_limit"};
      r.transcript.push_back("! step limit reached");
      break;
    }

    r.transcript.push_back("> " + describe(event));
    const AgentState prev = state;
    auto [next, outputs] = handle_event(state, event, deps);
    state = std::move(next);
    ++handled;

    if (std::holds_alternative<UserUtterance>(event)) r.speed_trace.push_back(state.prefs.speed_mps);
    if (const auto bad = check_invariants(state)) {
      r.transcript.push_back("! invariant violated: " + *bad);
      result = SessionResult{false, "invariant_violation"};
      r.expectation_failures.push_back("agent invariant violated: " + *bad);
      break;
    }
    if (std::holds_alternative<Observation>(event)) {
      if (prev.phase == Phase::kVerifying) {
        const bool mismatch = state.legs_completed == prev.legs_completed;
        if (first_check_pending) {
          detected = mismatch;
          first_check_pending = false;
        } else if (mismatch && !world.kidnap_fired()) {
          ++r.false_detections;
        }
      }
      if (state.recovery_attempts > prev.recovery_attempts && state.phase != Phase::kFailed) {
        reloc_ok = state.believed_node == world.pose().node && state.believed_heading == world.pose().heading;
      }
    }
    if (state.route && state.leg_index == 0 &&
        (!prev.route || prev.route->node_sequence() != state.route->node_sequence() || prev.leg_index != 0)) {
      r.routes.push_back(AdoptedRoute{state.route->node_sequence(), state.route->total_distance, state.prefs.avoid_tags});
    }

    for (const auto& out : outputs) {
      r.transcript.push_back("< " + describe(out));
      if (const auto* move = std::get_if<MoveCommand>(&out)) {
        const Pose before = world.pose();
        const Edge* edge = map.edge_towards(before.node, apply_turn(before.heading, move->turn));
        MoveResult mr = world.execute(*move);
        if (std::holds_alternative<ArrivalReport>(mr.event) && edge) moved_edges.insert({edge->from, edge->to});
        std::ostringstream line;
        line << "  world: " << pose_text(before) << " -> " << pose_text(world.pose())
             << " t=" << format_real(world.clock_s());
        if (mr.kidnapped) {
          line << " (teleported)";
          first_check_pending = true;
        }
        r.transcript.push_back(line.str());
        queue.push_back(std::move(mr.event));
      } else if (std::get_if<QueryImages>(&out)) {
        queue.push_back(world.observe());
      } else if (const auto* prompt = std::get_if<HazardPrompt>(&out)) {
        prompted = true;
        if (moved_edges.contains(prompt->edge)) r.hazard_order_ok = false;
        HazardChoice choice = HazardChoice::kProceed;
        switch (spec.hazard_response) {
          case HazardResponse::kAuto:
            choice = prompt->alternative ? HazardChoice::kReroute : HazardChoice::kProceed;
            break;
          case HazardResponse::kProceed: choice = HazardChoice::kProceed; break;
          case HazardResponse::kReroute: choice = HazardChoice::kReroute; break;
        }
        queue.push_back(UserDecision{prompt->prompt_id, choice});
      } else if (const auto* res = std::get_if<SessionResult>(&out)) {
        result = *res;
      }
    }
  }

  r.final_node = world.pose().node;
  r.route_length = world.odometer();
  r.sim_time_s = world.clock_s();
  if (result) {
    r.success = result->success;
    r.result_reason = result->reason;
  } else {
    r.result_reason = "no_result";
  }
  if (r.success && state.goal && world.pose().node != *state.goal) {
    r.success = false;
    r.result_reason = "arrived_at_wrong_node";
  }
  if (has_kidnap) {
    r.detected_kidnap = detected && world.kidnap_fired();
    r.recovered = *r.detected_kidnap && reloc_ok && r.success;
  }
  if (spec.expected.hazard_ground_truth) {
    Confusion c;
    const bool truth = *spec.expected.hazard_ground_truth;
    if (truth && prompted) c.tp = 1;
    if (!truth && prompted) c.fp = 1;
    if (truth && !prompted) c.fn = 1;
    if (!truth && !prompted) c.tn = 1;
    r.hazard_confusion = c;
  }
  check_expectations(spec, r);
  return r;
}

SuiteReport run_specs(const std::vector<ScenarioSpec>& specs, int repetitions, std::uint64_t seed_base,
                      const GatewayFactory& factory) {
  if (specs.empty()) throw ScenarioError("suite contains no scenarios");
  if (repetitions < 1) throw ScenarioError("repetitions must be >= 1");
  const long total = static_cast<long>(specs.size()) * repetitions;
  std::vector<RunReport> runs(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < total; ++i) {
    const auto& spec = specs[static_cast<std::size_t>(i / repetitions)];
    const std::uint64_t seed = seed_base + static_cast<std::uint64_t>(i % repetitions);
    try {
      runs[static_cast<std::size_t>(i)] = run_scenario(spec, seed, factory);
    } catch (const std::exception& e) {
      RunReport& r = runs[static_cast<std::size_t>(i)];
      r.scenario = spec.name;
      r.seed = seed;
      r.result_reason = "error";
      r.expectation_failures.push_back(std::string("run aborted: ") + e.what());
    }
  }
  return aggregate(std::move(runs));
}

SuiteReport run_suite(const std::filesystem::path& dir, int repetitions, std::uint64_t seed_base,
                      const GatewayFactory& factory) {
  if (!std::filesystem::is_directory(dir)) throw ScenarioError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ScenarioSpec> specs;
  for (const auto& f : files) specs.push_back(load_scenario(f));
  if (specs.empty()) throw ScenarioError("no scenarios in " + dir.string());
  return run_specs(specs, repetitions, seed_base, factory);
}

SuiteReport aggregate(std::vector<RunReport> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunReport& a, const RunReport& b) {
    return std::tie(a.scenario, a.seed) < std::tie(b.scenario, b.seed);
  });
  SuiteReport report;
  report.total.scenario = "TOTAL";
  for (const auto& r : runs) {
    if (report.rows.empty() || report.rows.back().scenario != r.scenario) {
      report.rows.push_back(ScenarioRow{});
      report.rows.back().scenario = r.scenario;
    }
    for (ScenarioRow* row : {&report.rows.back(), &report.total}) {
      ++row->runs;
      if (!r.expectation_failures.empty()) ++row->expectation_failures;
      if (r.skipped) {
        ++row->skipped;
        continue;
      }
      if (r.success) ++row->successes;
      if (r.detected_kidnap) {
        ++row->kidnapped;
        if (*r.detected_kidnap) ++row->detected;
        if (r.recovered.value_or(false)) ++row->recovered;
      }
      if (r.hazard_confusion) {
        ++row->hazard_trials;
        row->confusion += *r.hazard_confusion;
      }
    }
  }
  report.runs = std::move(runs);
  return report;
}

std::string format_rate(int n, int d) {
  if (d == 0) return std::to_string(n) + "/0 (n/a)";
  const long pct = std::lround(100.0 * n / d);
  return std::to_string(n) + "/" + std::to_string(d) + " (" + std::to_string(pct) + "%)";
}

std::string report_metrics_text(const SuiteReport& report) {
  std::size_t w = 8;
  for (const auto& row : report.rows) w = std::max(w, row.scenario.size());
  w += 2;
  std::ostringstream os;
  auto all_rows = report.rows;
  all_rows.push_back(report.total);

  os << "Navigation\n";
  os << std::left << std::setw(static_cast<int>(w)) << "scenario" << std::setw(7) << "runs" << std::setw(16)
     << "success" << "skipped\n";
  for (const auto& row : all_rows) {
    os << std::left << std::setw(static_cast<int>(w)) << row.scenario << std::setw(7) << row.runs << std::setw(16)
       << format_rate(row.successes, row.runs - row.skipped) << row.skipped << "\n";
  }

  if (report.total.kidnapped > 0) {
    os << "\nLocalization\n";
    os << std::left << std::setw(static_cast<int>(w)) << "scenario" << std::setw(11) << "kidnapped" << std::setw(16)
       << "detection" << "recovery\n";
    for (const auto& row : all_rows) {
      if (row.kidnapped == 0) continue;
      os << std::left << std::setw(static_cast<int>(w)) << row.scenario << std::setw(11) << row.kidnapped
         << std::setw(16) << format_rate(row.detected, row.kidnapped) << format_rate(row.recovered, row.kidnapped)
         << "\n";
    }
  }

  if (report.total.hazard_trials > 0) {
    os << "\nHazard\n";
    os << std::left << std::setw(static_cast<int>(w)) << "scenario" << std::setw(8) << "trials" << std::setw(6) << "TP"
       << std::setw(6) << "FP" << std::setw(6) << "FN" << "TN\n";
    for (const auto& row : all_rows) {
      if (row.hazard_trials == 0) continue;
      os << std::left << std::setw(static_cast<int>(w)) << row.scenario << std::setw(8) << row.hazard_trials
         << std::setw(6) << row.confusion.tp << std::setw(6) << row.confusion.fp << std::setw(6) << row.confusion.fn
         << row.confusion.tn << "\n";
    }
  }
  if (report.total.expectation_failures > 0) {
    os << "\nExpectation failures: " << report.total.expectation_failures << "\n";
  }
  return os.str();
}

namespace {

json row_json(const ScenarioRow& row) {
  json j{{"scenario", row.scenario},
         {"runs", row.runs},
         {"skipped", row.skipped},
         {"successes", row.successes},
         {"expectation_failures", row.expectation_failures}};
  if (row.kidnapped > 0) {
    j["kidnapped"] = row.kidnapped;
    j["detected"] = row.detected;
    j["recovered"] = row.recovered;
  }
  if (row.hazard_trials > 0) {
    j["hazard_trials"] = row.hazard_trials;
    j["confusion"] = {{"TP", row.confusion.tp}, {"FP", row.confusion.fp}, {"FN", row.confusion.fn}, {"TN", row.confusion.tn}};
  }
  return j;
}

}  // namespace

json run_report_json(const RunReport& r) {
  json j{{"scenario", r.scenario},
         {"seed", r.seed},
         {"skipped", r.skipped},
         {"success", r.success},
         {"result_reason", r.result_reason},
         {"final_node", r.final_node.str()},
         {"route_length", r.route_length},
         {"sim_time_s", r.sim_time_s},
         {"false_detections", r.false_detections},
         {"hazard_order_ok", r.hazard_order_ok},
         {"speed_trace", r.speed_trace},
         {"expectation_failures", r.expectation_failures},
         {"transcript", r.transcript}};
  if (r.skipped) j["skip_reason"] = r.skip_reason;
  if (r.detected_kidnap) j["detected_kidnap"] = *r.detected_kidnap;
  if (r.recovered) j["recovered"] = *r.recovered;
  if (r.hazard_confusion) {
    const auto& c = *r.hazard_confusion;
    j["hazard_confusion"] = {{"TP", c.tp}, {"FP", c.fp}, {"FN", c.fn}, {"TN", c.tn}};
  }
  json routes = json::array();
  for (const auto& route : r.routes) {
    std::vector<std::string> nodes;
    for (const auto& n : route.nodes) nodes.push_back(n.str());
    routes.push_back({{"nodes", nodes},
                      {"distance", route.distance},
                      {"avoid_tags", std::vector<std::string>(route.avoid_tags.begin(), route.avoid_tags.end())}});
  }
  j["routes"] = routes;
  return j;
}

json report_metrics_json(const SuiteReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) rows.push_back(row_json(row));
  json runs = json::array();
  for (const auto& r : report.runs) {
    json j = run_report_json(r);
    j.erase("transcript");
    runs.push_back(std::move(j));
  }
  return {{"scenarios", rows}, {"total", row_json(report.total)}, {"runs", runs}};
}

}  // namespace guide
