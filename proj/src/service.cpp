#include "guide/service.hpp"

#include <deque>
#include <iomanip>
#include <sstream>

#include <httplib.h>

namespace guide {

using nlohmann::json;

namespace {

json pose_json(const NodeId& node, Heading heading) { return {{"node", node.str()}, {"heading", heading.degrees()}}; }

json route_json(const Route& r) {
  std::vector<std::string> nodes;
  for (const auto& n : r.node_sequence()) nodes.push_back(n.str());
  json legs = json::array();
  for (const auto& leg : r.legs) {
    legs.push_back({{"turn", to_string(leg.turn)},
                    {"from", leg.edge.from.str()},
                    {"to", leg.to.str()},
                    {"to_name", leg.to_name},
                    {"distance", leg.distance},
                    {"direction", leg.absolute_direction.degrees()}});
  }
  return {{"start", r.start.str()}, {"goal", r.goal.str()},       {"goal_name", r.goal_name}, {"nodes", nodes},
          {"legs", legs},           {"total_distance", r.total_distance}, {"description", r.description}};
}

json prefs_json(const SessionPrefs& p) {
  return {{"avoid_tags", std::vector<std::string>(p.avoid_tags.begin(), p.avoid_tags.end())},
          {"speed_mps", p.speed_mps},
          {"verbosity", to_string(p.verbosity)}};
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

NodeId known_node(const json& v, const TopoMap& map, const char* what) {
  if (!v.is_string() || !map.has_node(NodeId(v.get<std::string>()))) {
    throw ApiError(400, "invalid_config", std::string("unknown node in ") + what);
  }
  return NodeId(v.get<std::string>());
}

Heading heading_of(const json& v) {
  try {
    return Heading::from_degrees(v.get<int>());
  } catch (const std::exception&) {
    throw ApiError(400, "invalid_config", "heading must be one of 0, 90, 180, 270");
  }
}

}  // namespace

json ServiceEvent::to_json() const { return {{"seq", seq}, {"type", type}, {"data", data}, {"ts", ts_ms}}; }

json map_document(const std::string& id, const TopoMap& map) {
  json nodes = json::array();
  for (const auto& [nid, n] : map.nodes()) {
    json j{{"id", nid.str()},
           {"x", n.position.x},
           {"y", n.position.y},
           {"tags", std::vector<std::string>(n.tags.begin(), n.tags.end())},
           {"name", n.display_name()}};
    if (n.label) j["label"] = *n.label;
    nodes.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& [key, e] : map.edges()) {
    edges.push_back({{"from", e.from.str()},
                     {"to", e.to.str()},
                     {"distance", e.distance},
                     {"direction", e.direction.degrees()},
                     {"tags", std::vector<std::string>(e.tags.begin(), e.tags.end())},
                     {"blocked", e.blocked}});
  }
  return {{"id", id}, {"name", map.name}, {"nodes", nodes}, {"edges", edges}, {"text", serialize_map(map)}};
}

struct SessionManager::Session {
  std::string id;
  std::shared_ptr<const MapEntry> entry;
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<SimWorld> world;
  AgentState state;
  std::vector<ServiceEvent> log;
  Clock::time_point last_active;
  bool closed = false;
  mutable std::mutex mutex;
  mutable std::condition_variable cv;

  void emit(std::string type, json data) {
    log.push_back(ServiceEvent{log.size() + 1, std::move(type), std::move(data), now_ms()});
  }

  json pose_data() const {
    return {{"believed", pose_json(state.believed_node, state.believed_heading)},
            {"true", pose_json(world->pose().node, world->pose().heading)},
            {"phase", to_string(state.phase)},
            {"odometer", world->odometer()},
            {"sim_time_s", world->clock_s()}};
  }

  // Runs the agent until it waits on the user again.
  void drive(AgentEvent first) {
    const AgentDeps deps{entry->map, entry->environment, *gateway, true};
    std::deque<AgentEvent> queue{std::move(first)};
    int steps = 0;
    while (!queue.empty() && steps++ < 5000) {
      AgentEvent event = std::move(queue.front());
      queue.pop_front();
      const AgentState prev = state;
      auto [next, outputs] = handle_event(state, event, deps);
      state = std::move(next);

      if (state.route && state.leg_index == 0 &&
          (!prev.route || prev.route->node_sequence() != state.route->node_sequence() || prev.leg_index != 0)) {
        const bool changed = prev.route.has_value() || prev.phase == Phase::kRecovering;
        emit(changed ? "route_changed" : "route_planned", route_json(*state.route));
      }
      if (state.recovery_attempts > prev.recovery_attempts) {
        emit("recovery", {{"success", state.phase != Phase::kFailed},
                          {"believed", pose_json(state.believed_node, state.believed_heading)}});
      }
      if (prev.believed_node != state.believed_node || !(prev.believed_heading == state.believed_heading)) {
        emit("pose_update", pose_data());
      }

      for (auto& out : outputs) {
        if (const auto* say = std::get_if<Say>(&out)) {
          emit("chat_message", {{"role", "assistant"}, {"text", say->text}, {"prefs", prefs_json(state.prefs)}});
        } else if (const auto* move = std::get_if<MoveCommand>(&out)) {
          MoveResult r = world->execute(*move);
          emit("pose_update", pose_data());
          queue.push_back(std::move(r.event));
        } else if (std::get_if<QueryImages>(&out)) {
          queue.push_back(world->observe());
        } else if (const auto* p = std::get_if<HazardPrompt>(&out)) {
          json j{{"prompt_id", p->prompt_id},
                 {"reason", p->verdict.reason},
                 {"confidence", p->verdict.confidence},
                 {"edge", {p->edge.first.str(), p->edge.second.str()}}};
          j["alternative"] = p->alternative ? route_json(*p->alternative) : json(nullptr);
          emit("hazard_prompt", std::move(j));
        } else if (const auto* res = std::get_if<SessionResult>(&out)) {
          if (res->success) {
            emit("arrival", {{"node", world->pose().node.str()},
                             {"name", entry->map.node(world->pose().node).display_name()}});
          }
          emit("session_result", {{"success", res->success}, {"reason", res->reason}});
          closed = true;
        }
      }
    }
    cv.notify_all();
  }
};

SessionManager::SessionManager(ServiceConfig config) : config_(std::move(config)) {
  if (!config_.gateway_factory) {
    config_.gateway_factory = [](std::uint64_t seed) {
      ConfusionConfig c;
      c.seed = seed;
      return std::make_unique<MockGateway>(c);
    };
  }
}

SessionManager::~SessionManager() { shutdown(); }

void SessionManager::add_map(const std::string& id, MapEntry entry) {
  std::lock_guard lock(mutex_);
  maps_[id] = std::make_shared<const MapEntry>(std::move(entry));
}

std::vector<std::string> SessionManager::map_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : maps_) ids.push_back(id);
  return ids;
}

json SessionManager::get_map(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = maps_.find(id);
  if (it == maps_.end()) throw ApiError(404, "unknown_map", "no map named " + id);
  return map_document(id, it->second->map);
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "unknown_session", "no session " + id);
  return it->second;
}

std::string SessionManager::create_session(const json& config) {
  if (!config.is_object()) throw ApiError(400, "invalid_config", "session config must be an object");
  if (!config.contains("map") || !config["map"].is_string()) throw ApiError(400, "invalid_config", "map is required");
  std::shared_ptr<const MapEntry> entry;
  {
    std::lock_guard lock(mutex_);
    const auto it = maps_.find(config["map"].get<std::string>());
    if (it == maps_.end()) throw ApiError(404, "unknown_map", "no map named " + config["map"].get<std::string>());
    entry = it->second;
  }
  const TopoMap& map = entry->map;
  if (map.nodes().empty()) throw ApiError(400, "invalid_config", "map has no nodes");

  auto s = std::make_shared<Session>();
  s->entry = entry;
  Pose start{map.nodes().begin()->first, Heading{}};
  if (config.contains("start")) {
    const json& st = config["start"];
    if (!st.is_object()) throw ApiError(400, "invalid_config", "start must be an object");
    start.node = known_node(st.value("node", json()), map, "start");
    if (st.contains("heading")) start.heading = heading_of(st["heading"]);
  }
  SessionPrefs prefs;
  try {
    if (config.contains("prefs")) {
      const json& p = config["prefs"];
      for (const auto& t : p.value("avoid_tags", std::vector<std::string>{})) prefs.avoid_tags.insert(t);
      prefs.speed_mps = p.value("speed_mps", prefs.speed_mps);
      if (p.contains("verbosity")) prefs.verbosity = verbosity_from_string(p["verbosity"].get<std::string>());
    }
    prefs.validate();
  } catch (const ApiError&) {
    throw;
  } catch (const std::exception& e) {
    throw ApiError(400, "invalid_config", e.what());
  }

  std::vector<WorldObject> objects;
  for (const auto& o : config.value("objects", json::array())) {
    const auto edge = o.value("edge", std::vector<std::string>{});
    if (edge.size() != 2 || !map.find_edge(NodeId(edge[0]), NodeId(edge[1]))) {
      throw ApiError(400, "invalid_config", "object must sit on an existing edge");
    }
    objects.push_back({o.value("label", std::string("object")), {NodeId(edge[0]), NodeId(edge[1])},
                       o.value("hazard", false)});
  }
  std::vector<FaultSpec> faults;
  for (const auto& f : config.value("faults", json::array())) {
    const std::string type = f.value("type", std::string());
    if (type == "kidnap") {
      faults.push_back(Kidnap{f.value("trigger_leg", 1), known_node(f.value("teleport_to", json()), map, "kidnap"),
                              heading_of(f.value("heading", json(0)))});
    } else if (type == "noise") {
      faults.push_back(NoiseSigma{f.value("sigma", 0.0)});
    } else {
      throw ApiError(400, "invalid_config", "unknown fault type " + type);
    }
  }
  const std::uint64_t seed = config.value("seed", std::uint64_t{0});
  try {
    s->world = std::make_unique<SimWorld>(map, start, std::move(objects), std::move(faults), seed);
  } catch (const std::invalid_argument& e) {
    throw ApiError(400, "invalid_config", e.what());
  }
  s->gateway = config_.gateway_factory(seed);
  s->state = AgentState::start_at(start.node, start.heading, prefs);
  s->last_active = Clock::now();

  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw ApiError(503, "shutting_down", "service is stopping");
    std::ostringstream id;
    id << "s" << std::setw(6) << std::setfill('0') << next_id_++;
    s->id = id.str();
    sessions_[s->id] = s;
  }
  std::lock_guard lock(s->mutex);
  s->emit("session_created", {{"session_id", s->id},
                              {"map", config["map"]},
                              {"start", pose_json(start.node, start.heading)},
                              {"prefs", prefs_json(prefs)}});
  s->drive(s->world->observe());
  return s->id;
}

void SessionManager::post_query(const std::string& session, const std::string& utterance) {
  auto s = find(session);
  if (utterance.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ApiError(400, "empty_utterance", "utterance must not be empty");
  }
  std::lock_guard lock(s->mutex);
  if (s->closed) throw ApiError(410, "session_expired", "session " + session + " has ended");
  s->last_active = Clock::now();
  s->emit("chat_message", {{"role", "user"}, {"text", utterance}});
  s->drive(UserUtterance{utterance});
}

void SessionManager::post_decision(const std::string& session, int prompt_id, const std::string& choice) {
  auto s = find(session);
  HazardChoice c;
  try {
    c = hazard_choice_from_string(choice);
  } catch (const std::exception&) {
    throw ApiError(400, "invalid_choice", "choice must be proceed or reroute");
  }
  std::lock_guard lock(s->mutex);
  if (s->closed) throw ApiError(410, "session_expired", "session " + session + " has ended");
  if (s->state.pending_prompt != prompt_id) {
    throw ApiError(409, "stale_prompt", "prompt " + std::to_string(prompt_id) + " is not open");
  }
  s->last_active = Clock::now();
  s->drive(UserDecision{prompt_id, c});
}

void SessionManager::post_prefs(const std::string& session, const json& body) {
  auto s = find(session);
  if (!body.is_object()) throw ApiError(400, "invalid_prefs", "prefs body must be an object");
  std::vector<Intent> intents;
  try {
    if (body.contains("avoid_tags")) {
      std::set<std::string> wanted;
      for (const auto& t : body["avoid_tags"]) wanted.insert(t.get<std::string>());
      std::lock_guard lock(s->mutex);
      for (const auto& t : s->state.prefs.avoid_tags) {
        if (!wanted.contains(t)) intents.push_back(Intent::clear_avoid_tag(t));
      }
      for (const auto& t : wanted) {
        if (!s->state.prefs.avoid_tags.contains(t)) intents.push_back(Intent::set_avoid_tag(t));
      }
    }
    if (body.contains("speed_mps")) {
      const double v = body["speed_mps"].get<double>();
      if (!(v > 0)) throw std::invalid_argument("speed_mps must be positive");
      intents.push_back(Intent::set_speed(v));
    }
    if (body.contains("verbosity")) {
      intents.push_back(Intent::set_verbosity(verbosity_from_string(body["verbosity"].get<std::string>())));
    }
  } catch (const std::exception& e) {
    throw ApiError(400, "invalid_prefs", e.what());
  }
  std::lock_guard lock(s->mutex);
  if (s->closed) throw ApiError(410, "session_expired", "session " + session + " has ended");
  s->last_active = Clock::now();
  for (auto& i : intents) s->drive(UserIntent{std::move(i)});
}

json SessionManager::session_state(const std::string& session) const {
  auto s = find(session);
  std::lock_guard lock(s->mutex);
  json j{{"session_id", s->id}, {"closed", s->closed}, {"last_seq", s->log.size()}, {"prefs", prefs_json(s->state.prefs)}};
  j.update(s->pose_data());
  j["route"] = s->state.route ? route_json(*s->state.route) : json(nullptr);
  j["pending_prompt"] = s->state.pending_prompt ? json(*s->state.pending_prompt) : json(nullptr);
  return j;
}

std::vector<ServiceEvent> SessionManager::events_after(const std::string& session, std::uint64_t after) const {
  auto s = find(session);
  std::lock_guard lock(s->mutex);
  if (after >= s->log.size()) return {};
  return {s->log.begin() + static_cast<std::ptrdiff_t>(after), s->log.end()};
}

std::vector<ServiceEvent> SessionManager::wait_events(const std::string& session, std::uint64_t after,
                                                      std::chrono::milliseconds timeout) const {
  auto s = find(session);
  std::unique_lock lock(s->mutex);
  s->cv.wait_for(lock, timeout, [&] { return s->log.size() > after || s->closed || stopping_.load(); });
  if (after >= s->log.size()) return {};
  return {s->log.begin() + static_cast<std::ptrdiff_t>(after), s->log.end()};
}

bool SessionManager::session_closed(const std::string& session) const {
  auto s = find(session);
  std::lock_guard lock(s->mutex);
  return s->closed;
}

int SessionManager::expire_idle(Clock::time_point now) {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [_, s] : sessions_) all.push_back(s);
  }
  int expired = 0;
  for (const auto& s : all) {
    std::lock_guard lock(s->mutex);
    if (s->closed || now - s->last_active < config_.idle_timeout) continue;
    s->closed = true;
    s->emit("session_result", {{"success", false}, {"reason", "expired"}});
    s->cv.notify_all();
    ++expired;
  }
  return expired;
}

void SessionManager::shutdown() {
  stopping_ = true;
  std::lock_guard lock(mutex_);
  for (const auto& [_, s] : sessions_) s->cv.notify_all();
}

// ---- HTTP ----

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& fn) {
  try {
    fn();
  } catch (const ApiError& e) {
    send_json(res, e.status(), {{"code", e.code()}, {"message", e.what()}});
  } catch (const json::exception& e) {
    send_json(res, 400, {{"code", "invalid_json"}, {"message", e.what()}});
  } catch (const std::exception& e) {
    send_json(res, 500, {{"code", "internal"}, {"message", e.what()}});
  }
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  return json::parse(req.body);
}

std::string sse_frame(const ServiceEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + e.to_json().dump() + "\n\n";
}

}  // namespace

HttpService::HttpService(SessionManager& sessions) : sessions_(sessions), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
    res.status = 204;
  });

  s.Get("/api/v1/maps", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, {{"maps", sessions_.map_ids()}}); });
  });
  s.Get(R"(/api/v1/maps/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, sessions_.get_map(req.matches[1])); });
  });
  s.Post("/api/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = sessions_.create_session(body_json(req));
      send_json(res, 201, {{"session_id", id}});
    });
  });
  s.Get(R"(/api/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, sessions_.session_state(req.matches[1])); });
  });
  s.Post(R"(/api/v1/sessions/([^/]+)/query)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = body_json(req);
      if (!body.contains("text") || !body["text"].is_string()) {
        throw ApiError(400, "empty_utterance", "text is required");
      }
      sessions_.post_query(req.matches[1], body["text"].get<std::string>());
      send_json(res, 202, {{"accepted", true}});
    });
  });
  s.Post(R"(/api/v1/sessions/([^/]+)/decision)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = body_json(req);
      if (!body.contains("prompt_id") || !body["prompt_id"].is_number_integer() || !body.contains("choice") ||
          !body["choice"].is_string()) {
        throw ApiError(400, "invalid_decision", "prompt_id and choice are required");
      }
      sessions_.post_decision(req.matches[1], body["prompt_id"].get<int>(), body["choice"].get<std::string>());
      send_json(res, 202, {{"accepted", true}});
    });
  });
  s.Post(R"(/api/v1/sessions/([^/]+)/prefs)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      sessions_.post_prefs(req.matches[1], body_json(req));
      send_json(res, 202, {{"accepted", true}});
    });
  });
  s.Get(R"(/api/v1/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      std::uint64_t after = 0;
      if (req.has_param("after")) {
        after = std::stoull(req.get_param_value("after"));
      } else if (req.has_header("Last-Event-ID")) {
        after = std::stoull(req.get_header_value("Last-Event-ID"));
      }
      auto initial = sessions_.events_after(id, after);
      const bool stream =
          req.get_header_value("Accept").find("text/event-stream") != std::string::npos || req.has_param("stream");
      if (!stream) {
        json events = json::array();
        for (const auto& e : initial) events.push_back(e.to_json());
        send_json(res, 200, {{"events", events}});
        return;
      }
      auto cursor = std::make_shared<std::uint64_t>(after);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, id, cursor](std::size_t, httplib::DataSink& sink) {
        if (stopping_) return false;
        std::vector<ServiceEvent> events;
        try {
          events = sessions_.wait_events(id, *cursor, std::chrono::milliseconds(500));
        } catch (const ApiError&) {
          return false;
        }
        std::string chunk;
        for (const auto& e : events) {
          chunk += sse_frame(e);
          *cursor = e.seq;
        }
        if (chunk.empty()) chunk = ": keep-alive\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
        if (events.empty() && sessions_.session_closed(id)) {
          sink.done();
        }
        return true;
      });
    });
  });
}

int HttpService::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  reaper_ = std::thread([this] {
    std::unique_lock lock(reaper_mutex_);
    while (!reaper_cv_.wait_for(lock, std::chrono::seconds(30), [this] { return stopping_.load(); })) {
      sessions_.expire_idle(SessionManager::Clock::now());
    }
  });
  return bound;
}

void HttpService::stop() {
  {
    std::lock_guard lock(reaper_mutex_);
    if (stopping_) return;
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  server_->stop();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  if (reaper_.joinable()) reaper_.join();
}

}  // namespace guide
