#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "guide/agent.hpp"
#include "guide/simulator.hpp"

namespace httplib {
class Server;
}

namespace guide {

/// Maps onto an HTTP status plus a {code, message} body.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ServiceEvent {
  std::uint64_t seq = 0;
  std::string type;
  nlohmann::json data;
  /// Wall-clock milliseconds; the only nondeterministic field.
  std::int64_t ts_ms = 0;

  nlohmann::json to_json() const;
};

struct MapEntry {
  TopoMap map;
  VectorStore environment{StoreKind::kEnvironment};
};

using SessionGatewayFactory = std::function<std::unique_ptr<Gateway>(std::uint64_t seed)>;

struct ServiceConfig {
  std::chrono::milliseconds idle_timeout = std::chrono::minutes(30);
  SessionGatewayFactory gateway_factory;  // mock when empty
};

/// Node/edge document for drawing a map, plus its canonical text.
nlohmann::json map_document(const std::string& id, const TopoMap& map);

/// Transport-independent session host. Each session owns its world, agent state
/// and append-only event log; requests on one session are serialized.
class SessionManager {
 public:
  using Clock = std::chrono::steady_clock;

  explicit SessionManager(ServiceConfig config = {});
  ~SessionManager();

  void add_map(const std::string& id, MapEntry entry);
  std::vector<std::string> map_ids() const;
  nlohmann::json get_map(const std::string& id) const;

  /// config: {map, start?: {node, heading}, prefs?, seed?, objects?, faults?}
  std::string create_session(const nlohmann::json& config);
  void post_query(const std::string& session, const std::string& utterance);
  void post_decision(const std::string& session, int prompt_id, const std::string& choice);
  /// body: {avoid_tags?: [..] (replaces the set), speed_mps?, verbosity?}
  void post_prefs(const std::string& session, const nlohmann::json& body);
  nlohmann::json session_state(const std::string& session) const;

  std::vector<ServiceEvent> events_after(const std::string& session, std::uint64_t after) const;
  /// Blocks until events past `after` exist, the session ends, `stop` flips or the timeout passes.
  std::vector<ServiceEvent> wait_events(const std::string& session, std::uint64_t after,
                                        std::chrono::milliseconds timeout) const;
  bool session_closed(const std::string& session) const;

  /// Ends sessions idle since before now - idle_timeout with session_result(failure, expired).
  int expire_idle(Clock::time_point now);
  void shutdown();

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const MapEntry>> maps_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::atomic<bool> stopping_{false};
};

/// HTTP front end: /api/v1/... routes, SSE event stream, JSON error bodies.
class HttpService {
 public:
  explicit HttpService(SessionManager& sessions);
  ~HttpService();

  /// Binds and serves on a background thread; returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  void routes();

  SessionManager& sessions_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::thread reaper_;
  std::mutex reaper_mutex_;
  std::condition_variable reaper_cv_;
  std::atomic<bool> stopping_{false};
};

}  // namespace guide
