#include "guide/remote_gateway.hpp"

#include <cstdlib>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace guide {

using nlohmann::json;

namespace {

constexpr std::string_view kPromptTemplate =
#include "prompt_template.inc"
    ;

json object_schema(json properties, std::vector<std::string> required) {
  return {{"type", "object"},
          {"properties", std::move(properties)},
          {"required", std::move(required)},
          {"additionalProperties", false}};
}

std::vector<ToolSchema> make_schemas() {
  std::vector<ToolSchema> tools;
  tools.push_back({"plan_route", "Plan a route from the robot's current place to a destination on the map.",
                   object_schema({{"destination", {{"type", "string"}, {"minLength", 1}}},
                                  {"nodes", {{"type", "array"}, {"items", {{"type", "string"}, {"minLength", 1}}}}}},
                                 {"destination"})});
  tools.push_back({"query_images", "Look up reference images to check where the robot is.",
                   object_schema({{"store", {{"type", "string"}, {"enum", {"environment", "navigational"}}}},
                                  {"node", {{"type", "string"}}},
                                  {"orientation", {{"type", "integer"}, {"enum", {0, 90, 180, 270}}}}},
                                 {"store"})});
  tools.push_back({"send_user_message", "Say something to the user.",
                   object_schema({{"text", {{"type", "string"}, {"minLength", 1}}}}, {"text"})});
  tools.push_back({"issue_move", "Turn and walk one leg of the route.",
                   object_schema({{"turn", {{"type", "string"}, {"enum", {"straight", "left", "right", "turn_around"}}}},
                                  {"distance", {{"type", "number"}, {"minimum", 0}}},
                                  {"speed_mps", {{"type", "number"}, {"minimum", 0.3}, {"maximum", 2.0}}}},
                                 {"turn", "distance"})});
  tools.push_back(
      {"set_preference", "Change a user preference for this session.",
       object_schema({{"kind", {{"type", "string"},
                                {"enum", {"avoid_tag", "clear_avoid_tag", "speed", "faster", "slower", "verbosity"}}}},
                      {"tag", {{"type", "string"}, {"minLength", 1}}},
                      {"speed_mps", {{"type", "number"}, {"minimum", 0}}},
                      {"verbosity", {{"type", "string"}, {"enum", {"brief", "detailed"}}}}},
                     {"kind"})});
  tools.push_back({"hazard_decision", "Record the user's answer to a hazard warning.",
                   object_schema({{"choice", {{"type", "string"}, {"enum", {"proceed", "reroute"}}}}}, {"choice"})});
  tools.push_back({"report_hazard", "Report whether the objects ahead are a hazard.",
                   object_schema({{"hazardous", {{"type", "boolean"}}},
                                  {"reason", {{"type", "string"}}},
                                  {"confidence", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}}},
                                 {"hazardous", "reason"})});
  return tools;
}

std::string type_of(const json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  return "null";
}

bool type_matches(const std::string& want, const json& v) {
  const std::string got = type_of(v);
  if (want == "number") return got == "number" || got == "integer";
  if (want == "integer" && got == "number") {
    const double d = v.get<double>();
    return d == static_cast<double>(static_cast<long long>(d));
  }
  return want == got;
}

struct SplitUrl {
  std::string base;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw GatewayError("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string tools_text() {
  std::string s;
  for (const auto& t : tool_schemas()) s += "- " + t.name + ": " + t.description + " " + t.parameters.dump() + "\n";
  return s;
}

}  // namespace

const std::vector<ToolSchema>& tool_schemas() {
  static const std::vector<ToolSchema> tools = make_schemas();
  return tools;
}

const ToolSchema* find_tool(std::string_view name) {
  for (const auto& t : tool_schemas()) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

json tool_schemas_json() {
  json out = json::array();
  for (const auto& t : tool_schemas()) {
    out.push_back({{"type", "function"},
                   {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
  }
  return out;
}

std::vector<ChatMessage> PromptBundle::messages() const {
  std::vector<ChatMessage> out{{"system", system_prompt}};
  out.insert(out.end(), conversation.begin(), conversation.end());
  return out;
}

std::string_view system_prompt_template() { return kPromptTemplate; }

std::string render_system_prompt(std::string_view tmpl, std::string_view map_text, std::string_view route_text) {
  std::string out(tmpl);
  auto replace = [&out](std::string_view key, std::string_view value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace("{{MAP}}", map_text);
  replace("{{ROUTE}}", route_text);
  replace("{{TOOLS}}", tools_text());
  return out;
}

std::optional<std::string> validate_json(const json& schema, const json& value, const std::string& path) {
  if (schema.contains("type") && !type_matches(schema["type"].get<std::string>(), value)) {
    return path + ": expected " + schema["type"].get<std::string>() + ", got " + type_of(value);
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& option : schema["enum"]) found = found || option == value;
    if (!found) return path + ": value not in enum";
  }
  if (value.is_number()) {
    const double d = value.get<double>();
    if (schema.contains("minimum") && d < schema["minimum"].get<double>()) return path + ": below minimum";
    if (schema.contains("maximum") && d > schema["maximum"].get<double>()) return path + ": above maximum";
  }
  if (value.is_string() && schema.contains("minLength") &&
      value.get<std::string>().size() < schema["minLength"].get<std::size_t>()) {
    return path + ": string too short";
  }
  if (value.is_object()) {
    const json props = schema.value("properties", json::object());
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!value.contains(key.get<std::string>())) return path + ": missing " + key.get<std::string>();
      }
    }
    for (const auto& [key, v] : value.items()) {
      if (props.contains(key)) {
        if (auto err = validate_json(props[key], v, path + "." + key)) return err;
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        return path + ": unexpected property " + key;
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (auto err = validate_json(schema["items"], value[i], path + "[" + std::to_string(i) + "]")) return err;
    }
  }
  return std::nullopt;
}

std::optional<EndpointConfig> EndpointConfig::from_env() {
  const char* url = std::getenv("GUIDE_LLM_ENDPOINT");
  if (url == nullptr || *url == '\0') return std::nullopt;
  EndpointConfig c;
  c.url = url;
  const char* model = std::getenv("GUIDE_LLM_MODEL");
  c.model = model != nullptr ? model : "gpt-4o";
  const char* key = std::getenv("GUIDE_LLM_API_KEY");
  c.api_key = key != nullptr ? key : "";
  return c;
}

json build_request(const PromptBundle& bundle, const std::string& model) {
  json messages = json::array();
  for (const auto& m : bundle.messages()) messages.push_back({{"role", m.role}, {"content", m.content}});
  json tools = json::array();
  for (const auto& t : bundle.tools) {
    tools.push_back({{"type", "function"},
                     {"function", {{"name", t.name}, {"description", t.description}, {"parameters", t.parameters}}}});
  }
  json req{{"model", model}, {"messages", messages}, {"temperature", 0}};
  if (!tools.empty()) {
    req["tools"] = tools;
    req["tool_choice"] = "auto";
  }
  return req;
}

Completion parse_completion(const json& body) {
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    throw GatewayError("response has no choices");
  }
  const json& msg = body["choices"][0].value("message", json::object());
  Completion c;
  if (msg.contains("content") && msg["content"].is_string()) c.content = msg["content"].get<std::string>();
  if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
    const json& fn = msg["tool_calls"][0].value("function", json::object());
    if (!fn.contains("name") || !fn["name"].is_string()) throw GatewayError("tool call without a name");
    ToolCall call;
    call.name = fn["name"].get<std::string>();
    const json args = fn.value("arguments", json("{}"));
    if (args.is_string()) {
      call.arguments = json::parse(args.get<std::string>(), nullptr, false);
      if (call.arguments.is_discarded()) call.arguments = json(args.get<std::string>());
    } else {
      call.arguments = args;
    }
    c.tool_call = std::move(call);
  }
  if (!c.content && !c.tool_call) throw GatewayError("response has neither content nor a tool call");
  return c;
}

Completion remote_complete(const PromptBundle& bundle, const EndpointConfig& config) {
  const SplitUrl url = split_url(config.url);
  const std::string body = build_request(bundle, config.model).dump();
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

  std::string last_error;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config.base_backoff * (1 << (attempt - 1)));
    httplib::Client client(url.base);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw GatewayError("HTTP " + std::to_string(res->status) + ": " + res->body);
    const json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw GatewayError("response body is not JSON");
    return parse_completion(parsed);
  }
  throw GatewayError("endpoint unavailable after " + std::to_string(config.max_attempts) + " attempts (" + last_error +
                     ")");
}

Intent intent_from_tool_call(const ToolCall& call, const TopoMap& map, std::string* diagnostic) {
  auto reject = [&](std::string why) {
    if (diagnostic != nullptr) *diagnostic = call.name + ": " + why;
    return Intent::unknown();
  };
  const ToolSchema* tool = find_tool(call.name);
  if (tool == nullptr) return reject("unknown tool");
  if (auto err = validate_json(tool->parameters, call.arguments)) return reject(*err);
  const json& a = call.arguments;

  if (call.name == "plan_route") {
    const std::string place = a["destination"].get<std::string>();
    return Intent::navigate_to(resolve_place(place, map), place);
  }
  if (call.name == "set_preference") {
    const std::string kind = a["kind"].get<std::string>();
    if (kind == "avoid_tag" || kind == "clear_avoid_tag") {
      if (!a.contains("tag")) return reject("tag required for " + kind);
      const std::string tag = resolve_tag(a["tag"].get<std::string>(), map);
      return kind == "avoid_tag" ? Intent::set_avoid_tag(tag) : Intent::clear_avoid_tag(tag);
    }
    if (kind == "speed") {
      if (!a.contains("speed_mps") || !(a["speed_mps"].get<double>() > 0)) return reject("positive speed_mps required");
      return Intent::set_speed(a["speed_mps"].get<double>());
    }
    if (kind == "faster") return Intent::adjust_speed(SpeedDelta::kFaster);
    if (kind == "slower") return Intent::adjust_speed(SpeedDelta::kSlower);
    if (!a.contains("verbosity")) return reject("verbosity required");
    return Intent::set_verbosity(verbosity_from_string(a["verbosity"].get<std::string>()));
  }
  if (call.name == "hazard_decision") return Intent::hazard_decision(hazard_choice_from_string(a["choice"].get<std::string>()));
  if (call.name == "query_images") return Intent::ask_status();
  if (call.name == "send_user_message") return Intent::unknown(a["text"].get<std::string>());
  return reject("not a user intent");
}

RemoteGateway::RemoteGateway(EndpointConfig config, RemoteOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  if (config_.max_attempts < 1) throw std::invalid_argument("max_attempts must be >= 1");
}

PromptBundle RemoteGateway::bundle_for(std::string_view map_text, std::string user_text) const {
  PromptBundle b;
  if (options_.system_prompt) b.system_prompt = render_system_prompt(system_prompt_template(), map_text, options_.route_text);
  b.conversation.push_back({"user", std::move(user_text)});
  b.tools = tool_schemas();
  return b;
}

Intent RemoteGateway::interpret_query(std::string_view utterance, const TopoMap& map) {
  if (utterance.empty()) throw std::invalid_argument("utterance must not be empty");
  const Completion c = remote_complete(bundle_for(serialize_map(map), std::string(utterance)), config_);
  if (!c.tool_call) return Intent::unknown(c.content);
  std::string diag;
  Intent intent = intent_from_tool_call(*c.tool_call, map, &diag);
  if (!diag.empty()) diagnostics_.push_back(diag);
  return intent;
}

HazardVerdict RemoteGateway::classify_hazard(const std::vector<std::string>& labels, std::string_view context) {
  if (labels.empty()) throw std::invalid_argument("labels must not be empty");
  std::string text = "Objects ahead (" + std::string(context) + "):";
  for (const auto& l : labels) text += " " + l;
  text += ". Call report_hazard.";
  try {
    const Completion c = remote_complete(bundle_for("", text), config_);
    if (c.tool_call && c.tool_call->name == "report_hazard") {
      const ToolSchema* tool = find_tool("report_hazard");
      if (auto err = validate_json(tool->parameters, c.tool_call->arguments)) {
        diagnostics_.push_back("report_hazard: " + *err);
      } else {
        const json& a = c.tool_call->arguments;
        return HazardVerdict{a["hazardous"].get<bool>(), a["reason"].get<std::string>(), a.value("confidence", 0.5)};
      }
    } else {
      diagnostics_.push_back("classify_hazard: no report_hazard call");
    }
  } catch (const GatewayError& e) {
    diagnostics_.push_back(std::string("classify_hazard: ") + e.what());
  }
  return rule_table_verdict(labels);
}

std::optional<std::vector<NodeId>> RemoteGateway::infer_route(std::string_view map_text, const NodeId& start,
                                                              const NodeId& goal) {
  const std::string text = "The path planner is unavailable. Give the full node sequence from " + start.str() + " to " +
                           goal.str() + " via plan_route.nodes.";
  try {
    const Completion c = remote_complete(bundle_for(map_text, text), config_);
    if (!c.tool_call || c.tool_call->name != "plan_route" || !c.tool_call->arguments.contains("nodes")) {
      return std::nullopt;
    }
    if (auto err = validate_json(find_tool("plan_route")->parameters, c.tool_call->arguments)) {
      diagnostics_.push_back("plan_route: " + *err);
      return std::nullopt;
    }
    std::vector<NodeId> nodes;
    for (const auto& n : c.tool_call->arguments["nodes"]) {
      const std::string s = n.get<std::string>();
      if (!NodeId::is_valid_token(s)) return std::nullopt;
      nodes.emplace_back(s);
    }
    return nodes;
  } catch (const GatewayError& e) {
    diagnostics_.push_back(std::string("infer_route: ") + e.what());
    return std::nullopt;
  }
}

}  // namespace guide
