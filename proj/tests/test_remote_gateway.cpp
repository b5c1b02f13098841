#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "guide/remote_gateway.hpp"

using namespace guide;
using nlohmann::json;

namespace {

TopoMap rectangle() { return load_map_file(std::string(GUIDE_DATA_DIR) + "/maps/rectangle.map"); }

json tool_response(const std::string& name, const std::string& args) {
  return {{"choices",
           json::array({{{"message",
                          {{"role", "assistant"},
                           {"content", nullptr},
                           {"tool_calls", json::array({{{"id", "call_1"},
                                                        {"type", "function"},
                                                        {"function", {{"name", name}, {"arguments", args}}}}})}}}}})}};
}

// Serves canned (status, body) pairs in order and keeps what it received.
class StubEndpoint {
 public:
  StubEndpoint() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mutex_);
      requests_.push_back(json::parse(req.body));
      if (replies_.empty()) {
        res.status = 500;
        return;
      }
      auto [status, body] = replies_.front();
      replies_.pop_front();
      res.status = status;
      res.set_content(body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubEndpoint() {
    server_.stop();
    thread_.join();
  }

  void reply(int status, const std::string& body) {
    std::lock_guard lock(mutex_);
    replies_.emplace_back(status, body);
  }
  void reply(const json& body) { reply(200, body.dump()); }

  std::vector<json> requests() {
    std::lock_guard lock(mutex_);
    return requests_;
  }

  EndpointConfig config() const {
    EndpointConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    c.model = "stub-model";
    c.base_backoff = std::chrono::milliseconds(5);
    c.timeout = std::chrono::milliseconds(3000);
    return c;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mutex_;
  std::deque<std::pair<int, std::string>> replies_;
  std::vector<json> requests_;
};

}  // namespace

TEST(ToolSchemas, SevenToolsWithStrictObjects) {
  const auto& tools = tool_schemas();
  std::vector<std::string> names;
  for (const auto& t : tools) {
    names.push_back(t.name);
    EXPECT_EQ(t.parameters["type"], "object");
    EXPECT_EQ(t.parameters["additionalProperties"], false);
    EXPECT_FALSE(t.description.empty());
    for (const auto& r : t.parameters["required"]) EXPECT_TRUE(t.parameters["properties"].contains(r.get<std::string>()));
  }
  EXPECT_EQ(names, (std::vector<std::string>{"plan_route", "query_images", "send_user_message", "issue_move",
                                             "set_preference", "hazard_decision", "report_hazard"}));
  EXPECT_EQ(find_tool("issue_move"), &tools[3]);
  EXPECT_EQ(find_tool("teleport"), nullptr);
  const json j = tool_schemas_json();
  ASSERT_EQ(j.size(), 7u);
  EXPECT_EQ(j[0]["type"], "function");
  EXPECT_EQ(j[0]["function"]["name"], "plan_route");
}

TEST(ValidateJson, Rules) {
  const json& move = find_tool("issue_move")->parameters;
  EXPECT_FALSE(validate_json(move, {{"turn", "left"}, {"distance", 3}}));
  EXPECT_FALSE(validate_json(move, {{"turn", "left"}, {"distance", 3.5}, {"speed_mps", 0.3}}));
  EXPECT_EQ(validate_json(move, {{"turn", "left"}}), "$: missing distance");
  EXPECT_EQ(validate_json(move, {{"turn", "up"}, {"distance", 3}}), "$.turn: value not in enum");
  EXPECT_EQ(validate_json(move, {{"turn", "left"}, {"distance", -1}}), "$.distance: below minimum");
  EXPECT_EQ(validate_json(move, {{"turn", "left"}, {"distance", 1}, {"speed_mps", 2.5}}), "$.speed_mps: above maximum");
  EXPECT_EQ(validate_json(move, {{"turn", "left"}, {"distance", "far"}}), "$.distance: expected number, got string");
  EXPECT_EQ(validate_json(move, {{"turn", "left"}, {"distance", 1}, {"x", 1}}), "$: unexpected property x");
  EXPECT_EQ(validate_json(move, json::array()), "$: expected object, got array");

  const json& img = find_tool("query_images")->parameters;
  EXPECT_FALSE(validate_json(img, {{"store", "environment"}, {"orientation", 90}}));
  EXPECT_FALSE(validate_json(img, {{"store", "environment"}, {"orientation", 90.0}}));
  EXPECT_EQ(validate_json(img, {{"store", "environment"}, {"orientation", 45}}), "$.orientation: value not in enum");

  const json& route = find_tool("plan_route")->parameters;
  EXPECT_EQ(validate_json(route, {{"destination", ""}}), "$.destination: string too short");
  EXPECT_EQ(validate_json(route, {{"destination", "C"}, {"nodes", {"A", 3}}}), "$.nodes[1]: expected string, got integer");
}

TEST(SystemPrompt, RendersPlaceholders) {
  const std::string_view tmpl = system_prompt_template();
  EXPECT_NE(tmpl.find("system_prompt_v1"), std::string_view::npos);
  EXPECT_NE(tmpl.find("{{MAP}}"), std::string_view::npos);
  const std::string map_text = serialize_map(rectangle());
  const std::string out = render_system_prompt(tmpl, map_text, "A>B>C");
  EXPECT_EQ(out.find("{{"), std::string::npos);
  EXPECT_NE(out.find(map_text), std::string::npos);
  EXPECT_NE(out.find("A>B>C"), std::string::npos);
  for (const auto& t : tool_schemas()) EXPECT_NE(out.find("- " + t.name + ": "), std::string::npos);
  EXPECT_EQ(render_system_prompt("{{MAP}}|{{MAP}}", "m", ""), "m|m");
  EXPECT_EQ(render_system_prompt("{{MAP}}", "{{MAP}}", ""), "{{MAP}}");
}

TEST(Request, BuildAndParse) {
  PromptBundle b;
  b.system_prompt = "sys";
  b.conversation.push_back({"user", "hi"});
  b.tools = tool_schemas();
  const json req = build_request(b, "m1");
  EXPECT_EQ(req["model"], "m1");
  EXPECT_EQ(req["temperature"], 0);
  ASSERT_EQ(req["messages"].size(), 2u);
  EXPECT_EQ(req["messages"][0]["role"], "system");
  EXPECT_EQ(req["messages"][1]["content"], "hi");
  EXPECT_EQ(req["tools"].size(), 7u);

  const Completion c = parse_completion(tool_response("plan_route", R"({"destination":"C"})"));
  ASSERT_TRUE(c.tool_call);
  EXPECT_EQ(c.tool_call->name, "plan_route");
  EXPECT_EQ(c.tool_call->arguments, (json{{"destination", "C"}}));
  EXPECT_FALSE(c.content);

  const Completion text = parse_completion({{"choices", {{{"message", {{"content", "hello"}}}}}}});
  EXPECT_EQ(text.content, "hello");
  EXPECT_THROW(parse_completion(json::object()), GatewayError);
  EXPECT_THROW(parse_completion({{"choices", json::array()}}), GatewayError);
  EXPECT_THROW(parse_completion({{"choices", {{{"message", json::object()}}}}}), GatewayError);
}

TEST(ToolCalls, ToIntent) {
  const TopoMap m = rectangle();
  std::string diag;
  EXPECT_EQ(intent_from_tool_call({"plan_route", {{"destination", "C"}}}, m), Intent::navigate_to(NodeId("C"), "C"));
  EXPECT_EQ(intent_from_tool_call({"set_preference", {{"kind", "slower"}}}, m), Intent::adjust_speed(SpeedDelta::kSlower));
  EXPECT_EQ(intent_from_tool_call({"set_preference", {{"kind", "speed"}, {"speed_mps", 1.2}}}, m), Intent::set_speed(1.2));
  EXPECT_EQ(intent_from_tool_call({"hazard_decision", {{"choice", "reroute"}}}, m),
            Intent::hazard_decision(HazardChoice::kReroute));
  EXPECT_EQ(intent_from_tool_call({"query_images", {{"store", "environment"}}}, m), Intent::ask_status());

  EXPECT_EQ(intent_from_tool_call({"issue_move", {{"turn", "left"}, {"distance", 1}}}, m, &diag), Intent::unknown());
  EXPECT_EQ(diag, "issue_move: not a user intent");
  EXPECT_EQ(intent_from_tool_call({"plan_route", {{"place", "C"}}}, m, &diag), Intent::unknown());
  EXPECT_EQ(diag, "plan_route: $: missing destination");
  EXPECT_EQ(intent_from_tool_call({"fly", json::object()}, m, &diag), Intent::unknown());
  EXPECT_EQ(diag, "fly: unknown tool");
  EXPECT_EQ(intent_from_tool_call({"set_preference", {{"kind", "avoid_tag"}}}, m, &diag), Intent::unknown());
  EXPECT_EQ(diag, "set_preference: tag required for avoid_tag");
}

TEST(RemoteGateway, PlanRouteToolCallBecomesNavigate) {
  StubEndpoint stub;
  stub.reply(tool_response("plan_route", R"({"destination":"C"})"));
  RemoteGateway gw(stub.config());
  const TopoMap m = rectangle();
  EXPECT_EQ(gw.interpret_query("take me to C", m), Intent::navigate_to(NodeId("C"), "C"));
  EXPECT_TRUE(gw.diagnostics().empty());

  const auto reqs = stub.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0]["model"], "stub-model");
  EXPECT_EQ(reqs[0]["messages"][0]["role"], "system");
  EXPECT_NE(reqs[0]["messages"][0]["content"].get<std::string>().find(serialize_map(m)), std::string::npos);
  EXPECT_EQ(reqs[0]["messages"][1]["content"], "take me to C");
  EXPECT_EQ(reqs[0]["tools"].size(), 7u);
}

TEST(RemoteGateway, NoSystemPromptOmitsIt) {
  StubEndpoint stub;
  stub.reply(tool_response("plan_route", R"({"destination":"C"})"));
  RemoteGateway gw(stub.config(), RemoteOptions{false, ""});
  gw.interpret_query("take me to C", rectangle());
  EXPECT_EQ(stub.requests()[0]["messages"][0]["content"], "");
}

TEST(RemoteGateway, MalformedArgumentsGiveUnknownWithDiagnostic) {
  StubEndpoint stub;
  stub.reply(tool_response("plan_route", R"({"destination": 7})"));
  stub.reply(tool_response("plan_route", "not json"));
  RemoteGateway gw(stub.config());
  EXPECT_EQ(gw.interpret_query("go", rectangle()), Intent::unknown());
  EXPECT_EQ(gw.interpret_query("go", rectangle()), Intent::unknown());
  ASSERT_EQ(gw.diagnostics().size(), 2u);
  EXPECT_EQ(gw.diagnostics()[0], "plan_route: $.destination: expected string, got integer");
  EXPECT_EQ(gw.diagnostics()[1], "plan_route: $: expected object, got string");
}

TEST(RemoteGateway, PlainTextReplyIsUnknownWithReply) {
  StubEndpoint stub;
  stub.reply({{"choices", {{{"message", {{"content", "Hello there."}}}}}}});
  RemoteGateway gw(stub.config());
  EXPECT_EQ(gw.interpret_query("hi", rectangle()), Intent::unknown("Hello there."));
}

TEST(RemoteGateway, RetriesThenGivesUp) {
  StubEndpoint stub;
  for (int i = 0; i < 3; ++i) stub.reply(503, "{}");
  RemoteGateway gw(stub.config());
  EXPECT_THROW(gw.interpret_query("go to C", rectangle()), GatewayError);
  EXPECT_EQ(stub.requests().size(), 3u);
}

TEST(RemoteGateway, RetryRecovers) {
  StubEndpoint stub;
  stub.reply(503, "{}");
  stub.reply(429, "{}");
  stub.reply(tool_response("plan_route", R"({"destination":"B"})"));
  RemoteGateway gw(stub.config());
  EXPECT_EQ(gw.interpret_query("go to B", rectangle()).destination, NodeId("B"));
  EXPECT_EQ(stub.requests().size(), 3u);
}

TEST(RemoteGateway, ClientErrorIsNotRetried) {
  StubEndpoint stub;
  stub.reply(400, R"({"error":"bad"})");
  RemoteGateway gw(stub.config());
  EXPECT_THROW(gw.interpret_query("go", rectangle()), GatewayError);
  EXPECT_EQ(stub.requests().size(), 1u);
}

TEST(RemoteGateway, UnreachableEndpoint) {
  EndpointConfig c;
  c.url = "http://127.0.0.1:1/v1/chat/completions";
  c.max_attempts = 2;
  c.base_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(500);
  RemoteGateway gw(c);
  EXPECT_THROW(gw.interpret_query("go", rectangle()), GatewayError);
  c.url = "127.0.0.1/x";
  EXPECT_THROW(RemoteGateway(c).interpret_query("go", rectangle()), GatewayError);
  c.max_attempts = 0;
  EXPECT_THROW(RemoteGateway{c}, std::invalid_argument);
}

TEST(RemoteGateway, HazardFallsBackToRuleTable) {
  StubEndpoint stub;
  stub.reply(tool_response("report_hazard", R"({"hazardous":true,"reason":"slippery","confidence":0.9})"));
  stub.reply(tool_response("report_hazard", R"({"hazardous":"yes"})"));
  RemoteGateway gw(stub.config());
  EXPECT_EQ(gw.classify_hazard({"chair"}, "A->B"), (HazardVerdict{true, "slippery", 0.9}));
  EXPECT_EQ(gw.classify_hazard({"wet_floor_sign"}, "A->B"), rule_table_verdict({"wet_floor_sign"}));
  EXPECT_EQ(gw.diagnostics().size(), 1u);
  // Stub is out of replies now and answers 500.
  EXPECT_EQ(gw.classify_hazard({"chair"}, "A->B"), rule_table_verdict({"chair"}));
  EXPECT_EQ(gw.diagnostics().size(), 2u);
}

TEST(RemoteGateway, InferRoute) {
  StubEndpoint stub;
  stub.reply(tool_response("plan_route", R"({"destination":"C","nodes":["A","B","C"]})"));
  stub.reply(tool_response("plan_route", R"({"destination":"C"})"));
  stub.reply(tool_response("plan_route", R"({"destination":"C","nodes":["A","b c"]})"));
  RemoteGateway gw(stub.config());
  const std::string text = serialize_map(rectangle());
  EXPECT_EQ(gw.infer_route(text, NodeId("A"), NodeId("C")),
            (std::vector<NodeId>{NodeId("A"), NodeId("B"), NodeId("C")}));
  EXPECT_FALSE(gw.infer_route(text, NodeId("A"), NodeId("C")));
  EXPECT_FALSE(gw.infer_route(text, NodeId("A"), NodeId("C")));
}

TEST(EndpointConfig, FromEnv) {
  ::unsetenv("GUIDE_LLM_ENDPOINT");
  EXPECT_FALSE(EndpointConfig::from_env());
  ::setenv("GUIDE_LLM_ENDPOINT", "http://x/v1", 1);
  ::setenv("GUIDE_LLM_MODEL", "m", 1);
  const auto c = EndpointConfig::from_env();
  ASSERT_TRUE(c);
  EXPECT_EQ(c->url, "http://x/v1");
  EXPECT_EQ(c->model, "m");
  ::unsetenv("GUIDE_LLM_ENDPOINT");
  ::unsetenv("GUIDE_LLM_MODEL");
}
