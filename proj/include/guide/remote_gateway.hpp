#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "guide/llm_gateway.hpp"

namespace guide {

struct ChatMessage {
  std::string role;  // system | user | assistant | tool
  std::string content;
};

struct ToolSchema {
  std::string name;
  std::string description;
  nlohmann::json parameters;
};

/// plan_route, query_images, send_user_message, issue_move, set_preference,
/// hazard_decision, report_hazard.
const std::vector<ToolSchema>& tool_schemas();
const ToolSchema* find_tool(std::string_view name);
/// Serialized in the chat-completion "tools" shape.
nlohmann::json tool_schemas_json();

struct PromptBundle {
  std::string system_prompt;
  std::vector<ChatMessage> conversation;
  std::vector<ToolSchema> tools;

  /// Messages with the system prompt first.
  std::vector<ChatMessage> messages() const;
};

/// The versioned template shipped in prompts/.
std::string_view system_prompt_template();
/// Substitutes {{MAP}}, {{ROUTE}} and {{TOOLS}}.
std::string render_system_prompt(std::string_view tmpl, std::string_view map_text, std::string_view route_text);

/// Subset of JSON Schema: type, properties, required, additionalProperties=false,
/// enum, items, minimum, maximum, minLength. Returns the first problem, or nullopt.
std::optional<std::string> validate_json(const nlohmann::json& schema, const nlohmann::json& value,
                                         const std::string& path = "$");

struct ToolCall {
  std::string name;
  nlohmann::json arguments;
};

struct Completion {
  std::optional<std::string> content;
  std::optional<ToolCall> tool_call;
};

struct EndpointConfig {
  /// Full URL of the chat-completion endpoint, e.g. http://localhost:8000/v1/chat/completions
  std::string url;
  std::string model;
  std::string api_key;
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
  std::chrono::milliseconds timeout{20000};

  /// GUIDE_LLM_ENDPOINT, GUIDE_LLM_MODEL, GUIDE_LLM_API_KEY; nullopt unless the endpoint is set.
  static std::optional<EndpointConfig> from_env();
};

nlohmann::json build_request(const PromptBundle& bundle, const std::string& model);
/// Throws GatewayError for bodies without a usable first choice.
Completion parse_completion(const nlohmann::json& body);

/// One chat-completion round trip with retries (connection errors, 429 and 5xx)
/// and exponential backoff. Throws GatewayError once attempts are exhausted or on
/// a non-retryable status.
Completion remote_complete(const PromptBundle& bundle, const EndpointConfig& config);

struct RemoteOptions {
  bool system_prompt = true;
  std::string route_text;
};

class RemoteGateway final : public Gateway {
 public:
  explicit RemoteGateway(EndpointConfig config, RemoteOptions options = {});

  Intent interpret_query(std::string_view utterance, const TopoMap& map) override;
  /// Falls back to the rule table when the endpoint fails or answers off-schema.
  HazardVerdict classify_hazard(const std::vector<std::string>& labels, std::string_view context) override;
  std::optional<std::vector<NodeId>> infer_route(std::string_view map_text, const NodeId& start,
                                                 const NodeId& goal) override;
  std::string_view name() const override { return "remote"; }

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  PromptBundle bundle_for(std::string_view map_text, std::string user_text) const;

  EndpointConfig config_;
  RemoteOptions options_;
  std::vector<std::string> diagnostics_;
};

/// Converts a validated tool call into an Intent. Calls that are not user intents
/// (issue_move, report_hazard) come back as unknown with a diagnostic.
Intent intent_from_tool_call(const ToolCall& call, const TopoMap& map, std::string* diagnostic = nullptr);

}  // namespace guide
