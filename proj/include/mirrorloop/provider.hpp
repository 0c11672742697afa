// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Uniform chat-completion access. The runner only ever sees ChatRequest and
// ChatResponse; vendor wire formats live in the adapters below.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mirrorloop/error.hpp"
#include "mirrorloop/textmetrics.hpp"
#include "mirrorloop/transport.hpp"

namespace mirrorloop {

enum class Vendor { kOpenAI, kAnthropic, kGoogle, kScripted };

inline std::string to_string(Vendor v) {
  switch (v) {
    case Vendor::kOpenAI: return "openai";
    case Vendor::kAnthropic: return "anthropic";
    case Vendor::kGoogle: return "google";
    case Vendor::kScripted: return "scripted";
  }
  return "?";
}

// Environment variable holding the API key for a vendor.
inline const char* credential_env_var(Vendor v) {
  switch (v) {
    case Vendor::kOpenAI: return "OPENAI_API_KEY";
    case Vendor::kAnthropic: return "ANTHROPIC_API_KEY";
    case Vendor::kGoogle: return "GEMINI_API_KEY";
    case Vendor::kScripted: return nullptr;
  }
  return nullptr;
}

struct ProviderId {
  Vendor vendor = Vendor::kScripted;
  std::string model = "default";

  std::string to_string() const {
    return mirrorloop::to_string(vendor) + ":" + model;
  }

  // Accepts "vendor:model" or one of the short aliases
  // gpt-4o-mini, claude-3-haiku, gemini-2.0-flash, scripted.
  static ProviderId parse(std::string_view s) {
    if (s == "gpt-4o-mini") return {Vendor::kOpenAI, "gpt-4o-mini"};
    if (s == "claude-3-haiku") {
      return {Vendor::kAnthropic, "claude-3-haiku-20240307"};
    }
    if (s == "gemini-2.0-flash") return {Vendor::kGoogle, "gemini-2.0-flash"};
    if (s == "scripted") return {Vendor::kScripted, "default"};
    const auto colon = s.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == s.size()) {
      throw ConfigError("unrecognized model '" + std::string(s) + "'");
    }
    const auto vendor = s.substr(0, colon);
    ProviderId id;
    id.model = std::string(s.substr(colon + 1));
    if (vendor == "openai") {
      id.vendor = Vendor::kOpenAI;
    } else if (vendor == "anthropic") {
      id.vendor = Vendor::kAnthropic;
    } else if (vendor == "google") {
      id.vendor = Vendor::kGoogle;
    } else if (vendor == "scripted") {
      id.vendor = Vendor::kScripted;
    } else {
      throw ConfigError("unknown vendor '" + std::string(vendor) + "'");
    }
    return id;
  }

  friend bool operator==(const ProviderId&, const ProviderId&) = default;
};

enum class Role { kUser, kAssistant };

struct ChatTurn {
  Role role = Role::kUser;
  std::string text;
};

// Provider-neutral bookkeeping about where a request sits in a sequence.
// Live vendors ignore it; the scripted provider uses it to drive its
// dynamics.
struct RequestTrace {
  std::string task_id;
  int iteration = 0;
  std::optional<int> last_grounded_iteration;
};

struct ChatRequest {
  std::string system_text;
  std::vector<ChatTurn> turns;
  double temperature = 0.7;
  int max_output = 1024;
  std::optional<std::int64_t> seed;
  RequestTrace trace;

  void validate() const {
    if (turns.empty()) throw PreconditionError("chat request has no turns");
    if (turns.back().role != Role::kUser) {
      throw PreconditionError("last chat turn must have role user");
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
      throw PreconditionError("temperature must lie in [0, 2]");
    }
    if (max_output <= 0) throw PreconditionError("max_output must be positive");
  }
};

struct ChatResponse {
  IterationText text;
  std::chrono::nanoseconds latency{0};
  std::string provider_id;
  int raw_status = 0;
  int attempts = 1;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ProviderId id() const = 0;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Maps ChatRequest onto one vendor's JSON schema and back.
class VendorAdapter {
 public:
  virtual ~VendorAdapter() = default;
  virtual HttpRequest build(const ChatRequest& req, const std::string& model,
                            const std::string& api_key) const = 0;
  // Throws nlohmann::json::exception or Error when the payload has no text.
  virtual std::string extract_text(const nlohmann::json& body) const = 0;
};

// POST {base}/v1/chat/completions
//   system_text -> messages[0] with role "system"
//   turns       -> messages with roles "user" / "assistant"
//   temperature, max_output -> temperature, max_tokens; seed -> seed
// Text: choices[0].message.content
class OpenAIAdapter final : public VendorAdapter {
 public:
  explicit OpenAIAdapter(std::string base_url = "https://api.openai.com")
      : base_url_(std::move(base_url)) {}

  HttpRequest build(const ChatRequest& req, const std::string& model,
                    const std::string& api_key) const override {
    nlohmann::json messages = nlohmann::json::array();
    if (!req.system_text.empty()) {
      messages.push_back({{"role", "system"}, {"content", req.system_text}});
    }
    for (const auto& t : req.turns) {
      messages.push_back({{"role", t.role == Role::kUser ? "user" : "assistant"},
                          {"content", t.text}});
    }
    nlohmann::json body{{"model", model},
                        {"messages", messages},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_output}};
    if (req.seed) body["seed"] = *req.seed;
    HttpRequest http;
    http.url = base_url_ + "/v1/chat/completions";
    http.headers["Content-Type"] = "application/json";
    http.headers["Authorization"] = "Bearer " + api_key;
    http.body = body.dump();
    return http;
  }

  std::string extract_text(const nlohmann::json& body) const override {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  }

 private:
  std::string base_url_;
};

// POST {base}/v1/messages, anthropic-version 2023-06-01
//   system_text -> system; turns -> messages
//   temperature, max_output -> temperature, max_tokens (seed unsupported)
// Text: concatenation of content[*].text for blocks of type "text"
class AnthropicAdapter final : public VendorAdapter {
 public:
  explicit AnthropicAdapter(std::string base_url = "https://api.anthropic.com")
      : base_url_(std::move(base_url)) {}

  HttpRequest build(const ChatRequest& req, const std::string& model,
                    const std::string& api_key) const override {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& t : req.turns) {
      messages.push_back({{"role", t.role == Role::kUser ? "user" : "assistant"},
                          {"content", t.text}});
    }
    nlohmann::json body{{"model", model},
                        {"messages", messages},
                        {"temperature", req.temperature},
                        {"max_tokens", req.max_output}};
    if (!req.system_text.empty()) body["system"] = req.system_text;
    HttpRequest http;
    http.url = base_url_ + "/v1/messages";
    http.headers["Content-Type"] = "application/json";
    http.headers["x-api-key"] = api_key;
    http.headers["anthropic-version"] = "2023-06-01";
    http.body = body.dump();
    return http;
  }

  std::string extract_text(const nlohmann::json& body) const override {
    std::string out;
    bool any = false;
    for (const auto& block : body.at("content")) {
      if (block.at("type").get<std::string>() == "text") {
        out += block.at("text").get<std::string>();
        any = true;
      }
    }
    if (!any) throw Error("no text block in content");
    return out;
  }

 private:
  std::string base_url_;
};

// POST {base}/v1beta/models/{model}:generateContent
//   system_text -> systemInstruction.parts[0].text
//   turns       -> contents with roles "user" / "model"
//   temperature, max_output, seed -> generationConfig
// Text: concatenation of candidates[0].content.parts[*].text
class GeminiAdapter final : public VendorAdapter {
 public:
  explicit GeminiAdapter(
      std::string base_url = "https://generativelanguage.googleapis.com")
      : base_url_(std::move(base_url)) {}

  HttpRequest build(const ChatRequest& req, const std::string& model,
                    const std::string& api_key) const override {
    nlohmann::json contents = nlohmann::json::array();
    for (const auto& t : req.turns) {
      contents.push_back(
          {{"role", t.role == Role::kUser ? "user" : "model"},
           {"parts", nlohmann::json::array({{{"text", t.text}}})}});
    }
    nlohmann::json gen{{"temperature", req.temperature},
                       {"maxOutputTokens", req.max_output}};
    if (req.seed) gen["seed"] = *req.seed;
    nlohmann::json body{{"contents", contents}, {"generationConfig", gen}};
    if (!req.system_text.empty()) {
      body["systemInstruction"] = {
          {"parts", nlohmann::json::array({{{"text", req.system_text}}})}};
    }
    HttpRequest http;
    http.url = base_url_ + "/v1beta/models/" + model + ":generateContent";
    http.headers["Content-Type"] = "application/json";
    http.headers["x-goog-api-key"] = api_key;
    http.body = body.dump();
    return http;
  }

  std::string extract_text(const nlohmann::json& body) const override {
    std::string out;
    for (const auto& part :
         body.at("candidates").at(0).at("content").at("parts")) {
      out += part.at("text").get<std::string>();
    }
    return out;
  }

 private:
  std::string base_url_;
};

inline std::unique_ptr<VendorAdapter> make_adapter(
    Vendor v, const std::optional<std::string>& base_url = std::nullopt) {
  switch (v) {
    case Vendor::kOpenAI:
      return base_url ? std::make_unique<OpenAIAdapter>(*base_url)
                      : std::make_unique<OpenAIAdapter>();
    case Vendor::kAnthropic:
      return base_url ? std::make_unique<AnthropicAdapter>(*base_url)
                      : std::make_unique<AnthropicAdapter>();
    case Vendor::kGoogle:
      return base_url ? std::make_unique<GeminiAdapter>(*base_url)
                      : std::make_unique<GeminiAdapter>();
    case Vendor::kScripted:
      break;
  }
  throw ConfigError("scripted provider has no wire adapter");
}

// Receives request and response bodies verbatim when wire debugging is on.
using WireLog = std::function<void(std::string_view direction,
                                   const std::string& provider,
                                   std::string_view body)>;

class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(ProviderId id, std::unique_ptr<VendorAdapter> adapter,
                   std::shared_ptr<Transport> transport, std::string api_key,
                   RetryPolicy retry = {},
                   std::shared_ptr<RateLimiter> limiter = nullptr,
                   Sleeper sleeper = real_sleeper(), WireLog wire_log = nullptr)
      : id_(std::move(id)),
        adapter_(std::move(adapter)),
        transport_(std::move(transport)),
        api_key_(std::move(api_key)),
        retry_(retry),
        limiter_(std::move(limiter)),
        sleeper_(std::move(sleeper)),
        wire_log_(std::move(wire_log)) {
    if (api_key_.empty()) {
      throw ProviderError(ProviderError::Kind::kConfiguration, id_.to_string(),
                          "missing API key");
    }
  }

  ProviderId id() const override { return id_; }

  ChatResponse complete(const ChatRequest& request) override {
    request.validate();
    const std::string name = id_.to_string();
    HttpRequest http = adapter_->build(request, id_.model, api_key_);
    if (wire_log_) wire_log_("request", name, http.body);
    const auto start = std::chrono::steady_clock::now();
    PostResult result = post_with_retry(*transport_, http, retry_, name,
                                        limiter_.get(), sleeper_);
    const auto latency = std::chrono::steady_clock::now() - start;
    if (wire_log_) wire_log_("response", name, result.response.body);
    ChatResponse out;
    try {
      out.text = IterationText(
          adapter_->extract_text(nlohmann::json::parse(result.response.body)));
    } catch (const std::exception& e) {
      throw ProviderError(ProviderError::Kind::kMalformedResponse, name,
                          std::string("malformed payload: ") + e.what(),
                          result.attempts, result.response.status,
                          result.response.body);
    }
    out.latency = std::chrono::duration_cast<std::chrono::nanoseconds>(latency);
    out.provider_id = name;
    out.raw_status = result.response.status;
    out.attempts = result.attempts;
    return out;
  }

 private:
  ProviderId id_;
  std::unique_ptr<VendorAdapter> adapter_;
  std::shared_ptr<Transport> transport_;
  std::string api_key_;
  RetryPolicy retry_;
  std::shared_ptr<RateLimiter> limiter_;
  Sleeper sleeper_;
  WireLog wire_log_;
};

}  // namespace mirrorloop
