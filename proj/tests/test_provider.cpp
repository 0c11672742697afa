// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <deque>
#include <thread>

#include "mirrorloop/embedder.hpp"
#include "mirrorloop/http_transport.hpp"
#include "mirrorloop/provider.hpp"

using namespace mirrorloop;
using namespace std::chrono_literals;

namespace {

class MockTransport final : public Transport {
 public:
  void queue(int status, std::string body) {
    responses_.push_back({status, std::move(body), status == 0 ? "refused" : ""});
  }

  HttpResponse post(const HttpRequest& request) override {
    requests.push_back(request);
    if (responses_.empty()) return {500, "exhausted mock", {}};
    HttpResponse r = responses_.front();
    responses_.pop_front();
    return r;
  }

  std::vector<HttpRequest> requests;

 private:
  std::deque<HttpResponse> responses_;
};

struct SleepLog {
  std::vector<std::chrono::milliseconds> waits;
  Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { waits.push_back(d); };
  }
};

const char* kOpenAIOk =
    R"({"choices":[{"message":{"role":"assistant","content":"hello"}}]})";

ChatRequest simple_request() {
  ChatRequest r;
  r.system_text = "sys";
  r.turns.push_back({Role::kUser, "hi"});
  r.seed = 42;
  return r;
}

}  // namespace

TEST(ChatRequest, EmptyTurnsIsPreconditionError) {
  ChatRequest r;
  EXPECT_THROW(r.validate(), PreconditionError);
  r.turns.push_back({Role::kAssistant, "x"});
  EXPECT_THROW(r.validate(), PreconditionError);
  r.turns.push_back({Role::kUser, "y"});
  r.temperature = 3.0;
  EXPECT_THROW(r.validate(), PreconditionError);
}

TEST(ProviderId, ParsesAliasesAndQualifiedNames) {
  EXPECT_EQ(ProviderId::parse("gpt-4o-mini"), (ProviderId{Vendor::kOpenAI, "gpt-4o-mini"}));
  EXPECT_EQ(ProviderId::parse("claude-3-haiku").model, "claude-3-haiku-20240307");
  EXPECT_EQ(ProviderId::parse("gemini-2.0-flash").vendor, Vendor::kGoogle);
  EXPECT_EQ(ProviderId::parse("anthropic:claude-x").to_string(), "anthropic:claude-x");
  EXPECT_THROW(ProviderId::parse("nobody:model"), ConfigError);
  EXPECT_THROW(ProviderId::parse("bare"), ConfigError);
}

TEST(Retry, TransientThenSuccessRecordsTwoAttempts) {
  auto t = std::make_shared<MockTransport>();
  t->queue(429, R"({"error":"rate"})");
  t->queue(200, kOpenAIOk);
  SleepLog log;
  HttpChatProvider p(ProviderId::parse("gpt-4o-mini"), make_adapter(Vendor::kOpenAI), t,
                     "key", RetryPolicy{}, nullptr, log.sleeper());
  const auto resp = p.complete(simple_request());
  EXPECT_EQ(resp.text.content(), "hello");
  EXPECT_EQ(resp.attempts, 2);
  EXPECT_EQ(resp.raw_status, 200);
  EXPECT_EQ(resp.provider_id, "openai:gpt-4o-mini");
  ASSERT_EQ(log.waits.size(), 1u);
  EXPECT_EQ(log.waits[0], 500ms);
}

TEST(Retry, BackoffGrowsAndCaps) {
  RetryPolicy p;
  p.max_delay = 1500ms;
  EXPECT_EQ(p.delay_before(1), 0ms);
  EXPECT_EQ(p.delay_before(2), 500ms);
  EXPECT_EQ(p.delay_before(3), 1000ms);
  EXPECT_EQ(p.delay_before(4), 1500ms);
  EXPECT_EQ(p.delay_before(9), 1500ms);
}

TEST(Retry, ExhaustionIsRetriableKind) {
  auto t = std::make_shared<MockTransport>();
  for (int i = 0; i < 3; ++i) t->queue(503, "busy");
  SleepLog log;
  RetryPolicy policy;
  policy.max_attempts = 3;
  HttpChatProvider p(ProviderId::parse("gpt-4o-mini"), make_adapter(Vendor::kOpenAI), t,
                     "key", policy, nullptr, log.sleeper());
  try {
    p.complete(simple_request());
    FAIL() << "expected ProviderError";
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::kRetriesExhausted);
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_TRUE(e.retriable());
  }
  EXPECT_EQ(t->requests.size(), 3u);
}

TEST(Retry, AuthFailureIsFatalWithoutRetry) {
  auto t = std::make_shared<MockTransport>();
  t->queue(401, R"({"error":"bad key"})");
  SleepLog log;
  HttpChatProvider p(ProviderId::parse("claude-3-haiku"), make_adapter(Vendor::kAnthropic),
                     t, "key", RetryPolicy{}, nullptr, log.sleeper());
  try {
    p.complete(simple_request());
    FAIL() << "expected ProviderError";
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::kAuthentication);
    EXPECT_EQ(e.status(), 401);
    EXPECT_FALSE(e.retriable());
  }
  EXPECT_EQ(t->requests.size(), 1u);
  EXPECT_TRUE(log.waits.empty());
}

TEST(Retry, ClientErrorIsRejected) {
  auto t = std::make_shared<MockTransport>();
  t->queue(400, "bad request");
  HttpChatProvider p(ProviderId::parse("gpt-4o-mini"), make_adapter(Vendor::kOpenAI), t,
                     "key", RetryPolicy{}, nullptr, [](auto) {});
  try {
    p.complete(simple_request());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::kRequestRejected);
    EXPECT_EQ(e.raw_payload(), "bad request");
  }
}

TEST(Provider, MalformedPayloadKeepsRawBody) {
  auto t = std::make_shared<MockTransport>();
  t->queue(200, R"({"choices":[]})");
  HttpChatProvider p(ProviderId::parse("gpt-4o-mini"), make_adapter(Vendor::kOpenAI), t,
                     "key", RetryPolicy{}, nullptr, [](auto) {});
  try {
    p.complete(simple_request());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::kMalformedResponse);
    EXPECT_EQ(e.raw_payload(), R"({"choices":[]})");
  }
}

TEST(Provider, MissingKeyIsConfigurationError) {
  auto t = std::make_shared<MockTransport>();
  try {
    HttpChatProvider p(ProviderId::parse("gpt-4o-mini"), make_adapter(Vendor::kOpenAI), t,
                       "");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind(), ProviderError::Kind::kConfiguration);
  }
  EXPECT_TRUE(t->requests.empty());
}

TEST(Adapters, OpenAIRequestShape) {
  const auto http = OpenAIAdapter().build(simple_request(), "gpt-4o-mini", "k");
  EXPECT_EQ(http.url, "https://api.openai.com/v1/chat/completions");
  EXPECT_EQ(http.headers.at("Authorization"), "Bearer k");
  const auto j = nlohmann::json::parse(http.body);
  EXPECT_EQ(j["messages"][0]["role"], "system");
  EXPECT_EQ(j["messages"][1]["content"], "hi");
  EXPECT_EQ(j["max_tokens"], 1024);
  EXPECT_EQ(j["seed"], 42);
}

TEST(Adapters, AnthropicRequestAndResponse) {
  AnthropicAdapter a;
  const auto http = a.build(simple_request(), "claude-3-haiku-20240307", "k");
  EXPECT_EQ(http.url, "https://api.anthropic.com/v1/messages");
  EXPECT_EQ(http.headers.at("x-api-key"), "k");
  EXPECT_EQ(http.headers.at("anthropic-version"), "2023-06-01");
  const auto j = nlohmann::json::parse(http.body);
  EXPECT_EQ(j["system"], "sys");
  EXPECT_FALSE(j.contains("seed"));
  EXPECT_EQ(a.extract_text(nlohmann::json::parse(
                R"({"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]})")),
            "ab");
}

TEST(Adapters, GeminiRequestAndResponse) {
  GeminiAdapter g;
  const auto http = g.build(simple_request(), "gemini-2.0-flash", "k");
  EXPECT_EQ(http.url,
            "https://generativelanguage.googleapis.com/v1beta/models/"
            "gemini-2.0-flash:generateContent");
  EXPECT_EQ(http.headers.at("x-goog-api-key"), "k");
  const auto j = nlohmann::json::parse(http.body);
  EXPECT_EQ(j["contents"][0]["role"], "user");
  EXPECT_EQ(j["generationConfig"]["maxOutputTokens"], 1024);
  EXPECT_EQ(j["systemInstruction"]["parts"][0]["text"], "sys");
  EXPECT_EQ(g.extract_text(nlohmann::json::parse(
                R"({"candidates":[{"content":{"parts":[{"text":"x"},{"text":"y"}]}}]})")),
            "xy");
}

TEST(Credentials, OneVariablePerVendor) {
  EXPECT_STREQ(credential_env_var(Vendor::kOpenAI), "OPENAI_API_KEY");
  EXPECT_STREQ(credential_env_var(Vendor::kAnthropic), "ANTHROPIC_API_KEY");
  EXPECT_STREQ(credential_env_var(Vendor::kGoogle), "GEMINI_API_KEY");
  EXPECT_EQ(credential_env_var(Vendor::kScripted), nullptr);
}

TEST(RateLimiter, BurstThenThrottle) {
  RateLimiter limiter(600.0);  // 10 per second, burst capacity 10
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 12; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_GE(elapsed, 150ms);
  EXPECT_THROW(RateLimiter(0.0), ConfigError);
}

TEST(HttplibTransport, SplitsUrls) {
  EXPECT_EQ(split_url("https://api.x.com/v1/a").origin, "https://api.x.com");
  EXPECT_EQ(split_url("http://127.0.0.1:8080/p?q=1").path, "/p?q=1");
  EXPECT_EQ(split_url("http://h").path, "/");
  EXPECT_THROW(split_url("ftp://h/x"), ConfigError);
  EXPECT_THROW(split_url("nohost"), ConfigError);
}

TEST(HttplibTransport, RetriesAgainstLocalServer) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    if (hits++ == 0) {
      res.status = 429;
      res.set_content(R"({"error":"slow down"})", "application/json");
      return;
    }
    res.set_content(kOpenAIOk, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto transport = std::make_shared<HttplibTransport>(5s);
  HttpChatProvider p(ProviderId::parse("gpt-4o-mini"),
                     make_adapter(Vendor::kOpenAI, "http://127.0.0.1:" + std::to_string(port)),
                     transport, "local-key", RetryPolicy{}, nullptr, [](auto) {});
  const auto resp = p.complete(simple_request());
  server.stop();
  th.join();
  EXPECT_EQ(resp.text.content(), "hello");
  EXPECT_EQ(resp.attempts, 2);
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(seen_auth, "Bearer local-key");
}

TEST(HttplibTransport, ConnectionFailureIsStatusZero) {
  HttplibTransport t(1s);
  // Port 9 on localhost is expected to refuse connections.
  const auto r = t.post({"http://127.0.0.1:9/x", {}, "{}"});
  EXPECT_EQ(r.status, 0);
  EXPECT_FALSE(r.transport_error.empty());
  EXPECT_EQ(classify_status(r.status), StatusClass::kRetriable);
}

TEST(RemoteEmbedder, ParsesVectorAndChecksDimension) {
  auto t = std::make_shared<MockTransport>();
  std::string body = R"({"data":[{"embedding":[)";
  for (int i = 0; i < 16; ++i) body += (i ? ",": "") + std::string(i == 0 ? "3" : "0");
  body += "]}]}";
  t->queue(200, body);
  t->queue(200, R"({"data":[{"embedding":[1,2,3]}]})");
  EmbedderSpec spec;
  spec.dimension = 16;
  spec.model_name = "text-embedding-3-small";
  RemoteEmbedder e(spec, t, "k", RetryPolicy{}, nullptr, [](auto) {});
  const auto v = e.embed(IterationText("hello"));
  EXPECT_DOUBLE_EQ(v.components()[0], 1.0);
  EXPECT_EQ(nlohmann::json::parse(t->requests[0].body)["model"], "text-embedding-3-small");
  try {
    e.embed(IterationText("again"));
    FAIL();
  } catch (const ProviderError& err) {
    EXPECT_EQ(err.kind(), ProviderError::Kind::kConfiguration);
  }
  EXPECT_TRUE(e.embed(IterationText("")).is_zero());
  EXPECT_EQ(t->requests.size(), 2u);
}
