// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Transport abstraction shared by the chat providers and the remote
// embedder, plus the retry and rate-limit policy applied on top of it.

#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include "mirrorloop/error.hpp"

namespace mirrorloop {

struct HttpRequest {
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
};

// status == 0 means the request never produced an HTTP response
// (connection refused, timeout, TLS failure).
struct HttpResponse {
  int status = 0;
  std::string body;
  std::string transport_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

enum class StatusClass { kSuccess, kRetriable, kAuth, kFatal };

inline StatusClass classify_status(int status) {
  if (status >= 200 && status < 300) return StatusClass::kSuccess;
  if (status == 0 || status == 408 || status == 409 || status == 429 ||
      status >= 500) {
    return StatusClass::kRetriable;
  }
  if (status == 401 || status == 403) return StatusClass::kAuth;
  return StatusClass::kFatal;
}

class ProviderError : public Error {
 public:
  enum class Kind {
    kAuthentication,     // fatal for this provider
    kRetriesExhausted,   // transient failures outlasted the retry budget
    kMalformedResponse,  // vendor payload could not be interpreted
    kRequestRejected,    // non-retriable HTTP status other than auth
    kConfiguration,      // missing credential, dimension mismatch, ...
  };

  ProviderError(Kind kind, std::string provider, const std::string& what,
                int attempts = 0, int status = 0, std::string raw_payload = {})
      : Error(provider + ": " + what),
        kind_(kind),
        provider_(std::move(provider)),
        attempts_(attempts),
        status_(status),
        raw_payload_(std::move(raw_payload)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& provider() const noexcept { return provider_; }
  int attempts() const noexcept { return attempts_; }
  int status() const noexcept { return status_; }
  const std::string& raw_payload() const noexcept { return raw_payload_; }
  bool retriable() const noexcept { return kind_ == Kind::kRetriesExhausted; }

 private:
  Kind kind_;
  std::string provider_;
  int attempts_;
  int status_;
  std::string raw_payload_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

// Exponential backoff with a bounded number of attempts.
struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};

  std::chrono::milliseconds delay_before(int attempt) const {
    // attempt is 1-based; no delay before the first one.
    if (attempt <= 1) return std::chrono::milliseconds{0};
    double d = static_cast<double>(base_delay.count());
    for (int i = 2; i < attempt; ++i) d *= multiplier;
    d = std::min(d, static_cast<double>(max_delay.count()));
    return std::chrono::milliseconds{static_cast<long long>(d)};
  }
};

// Token bucket refilled continuously at requests_per_minute. Shared by every
// caller of one provider.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit RateLimiter(double requests_per_minute)
      : rate_per_ms_(requests_per_minute / 60000.0),
        capacity_(std::max(1.0, requests_per_minute / 60.0)),
        tokens_(capacity_),
        last_(Clock::now()) {
    if (!(requests_per_minute > 0.0)) {
      throw ConfigError("requests_per_minute must be positive");
    }
  }

  // Blocks until a token is available, then consumes it.
  void acquire() {
    for (;;) {
      std::chrono::milliseconds wait{0};
      {
        std::lock_guard lock(mu_);
        refill();
        if (tokens_ >= 1.0) {
          tokens_ -= 1.0;
          return;
        }
        wait = std::chrono::milliseconds{
            static_cast<long long>((1.0 - tokens_) / rate_per_ms_) + 1};
      }
      std::this_thread::sleep_for(wait);
    }
  }

  double available() {
    std::lock_guard lock(mu_);
    refill();
    return tokens_;
  }

 private:
  void refill() {
    const auto now = Clock::now();
    const double elapsed =
        std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_ms_);
  }

  std::mutex mu_;
  double rate_per_ms_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

struct PostResult {
  HttpResponse response;
  int attempts = 0;
};

// Posts with retries on retriable status classes. Throws ProviderError for
// authentication failures, other non-retriable statuses, and exhaustion.
inline PostResult post_with_retry(Transport& transport,
                                  const HttpRequest& request,
                                  const RetryPolicy& policy,
                                  const std::string& provider_name,
                                  RateLimiter* limiter = nullptr,
                                  const Sleeper& sleep = real_sleeper()) {
  const int max_attempts = std::max(1, policy.max_attempts);
  HttpResponse last;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    const auto delay = policy.delay_before(attempt);
    if (delay.count() > 0) sleep(delay);
    if (limiter != nullptr) limiter->acquire();
    last = transport.post(request);
    switch (classify_status(last.status)) {
      case StatusClass::kSuccess:
        return {std::move(last), attempt};
      case StatusClass::kAuth:
        throw ProviderError(ProviderError::Kind::kAuthentication,
                            provider_name,
                            "authentication failed (HTTP " +
                                std::to_string(last.status) + ")",
                            attempt, last.status, last.body);
      case StatusClass::kFatal:
        throw ProviderError(ProviderError::Kind::kRequestRejected,
                            provider_name,
                            "request rejected (HTTP " +
                                std::to_string(last.status) + ")",
                            attempt, last.status, last.body);
      case StatusClass::kRetriable:
        break;
    }
  }
  std::string detail = last.status == 0
                           ? "transport error: " + last.transport_error
                           : "HTTP " + std::to_string(last.status);
  throw ProviderError(ProviderError::Kind::kRetriesExhausted, provider_name,
                      "gave up after " + std::to_string(max_attempts) +
                          " attempts (" + detail + ")",
                      max_attempts, last.status, last.body);
}

}  // namespace mirrorloop
