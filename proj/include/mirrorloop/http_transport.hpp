// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Transport over cpp-httplib. Requires linking mirrorloop::http.

#pragma once

#include <chrono>
#include <string>

#include "httplib.h"
#include "mirrorloop/transport.hpp"

namespace mirrorloop {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("URL without scheme: " + url);
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// A fresh client per request keeps the transport safe to share between
// worker threads.
class HttplibTransport final : public Transport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds{120})
      : timeout_(timeout) {}

  HttpResponse post(const HttpRequest& request) override {
    const ParsedUrl u = split_url(request.url);
    httplib::Client client(u.origin);
    client.set_connection_timeout(std::chrono::seconds{15});
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : request.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto res = client.Post(u.path, headers, request.body, content_type);
    HttpResponse out;
    if (!res) {
      out.status = 0;
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
  }

 private:
  std::chrono::seconds timeout_;
};

}  // namespace mirrorloop
