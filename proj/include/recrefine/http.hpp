#pragma once

#include <chrono>
#include <functional>
#include <string>

#include "recrefine/jsonl.hpp"

namespace recrefine {

struct RetryPolicy {
  /// Total attempts, including the first one.
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds timeout{60000};
};

struct HttpHeaders {
  std::string bearer_token;
};

/// POSTs `body` as JSON to `url` (http:// or https://host[:port]/path) and
/// returns the parsed response. Non-2xx status, connection failure, timeout
/// and unparseable bodies are retried with exponential backoff; the last
/// failure is raised as TransportError. `check`, when set, may throw
/// TransportError to reject a well-formed but unusable response, which is
/// retried like any other failure. `attempts_out`, when given, receives the
/// number of requests made.
json post_json(const std::string& url, const json& body, const RetryPolicy& retry,
               const HttpHeaders& headers = {},
               const std::function<void(const json&)>& check = {},
               int* attempts_out = nullptr);

}  // namespace recrefine
