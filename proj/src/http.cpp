#include <httplib.h>

#include <thread>

#include "recrefine/error.hpp"
#include "recrefine/http.hpp"

namespace recrefine {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint URL '" + url + "' has no scheme");
  }
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported URL scheme '" + scheme + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

json post_json(const std::string& url, const json& body, const RetryPolicy& retry,
               const HttpHeaders& headers, const std::function<void(const json&)>& check,
               int* attempts_out) {
  const ParsedUrl target = parse_url(url);
  httplib::Client client(target.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(retry.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(retry.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers hdrs;
  if (!headers.bearer_token.empty()) {
    hdrs.emplace("Authorization", "Bearer " + headers.bearer_token);
  }

  const std::string payload = body.dump();
  const int max_attempts = std::max(1, retry.max_attempts);
  auto backoff = retry.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempts_out != nullptr) *attempts_out = attempt;
    auto res = client.Post(target.path, hdrs, payload, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
    } else if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP status " + std::to_string(res->status);
    } else {
      try {
        json parsed = json::parse(res->body);
        if (check) check(parsed);
        return parsed;
      } catch (const json::exception& e) {
        last_error = std::string("malformed JSON response: ") + e.what();
      } catch (const TransportError& e) {
        last_error = e.what();
      }
    }
    if (attempt < max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw TransportError(url + ": " + last_error + " (after " + std::to_string(max_attempts) +
                       " attempts)");
}

}  // namespace recrefine
