#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <tuple>
#include <vector>

#include "recrefine/http.hpp"
#include "recrefine/jsonl.hpp"
#include "recrefine/prompt.hpp"

namespace recrefine {

enum class ChatRole { system, user };

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;
};

/// Wire-level request for chat-completion endpoints.
struct ChatRequest {
  std::string model_name;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;

  /// Throws ValidationError unless messages is non-empty, ends with a user
  /// message and temperature >= 0.
  void validate() const;
  json to_json() const;
};

/// A rendered prompt plus the structured key the scripted backend looks up.
struct CompletionRequest {
  TemplateId template_id = TemplateId::user_reason;
  SlotMap slots;
  std::string prompt;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
  /// Candidate index when several samples are drawn for the same prompt.
  std::optional<int> sample_index;
};

CompletionRequest make_request(const TemplateSet& templates, TemplateId id, SlotMap slots,
                               double temperature = 0.0,
                               std::optional<std::int64_t> seed = std::nullopt);

/// Stable hex digest of the slot map (names and values, length-prefixed).
std::string slot_fingerprint(const SlotMap& slots);

/// A language model. Implementations must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const CompletionRequest& req) const = 0;
};

using BackendPtr = std::shared_ptr<const Backend>;

/// Deterministic table-driven stand-in for a model. Keyed by
/// (template_id, slot_fingerprint[, sample]); an entry without a sample index
/// answers every sample of that prompt. Immutable once loaded.
class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend() = default;

  /// Reads JSON-lines {template_id, slot_fingerprint, reply_text[, sample]}.
  static ScriptedBackend load(const std::filesystem::path& path);

  void add(TemplateId id, std::string fingerprint, std::string reply,
           std::optional<int> sample = std::nullopt);
  void add(TemplateId id, const SlotMap& slots, std::string reply,
           std::optional<int> sample = std::nullopt) {
    add(id, slot_fingerprint(slots), std::move(reply), sample);
  }

  std::string complete(const CompletionRequest& req) const override;
  std::size_t size() const { return table_.size(); }

 private:
  using Key = std::tuple<TemplateId, std::string, std::optional<int>>;
  std::map<Key, std::string> table_;
};

json scripted_entry(TemplateId id, const std::string& fingerprint, const std::string& reply,
                    std::optional<int> sample = std::nullopt);

class CallbackBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const CompletionRequest& req) const override { return fn_(req); }

 private:
  Fn fn_;
};

/// Forwards to an inner backend and remembers every exchange so a live or
/// simulated run can be frozen into a scripted oracle file.
class RecordingBackend final : public Backend {
 public:
  explicit RecordingBackend(BackendPtr inner) : inner_(std::move(inner)) {}
  std::string complete(const CompletionRequest& req) const override;
  /// Rows in key order, ready for write_jsonl.
  std::vector<json> entries() const;

 private:
  BackendPtr inner_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<TemplateId, std::string, std::optional<int>>, std::string> seen_;
};

/// Sends *_reason and *_refine prompts to the actor and *_reflect prompts to
/// the reflector.
class RoleRouter final : public Backend {
 public:
  RoleRouter(BackendPtr actor, BackendPtr reflector)
      : actor_(std::move(actor)), reflector_(std::move(reflector)) {}
  std::string complete(const CompletionRequest& req) const override;

 private:
  BackendPtr actor_;
  BackendPtr reflector_;
};

struct HttpBackendConfig {
  std::string endpoint;
  std::string model;
  /// Environment variable holding the bearer token; empty sends no header.
  std::string api_key_env;
  std::string system_prompt;
  RetryPolicy retry;
  int max_in_flight = 4;
};

/// JSON-over-HTTP chat completion client. POSTs
/// {model, messages:[{role, content}], temperature, seed?} and returns
/// choices[0].message.content.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  std::string complete(const CompletionRequest& req) const override;

  ChatRequest chat_request(const CompletionRequest& req) const;
  /// Extracts choices[0].message.content; throws TransportError on bad shape.
  static std::string extract_content(const json& response);

 private:
  HttpBackendConfig cfg_;
  std::string api_key_;
  mutable std::counting_semaphore<1024> in_flight_;
};

}  // namespace recrefine
