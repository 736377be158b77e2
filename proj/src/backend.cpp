#include "recrefine/backend.hpp"

#include <cstdlib>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"

namespace recrefine {

void ChatRequest::validate() const {
  if (messages.empty()) throw ValidationError("chat request has no messages");
  if (messages.back().role != ChatRole::user) {
    throw ValidationError("last chat message must have role user");
  }
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
}

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) {
    msgs.push_back({{"role", m.role == ChatRole::system ? "system" : "user"}, {"content", m.content}});
  }
  json body = {{"model", model_name}, {"messages", msgs}, {"temperature", temperature}};
  if (seed) body["seed"] = *seed;
  return body;
}

CompletionRequest make_request(const TemplateSet& templates, TemplateId id, SlotMap slots,
                               double temperature, std::optional<std::int64_t> seed) {
  CompletionRequest req;
  req.template_id = id;
  req.prompt = render(templates.get(id), slots);
  req.slots = std::move(slots);
  req.temperature = temperature;
  req.seed = seed;
  return req;
}

std::string slot_fingerprint(const SlotMap& slots) {
  std::string canonical;
  for (const auto& [name, value] : slots) {
    canonical += std::to_string(name.size()) + ":" + name + "=" + std::to_string(value.size()) +
                 ":" + value + ";";
  }
  return to_hex16(seeded_hash(canonical, 0x5107f1a9e2d3c4b5ULL));
}

// ---- scripted ---------------------------------------------------------------

ScriptedBackend ScriptedBackend::load(const std::filesystem::path& path) {
  ScriptedBackend backend;
  std::size_t row = 0;
  for (const auto& j : read_jsonl(path)) {
    ++row;
    try {
      std::optional<int> sample;
      if (j.contains("sample") && !j["sample"].is_null()) sample = j["sample"].get<int>();
      backend.add(parse_template_id(j.at("template_id").get<std::string>()),
                  j.at("slot_fingerprint").get<std::string>(), j.at("reply_text").get<std::string>(),
                  sample);
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ": record " + std::to_string(row) + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::add(TemplateId id, std::string fingerprint, std::string reply,
                          std::optional<int> sample) {
  table_[Key{id, std::move(fingerprint), sample}] = std::move(reply);
}

std::string ScriptedBackend::complete(const CompletionRequest& req) const {
  const std::string fp = slot_fingerprint(req.slots);
  if (req.sample_index) {
    auto it = table_.find(Key{req.template_id, fp, req.sample_index});
    if (it != table_.end()) return it->second;
  }
  auto it = table_.find(Key{req.template_id, fp, std::nullopt});
  if (it != table_.end()) return it->second;
  throw OracleMissError("scripted oracle has no reply for (" +
                        std::string(to_string(req.template_id)) + ", " + fp + ")");
}

json scripted_entry(TemplateId id, const std::string& fingerprint, const std::string& reply,
                    std::optional<int> sample) {
  json j = {{"template_id", to_string(id)}, {"slot_fingerprint", fingerprint}, {"reply_text", reply}};
  if (sample) j["sample"] = *sample;
  return j;
}

// ---- recording / routing ------------------------------------------------------

std::string RecordingBackend::complete(const CompletionRequest& req) const {
  std::string reply = inner_->complete(req);
  std::lock_guard lock(mu_);
  seen_[{req.template_id, slot_fingerprint(req.slots), req.sample_index}] = reply;
  return reply;
}

std::vector<json> RecordingBackend::entries() const {
  std::lock_guard lock(mu_);
  std::vector<json> rows;
  rows.reserve(seen_.size());
  for (const auto& [key, reply] : seen_) {
    rows.push_back(scripted_entry(std::get<0>(key), std::get<1>(key), reply, std::get<2>(key)));
  }
  return rows;
}

std::string RoleRouter::complete(const CompletionRequest& req) const {
  const bool reflect =
      req.template_id == TemplateId::user_reflect || req.template_id == TemplateId::item_reflect;
  return (reflect ? reflector_ : actor_)->complete(req);
}

// ---- HTTP -------------------------------------------------------------------

HttpBackend::HttpBackend(HttpBackendConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(std::max(1, std::min(cfg_.max_in_flight, 1024))) {
  if (cfg_.endpoint.empty()) throw ConfigError("HTTP backend needs an endpoint");
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

ChatRequest HttpBackend::chat_request(const CompletionRequest& req) const {
  ChatRequest chat;
  chat.model_name = cfg_.model;
  if (!cfg_.system_prompt.empty()) chat.messages.push_back({ChatRole::system, cfg_.system_prompt});
  chat.messages.push_back({ChatRole::user, req.prompt});
  chat.temperature = req.temperature;
  chat.seed = req.seed;
  return chat;
}

std::string HttpBackend::extract_content(const json& response) {
  try {
    return response.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("response lacks choices[0].message.content: ") + e.what());
  }
}

std::string HttpBackend::complete(const CompletionRequest& req) const {
  const ChatRequest chat = chat_request(req);
  chat.validate();
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};
  const json response = post_json(cfg_.endpoint, chat.to_json(), cfg_.retry, {api_key_},
                                  [](const json& r) { extract_content(r); });
  return extract_content(response);
}

}  // namespace recrefine
