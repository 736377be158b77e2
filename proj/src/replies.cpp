#include "recrefine/replies.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>

#include "recrefine/error.hpp"

namespace recrefine {

std::string_view to_string(Verdict v) {
  return v == Verdict::reasonable ? "reasonable" : "unreasonable";
}

Verdict parse_verdict_name(std::string_view name) {
  if (name == "reasonable") return Verdict::reasonable;
  if (name == "unreasonable") return Verdict::unreasonable;
  throw ParseError("unknown verdict '" + std::string(name) + "'");
}

namespace {

constexpr std::array<std::string_view, 4> kKeys = {"PREDICTION", "KNOWLEDGE", "VERDICT",
                                                   "REFLECTION"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Returns (key, rest-of-line) when `line` is a marker line.
std::optional<std::pair<std::string, std::string>> marker(std::string_view line) {
  const auto start = line.find_first_not_of(" \t");
  if (start == std::string_view::npos) return std::nullopt;
  line.remove_prefix(start);
  for (auto key : kKeys) {
    if (line.size() < key.size()) continue;
    bool match = true;
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(line[i])) != key[i]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    auto rest = line.substr(key.size());
    const auto colon = rest.find_first_not_of(" \t");
    if (colon == std::string_view::npos || rest[colon] != ':') continue;
    return std::make_pair(std::string(key), std::string(rest.substr(colon + 1)));
  }
  return std::nullopt;
}

// key -> text; first occurrence wins, continuation lines belong to the most
// recent marker.
std::map<std::string, std::string> scan(std::string_view raw) {
  std::map<std::string, std::string> fields;
  std::string* current = nullptr;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto eol = raw.find('\n', pos);
    if (eol == std::string_view::npos) eol = raw.size();
    const auto line = raw.substr(pos, eol - pos);
    if (auto m = marker(line)) {
      auto [it, inserted] = fields.emplace(m->first, m->second);
      current = inserted ? &it->second : nullptr;
    } else if (current != nullptr) {
      *current += '\n';
      *current += line;
    }
    pos = eol + 1;
  }
  for (auto& [_, v] : fields) v = trim(v);
  return fields;
}

int parse_prediction(const std::map<std::string, std::string>& fields) {
  auto it = fields.find("PREDICTION");
  if (it == fields.end()) throw ParseError("reply has no PREDICTION marker");
  std::string v = lower(it->second);
  while (!v.empty() && (v.back() == '.' || v.back() == '!')) v.pop_back();
  if (v == "yes") return 1;
  if (v == "no") return 0;
  throw ParseError("ambiguous PREDICTION value '" + it->second + "'");
}

std::string required_text(const std::map<std::string, std::string>& fields, const char* key) {
  auto it = fields.find(key);
  if (it == fields.end()) throw ParseError(std::string("reply has no ") + key + " marker");
  if (it->second.empty()) throw ParseError(std::string(key) + " marker has empty text");
  return it->second;
}

}  // namespace

ReasonOutput parse_reason(std::string_view raw) {
  const auto fields = scan(raw);
  ReasonOutput out;
  out.prediction = parse_prediction(fields);
  out.knowledge_text = required_text(fields, "KNOWLEDGE");
  return out;
}

ReflectOutput parse_reflect(std::string_view raw) {
  const auto fields = scan(raw);
  auto it = fields.find("VERDICT");
  if (it == fields.end()) throw ParseError("reply has no VERDICT marker");
  std::string v = lower(it->second);
  while (!v.empty() && v.back() == '.') v.pop_back();
  ReflectOutput out;
  if (v == "reasonable") {
    out.verdict = Verdict::reasonable;
  } else if (v == "unreasonable" || v == "not reasonable") {
    out.verdict = Verdict::unreasonable;
    out.reflection_text = required_text(fields, "REFLECTION");
  } else {
    throw ParseError("ambiguous VERDICT value '" + it->second + "'");
  }
  return out;
}

RefineOutput parse_refine(std::string_view raw) {
  const auto r = parse_reason(raw);
  return {r.knowledge_text, r.prediction};
}

std::string parse_knowledge(std::string_view raw) {
  const auto fields = scan(raw);
  if (fields.count("KNOWLEDGE") != 0) return required_text(fields, "KNOWLEDGE");
  if (!fields.empty()) throw ParseError("reply has markers but no KNOWLEDGE");
  std::string text = trim(raw);
  if (text.empty()) throw ParseError("empty reply");
  return text;
}

std::string format_reason(const ReasonOutput& out) {
  return std::string("PREDICTION: ") + (out.prediction ? "Yes" : "No") +
         "\nKNOWLEDGE: " + out.knowledge_text;
}

std::string format_reflect(const ReflectOutput& out) {
  return reflect_target(out.verdict, out.reflection_text);
}

std::string format_refine(const RefineOutput& out) {
  return format_reason({out.refined_text, out.prediction});
}

std::string format_knowledge(std::string_view knowledge) {
  return "KNOWLEDGE: " + std::string(knowledge);
}

std::string reflect_target(Verdict verdict, std::string_view reflection_text) {
  if (verdict == Verdict::reasonable) return "VERDICT: Reasonable";
  return "VERDICT: Unreasonable\nREFLECTION: " + std::string(reflection_text);
}

}  // namespace recrefine
