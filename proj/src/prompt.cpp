#include "recrefine/prompt.hpp"

#include <algorithm>

#include "recrefine/error.hpp"
#include "recrefine/jsonl.hpp"

namespace recrefine {

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::user_reason: return "user_reason";
    case TemplateId::user_reflect: return "user_reflect";
    case TemplateId::user_refine: return "user_refine";
    case TemplateId::item_reason: return "item_reason";
    case TemplateId::item_reflect: return "item_reflect";
    case TemplateId::item_refine: return "item_refine";
  }
  return "?";
}

TemplateId parse_template_id(std::string_view name) {
  for (auto id : kAllTemplateIds) {
    if (to_string(id) == name) return id;
  }
  throw TemplateError("unknown template id '" + std::string(name) + "'");
}

std::string_view to_string(EntityKind kind) { return kind == EntityKind::user ? "user" : "item"; }

EntityKind parse_entity_kind(std::string_view name) {
  if (name == "user") return EntityKind::user;
  if (name == "item") return EntityKind::item;
  throw ValidationError("unknown entity kind '" + std::string(name) + "'");
}

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::reason: return "reason";
    case Capability::reflect: return "reflect";
    case Capability::refine: return "refine";
  }
  return "?";
}

TemplateId template_for(EntityKind kind, Capability cap) {
  const bool user = kind == EntityKind::user;
  switch (cap) {
    case Capability::reason: return user ? TemplateId::user_reason : TemplateId::item_reason;
    case Capability::reflect: return user ? TemplateId::user_reflect : TemplateId::item_reflect;
    case Capability::refine: return user ? TemplateId::user_refine : TemplateId::item_refine;
  }
  return TemplateId::user_reason;
}

std::vector<std::string> placeholders_for(TemplateId id, PromptStage stage) {
  const bool build = stage == PromptStage::construction;
  std::vector<std::string> names;
  switch (id) {
    case TemplateId::user_reason:
    case TemplateId::user_reflect:
    case TemplateId::user_refine:
      names = {"hist"};
      if (build) names.push_back("item");
      break;
    case TemplateId::item_reason:
    case TemplateId::item_reflect:
    case TemplateId::item_refine:
      names = {"item", "pos", "neg"};
      if (build) names.push_back("hist");
      break;
  }
  if (id == TemplateId::user_reflect || id == TemplateId::item_reflect) {
    names.push_back("knowledge");
  }
  if (id == TemplateId::user_refine || id == TemplateId::item_refine) {
    names.push_back("knowledge");
    names.push_back("reflection");
  }
  std::sort(names.begin(), names.end());
  return names;
}

namespace {

std::size_t count_occurrences(const std::string& body, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t pos = body.find(needle); pos != std::string::npos;
       pos = body.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

}  // namespace

void PromptTemplate::validate() const {
  for (const auto& name : placeholders_for(id, stage)) {
    const std::size_t n = count_occurrences(body, "{" + name + "}");
    if (n != 1) {
      throw TemplateError("template " + std::string(to_string(id)) + ": placeholder {" + name +
                          "} appears " + std::to_string(n) + " times (expected exactly once)");
    }
  }
}

std::string render(const PromptTemplate& tmpl, const SlotMap& slots) {
  const auto names = placeholders_for(tmpl.id, tmpl.stage);
  for (const auto& name : names) {
    if (slots.count(name) == 0) {
      throw TemplateError("template " + std::string(to_string(tmpl.id)) + ": missing slot {" +
                          name + "}");
    }
  }
  for (const auto& [name, _] : slots) {
    if (!std::binary_search(names.begin(), names.end(), name)) {
      throw TemplateError("template " + std::string(to_string(tmpl.id)) + ": unexpected slot {" +
                          name + "}");
    }
  }

  std::string out;
  out.reserve(tmpl.body.size());
  const std::string& body = tmpl.body;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] == '{') {
      const std::size_t close = body.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = slots.find(body.substr(i + 1, close - i - 1));
        if (it != slots.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += body[i++];
  }
  return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir, PromptStage stage) {
  TemplateSet set(stage);
  for (auto id : kAllTemplateIds) {
    const auto path = dir / (std::string(to_string(id)) + ".txt");
    if (!std::filesystem::exists(path)) {
      throw TemplateError("missing template file " + path.string());
    }
    set.set(PromptTemplate{id, stage, read_text_file(path)});
  }
  return set;
}

void TemplateSet::set(PromptTemplate tmpl) {
  if (tmpl.stage != stage_) throw TemplateError("template stage does not match its set");
  tmpl.validate();
  const TemplateId id = tmpl.id;
  templates_[id] = std::move(tmpl);
}

const PromptTemplate& TemplateSet::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) {
    throw TemplateError("template set has no " + std::string(to_string(id)));
  }
  return it->second;
}

std::vector<std::filesystem::path> template_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (auto id : kAllTemplateIds) files.push_back(dir / (std::string(to_string(id)) + ".txt"));
  return files;
}

}  // namespace recrefine
