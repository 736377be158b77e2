#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace recrefine {

enum class TemplateId { user_reason, user_reflect, user_refine, item_reason, item_reflect, item_refine };

inline constexpr std::array<TemplateId, 6> kAllTemplateIds = {
    TemplateId::user_reason, TemplateId::user_reflect, TemplateId::user_refine,
    TemplateId::item_reason, TemplateId::item_reflect, TemplateId::item_refine};

std::string_view to_string(TemplateId id);
TemplateId parse_template_id(std::string_view name);

enum class EntityKind { user, item };

std::string_view to_string(EntityKind kind);
EntityKind parse_entity_kind(std::string_view name);

enum class Capability { reason, reflect, refine };

std::string_view to_string(Capability c);

TemplateId template_for(EntityKind kind, Capability cap);

/// Construction prompts see the supervision target (the target item for users,
/// the target user's history for items) and ask for a prediction. Actor and
/// reflector prompts used for fine-tuning data and inference see only the
/// entity itself.
enum class PromptStage { construction, inference };

/// Placeholder names a template must reference exactly once.
std::vector<std::string> placeholders_for(TemplateId id, PromptStage stage);

using SlotMap = std::map<std::string, std::string>;

struct PromptTemplate {
  TemplateId id = TemplateId::user_reason;
  PromptStage stage = PromptStage::construction;
  std::string body;

  /// Throws TemplateError unless every schema placeholder occurs exactly once.
  void validate() const;
};

/// Substitutes each {name} placeholder in a single left-to-right pass; slot
/// values are inserted verbatim and never re-expanded. Braces that do not name
/// a schema placeholder are copied unchanged.
std::string render(const PromptTemplate& tmpl, const SlotMap& slots);

class TemplateSet {
 public:
  TemplateSet() = default;
  explicit TemplateSet(PromptStage stage) : stage_(stage) {}

  /// Loads <dir>/<template_id>.txt for all six ids.
  static TemplateSet load(const std::filesystem::path& dir, PromptStage stage);

  void set(PromptTemplate tmpl);
  bool has(TemplateId id) const { return templates_.count(id) != 0; }
  const PromptTemplate& get(TemplateId id) const;
  PromptStage stage() const { return stage_; }

 private:
  PromptStage stage_ = PromptStage::construction;
  std::map<TemplateId, PromptTemplate> templates_;
};

/// Files expected by TemplateSet::load; used for fail-fast config validation.
std::vector<std::filesystem::path> template_files(const std::filesystem::path& dir);

}  // namespace recrefine
