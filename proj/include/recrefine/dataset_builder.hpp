#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recrefine/backend.hpp"
#include "recrefine/ingest.hpp"
#include "recrefine/prompt.hpp"
#include "recrefine/replies.hpp"

namespace recrefine {

// input_context holds the entity-level prompt slots (see user_entity_slots /
// item_entity_slots) plus knowledge/reflection where the capability needs
// them, so any prompt wording can be rendered from a stored sample later.

struct ReasonSample {
  std::string provenance_id;
  SlotMap input_context;
  std::string target_knowledge;
};

struct ReflectSample {
  std::string provenance_id;
  SlotMap input_context;
  Verdict verdict = Verdict::reasonable;
  std::string reflection_text;
};

struct RefineSample {
  std::string provenance_id;
  SlotMap input_context;
  std::string target_refined;
};

struct BuildStats {
  std::size_t n_input = 0;
  std::size_t n_reason = 0;
  std::size_t n_reflect_pos = 0;
  std::size_t n_reflect_neg = 0;
  std::size_t n_refine = 0;
  std::size_t n_discarded_mixed = 0;
  std::size_t n_discarded_failed_refine = 0;
  std::size_t n_parse_errors = 0;

  bool operator==(const BuildStats&) const = default;
};

struct CapabilityDatasets {
  EntityKind kind = EntityKind::user;
  std::vector<ReasonSample> reason;
  std::vector<ReflectSample> reflect;
  std::vector<RefineSample> refine;
  BuildStats stats;
  /// Set when a backend failure stopped the run. Datasets and stats then cover
  /// every input before the failing one, in input order.
  std::optional<std::string> abort_error;
};

struct BuildOptions {
  /// Independent construction passes per input sample.
  std::size_t passes = 1;
  std::size_t workers = 1;
  std::int64_t seed = 0;
};

CapabilityDatasets build_user_datasets(const std::vector<LabeledSample>& samples,
                                       const Backend& backend, const TemplateSet& construction,
                                       const Catalog& catalog, const BuildOptions& opts = {});

CapabilityDatasets build_item_datasets(const std::vector<ItemCentricSample>& samples,
                                       const Backend& backend, const TemplateSet& construction,
                                       const Catalog& catalog, const BuildOptions& opts = {});

json to_json(const ReasonSample& s);
json to_json(const ReflectSample& s);
json to_json(const RefineSample& s);
json to_json(const BuildStats& s);
ReasonSample reason_sample_from_json(const json& j);
ReflectSample reflect_sample_from_json(const json& j);
RefineSample refine_sample_from_json(const json& j);
BuildStats build_stats_from_json(const json& j);

}  // namespace recrefine
