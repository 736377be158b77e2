#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recrefine/ingest.hpp"
#include "recrefine/prompt.hpp"

namespace recrefine {

// Text renderings of interaction data used to fill prompt slots.

std::string describe_item(const std::string& item_id, const Catalog& catalog);
std::string describe_history(const History& hist, const Catalog& catalog);
std::string describe_user_group(const std::vector<History>& users, const Catalog& catalog);

/// {hist, item} for construction prompts.
SlotMap user_construction_slots(const LabeledSample& s, const Catalog& catalog);
/// {item, pos, neg, hist(=target user)} for construction prompts.
SlotMap item_construction_slots(const ItemCentricSample& s, const Catalog& catalog);

/// Entity-level slots seen by the actor and reflector after fine-tuning:
/// users get {hist}, items get {item, pos, neg}.
SlotMap user_entity_slots(const History& hist, const Catalog& catalog);
SlotMap item_entity_slots(const std::string& item_id, const std::vector<History>& pos,
                          const std::vector<History>& neg, const Catalog& catalog);

SlotMap user_entity_slots(const LabeledSample& s, const Catalog& catalog);
SlotMap item_entity_slots(const ItemCentricSample& s, const Catalog& catalog);

struct EntityContext {
  EntityKind kind = EntityKind::user;
  std::string entity_id;
  SlotMap slots;
};

struct EntityContextOptions {
  std::size_t max_hist = 15;
  std::size_t n_pos = 3;
  std::size_t n_neg = 3;
  LabelRule rule;
};

/// One context per user and per item seen anywhere in `all`, built only from
/// `train` so test interactions never leak into knowledge. Users come first,
/// then items, each sorted by id.
std::vector<EntityContext> build_entity_contexts(const std::vector<Interaction>& all,
                                                 const std::vector<Interaction>& train,
                                                 const Catalog& catalog,
                                                 const EntityContextOptions& opts,
                                                 std::uint64_t seed);

}  // namespace recrefine
