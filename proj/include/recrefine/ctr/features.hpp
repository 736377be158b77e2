#pragma once

#include <map>
#include <string>
#include <vector>

#include "recrefine/ctr/model.hpp"
#include "recrefine/encoder.hpp"
#include "recrefine/ingest.hpp"

namespace recrefine::ctr {

/// Categorical fields and their value vocabularies. Field 0 is user_id,
/// field 1 is item_id, then one field per selected item attribute. Value id 0
/// is reserved for values never seen in training.
class FeatureSpace {
 public:
  static FeatureSpace build(const std::vector<Interaction>& train, const Catalog& catalog,
                            const std::vector<std::string>& attribute_fields);

  const std::vector<std::string>& fields() const { return fields_; }
  std::vector<std::size_t> field_sizes() const;
  std::size_t lookup(std::size_t field, const std::string& value) const;

  json to_json() const;
  static FeatureSpace from_json(const json& j);

 private:
  std::vector<std::string> fields_;
  std::vector<std::map<std::string, std::size_t>> vocab_;
};

/// Every catalog attribute key, sorted.
std::vector<std::string> attribute_keys(const Catalog& catalog);

struct ExampleBuildStats {
  std::size_t missing_knowledge = 0;
};

/// One example per interaction. With a knowledge store, e_u and e_i come from
/// it; entities absent from the store get a zero vector and are counted.
std::vector<CTRExample> make_examples(const std::vector<Interaction>& interactions,
                                      const Catalog& catalog, const FeatureSpace& space,
                                      const LabelRule& rule, const EmbeddingStore* knowledge,
                                      ExampleBuildStats* stats = nullptr);

}  // namespace recrefine::ctr
