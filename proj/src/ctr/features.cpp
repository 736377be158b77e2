#include "recrefine/ctr/features.hpp"

#include <set>

#include "recrefine/error.hpp"

namespace recrefine::ctr {

namespace {

std::string attribute_value(const Catalog& catalog, const std::string& item, const std::string& key) {
  auto it = catalog.find(item);
  if (it == catalog.end()) return {};
  for (const auto& [k, v] : it->second.attributes) {
    if (k == key) return v;
  }
  return {};
}

}  // namespace

std::vector<std::string> attribute_keys(const Catalog& catalog) {
  std::set<std::string> keys;
  for (const auto& [id, meta] : catalog) {
    for (const auto& [k, v] : meta.attributes) keys.insert(k);
  }
  return {keys.begin(), keys.end()};
}

FeatureSpace FeatureSpace::build(const std::vector<Interaction>& train, const Catalog& catalog,
                                 const std::vector<std::string>& attribute_fields) {
  FeatureSpace fs;
  fs.fields_ = {"user_id", "item_id"};
  for (const auto& a : attribute_fields) {
    if (a == "user_id" || a == "item_id") throw ConfigError("attribute field name clashes: " + a);
    fs.fields_.push_back(a);
  }
  std::vector<std::set<std::string>> seen(fs.fields_.size());
  for (const auto& x : train) {
    seen[0].insert(x.user_id);
    seen[1].insert(x.item_id);
    for (std::size_t a = 0; a < attribute_fields.size(); ++a) {
      auto v = attribute_value(catalog, x.item_id, attribute_fields[a]);
      if (!v.empty()) seen[2 + a].insert(v);
    }
  }
  fs.vocab_.resize(fs.fields_.size());
  for (std::size_t f = 0; f < seen.size(); ++f) {
    std::size_t next = 1;
    for (const auto& v : seen[f]) fs.vocab_[f][v] = next++;
  }
  return fs;
}

std::vector<std::size_t> FeatureSpace::field_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& v : vocab_) out.push_back(v.size() + 1);
  return out;
}

std::size_t FeatureSpace::lookup(std::size_t field, const std::string& value) const {
  const auto& m = vocab_.at(field);
  auto it = m.find(value);
  return it == m.end() ? 0 : it->second;
}

json FeatureSpace::to_json() const {
  json fields = json::array();
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    std::vector<std::string> values(vocab_[f].size());
    for (const auto& [v, id] : vocab_[f]) values[id - 1] = v;
    fields.push_back({{"name", fields_[f]}, {"values", values}});
  }
  return {{"fields", fields}};
}

FeatureSpace FeatureSpace::from_json(const json& j) {
  FeatureSpace fs;
  for (const auto& f : j.at("fields")) {
    fs.fields_.push_back(f.at("name").get<std::string>());
    std::map<std::string, std::size_t> m;
    std::size_t next = 1;
    for (const auto& v : f.at("values")) m[v.get<std::string>()] = next++;
    fs.vocab_.push_back(std::move(m));
  }
  if (fs.fields_.size() < 2 || fs.fields_[0] != "user_id" || fs.fields_[1] != "item_id") {
    throw ValidationError("feature space must start with user_id and item_id");
  }
  return fs;
}

std::vector<CTRExample> make_examples(const std::vector<Interaction>& interactions,
                                      const Catalog& catalog, const FeatureSpace& space,
                                      const LabelRule& rule, const EmbeddingStore* knowledge,
                                      ExampleBuildStats* stats) {
  std::vector<CTRExample> out;
  out.reserve(interactions.size());
  const auto& fields = space.fields();
  const auto knowledge_for = [&](EntityKind kind, const std::string& id) {
    if (const auto* v = knowledge->find(kind, id)) return *v;
    if (stats) ++stats->missing_knowledge;
    return EmbeddingVector(knowledge->dims());
  };
  for (const auto& x : interactions) {
    CTRExample ex;
    ex.label = rule(x.rating);
    ex.cat_features.emplace_back(0, space.lookup(0, x.user_id));
    ex.cat_features.emplace_back(1, space.lookup(1, x.item_id));
    for (std::size_t f = 2; f < fields.size(); ++f) {
      ex.cat_features.emplace_back(f, space.lookup(f, attribute_value(catalog, x.item_id, fields[f])));
    }
    if (knowledge) {
      ex.e_u = knowledge_for(EntityKind::user, x.user_id);
      ex.e_i = knowledge_for(EntityKind::item, x.item_id);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace recrefine::ctr
