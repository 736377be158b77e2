#include "recrefine/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"

namespace recrefine {

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "movielens") return DatasetKind::movielens;
  if (name == "amazon") return DatasetKind::amazon;
  throw ConfigError("unknown dataset kind '" + name + "' (expected movielens|amazon)");
}

std::string to_string(DatasetKind kind) {
  return kind == DatasetKind::movielens ? "movielens" : "amazon";
}

int LabelRule::operator()(int rating) const {
  if (rating < 1 || rating > 5) {
    throw ValidationError("rating " + std::to_string(rating) + " outside [1,5]");
  }
  if (kind == DatasetKind::movielens) return rating > 3 ? 1 : 0;
  return rating >= amazon_positive_min ? 1 : 0;
}

int binarize(int rating, DatasetKind kind) { return LabelRule{kind}(rating); }

bool chronological_less(const Interaction& a, const Interaction& b) {
  return std::tie(a.timestamp, a.user_id, a.item_id) <
         std::tie(b.timestamp, b.user_id, b.item_id);
}

Split chronological_split(std::vector<Interaction> interactions, const SplitConfig& cfg) {
  if (interactions.empty()) throw ValidationError("chronological_split: empty input");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie in (0,1)");
  }
  std::sort(interactions.begin(), interactions.end(), chronological_less);
  const auto n_train = static_cast<std::size_t>(
      std::floor(static_cast<double>(interactions.size()) * cfg.train_fraction));
  Split split;
  split.train.assign(interactions.begin(), interactions.begin() + n_train);
  split.test.assign(interactions.begin() + n_train, interactions.end());
  return split;
}

namespace {

// Per-user interactions in chronological order.
std::map<std::string, std::vector<Interaction>> group_by_user(const std::vector<Interaction>& xs) {
  std::map<std::string, std::vector<Interaction>> by_user;
  for (const auto& x : xs) by_user[x.user_id].push_back(x);
  for (auto& [_, v] : by_user) std::sort(v.begin(), v.end(), chronological_less);
  return by_user;
}

// Up to max_hist most recent interactions strictly before `ts`, skipping `exclude_item`.
History history_before(const std::vector<Interaction>& seq, std::int64_t ts,
                       const std::string& exclude_item, std::size_t max_hist) {
  History hist;
  for (const auto& x : seq) {
    if (x.timestamp >= ts) break;
    if (x.item_id == exclude_item) continue;
    hist.push_back({x.item_id, x.rating});
  }
  if (hist.size() > max_hist) hist.erase(hist.begin(), hist.end() - static_cast<long>(max_hist));
  return hist;
}

History history_excluding(const std::vector<Interaction>& seq, const std::string& exclude_item,
                          std::size_t max_hist) {
  History hist;
  for (const auto& x : seq) {
    if (x.item_id != exclude_item) hist.push_back({x.item_id, x.rating});
  }
  if (hist.size() > max_hist) hist.erase(hist.begin(), hist.end() - static_cast<long>(max_hist));
  return hist;
}

}  // namespace

std::vector<LabeledSample> build_user_samples(const std::vector<Interaction>& train,
                                              const UserSampleOptions& opts) {
  if (opts.max_hist < 1) throw ValidationError("max_hist must be >= 1");
  std::vector<LabeledSample> out;
  for (const auto& [user, seq] : group_by_user(train)) {
    if (seq.size() < 2) continue;
    std::vector<LabeledSample> mine;
    for (std::size_t t = 1; t < seq.size(); ++t) {
      History hist = history_before(seq, seq[t].timestamp, seq[t].item_id, opts.max_hist);
      if (hist.empty()) continue;
      mine.push_back({std::move(hist), seq[t].item_id, opts.rule(seq[t].rating)});
    }
    if (opts.max_targets_per_user > 0 && mine.size() > opts.max_targets_per_user) {
      mine.erase(mine.begin(), mine.end() - static_cast<long>(opts.max_targets_per_user));
    }
    for (auto& s : mine) out.push_back(std::move(s));
  }
  return out;
}

std::vector<ItemCentricSample> build_item_samples(const std::vector<Interaction>& train,
                                                  const ItemSampleOptions& opts,
                                                  std::uint64_t seed) {
  if (opts.n_pos < 1 || opts.n_neg < 1) throw ValidationError("n_pos and n_neg must be >= 1");
  if (opts.max_hist < 1) throw ValidationError("max_hist must be >= 1");
  const auto by_user = group_by_user(train);

  // item -> user -> latest interaction of that user with the item
  std::map<std::string, std::map<std::string, Interaction>> by_item;
  for (const auto& [user, seq] : by_user) {
    for (const auto& x : seq) by_item[x.item_id][user] = x;
  }

  std::vector<ItemCentricSample> out;
  for (const auto& [item, users] : by_item) {
    std::vector<std::string> likers, dislikers;
    for (const auto& [user, x] : users) {
      if (history_excluding(by_user.at(user), item, 1).empty()) continue;
      (opts.rule(x.rating) == 1 ? likers : dislikers).push_back(user);
    }
    if (likers.size() < opts.n_pos || dislikers.size() < opts.n_neg) continue;

    Rng rng(mix64(seed ^ fnv1a64(item)));
    rng.shuffle(likers);
    rng.shuffle(dislikers);

    std::set<std::string> context_users;
    ItemCentricSample proto;
    proto.item = item;
    for (std::size_t i = 0; i < opts.n_pos; ++i) {
      context_users.insert(likers[i]);
      proto.pos.push_back(history_excluding(by_user.at(likers[i]), item, opts.max_hist));
    }
    for (std::size_t i = 0; i < opts.n_neg; ++i) {
      context_users.insert(dislikers[i]);
      proto.neg.push_back(history_excluding(by_user.at(dislikers[i]), item, opts.max_hist));
    }

    std::vector<std::string> candidates;
    for (const auto& [user, x] : users) {
      if (context_users.count(user) != 0) continue;
      if (history_before(by_user.at(user), x.timestamp, item, 1).empty()) continue;
      candidates.push_back(user);
    }
    if (candidates.empty()) continue;
    rng.shuffle(candidates);
    const std::size_t n_targets = std::min(candidates.size(), opts.targets_per_item);
    for (std::size_t t = 0; t < n_targets; ++t) {
      const Interaction& x = users.at(candidates[t]);
      ItemCentricSample s = proto;
      s.tar = history_before(by_user.at(x.user_id), x.timestamp, item, opts.max_hist);
      s.label = opts.rule(x.rating);
      out.push_back(std::move(s));
    }
  }
  return out;
}

// ---- parsing --------------------------------------------------------------

namespace {

std::vector<std::string> split(const std::string& line, const std::string& delim) {
  std::vector<std::string> parts;
  if (delim.empty()) {
    parts.push_back(line);
    return parts;
  }
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + delim.size();
  }
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

long long parse_integral(const std::string& field, const char* what, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size() || v != std::floor(v)) throw std::invalid_argument(field);
    return static_cast<long long>(v);
  } catch (const std::exception&) {
    throw ValidationError("line " + std::to_string(lineno) + ": bad " + what + " '" + field + "'");
  }
}

}  // namespace

std::vector<Interaction> parse_interactions(std::istream& in, const LogFormat& fmt) {
  std::vector<Interaction> out;
  std::set<std::tuple<std::string, std::string, std::int64_t>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (fmt.has_header && lineno == 1) continue;
    line = trim(line);
    if (line.empty()) continue;
    auto parts = split(line, fmt.delimiter);
    if (parts.size() != 4) {
      throw ValidationError("line " + std::to_string(lineno) + ": expected 4 fields, got " +
                            std::to_string(parts.size()));
    }
    Interaction x;
    x.user_id = trim(parts[0]);
    x.item_id = trim(parts[1]);
    if (x.user_id.empty() || x.item_id.empty()) {
      throw ValidationError("line " + std::to_string(lineno) + ": empty user or item id");
    }
    const long long rating = parse_integral(trim(parts[2]), "rating", lineno);
    if (rating < 1 || rating > 5) {
      throw ValidationError("line " + std::to_string(lineno) + ": rating " +
                            std::to_string(rating) + " outside [1,5]");
    }
    x.rating = static_cast<int>(rating);
    x.timestamp = parse_integral(trim(parts[3]), "timestamp", lineno);
    if (x.timestamp < 0) {
      throw ValidationError("line " + std::to_string(lineno) + ": negative timestamp");
    }
    if (!seen.emplace(x.user_id, x.item_id, x.timestamp).second) {
      throw ValidationError("line " + std::to_string(lineno) +
                            ": duplicate (user, item, timestamp)");
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Interaction> load_interactions(const std::filesystem::path& path,
                                           const LogFormat& fmt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open interaction log " + path.string());
  try {
    return parse_interactions(in, fmt);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

Catalog parse_catalog(std::istream& in, const ItemFormat& fmt) {
  Catalog catalog;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (fmt.has_header && lineno == 1) continue;
    line = trim(line);
    if (line.empty()) continue;
    auto parts = split(line, fmt.delimiter);
    ItemMeta meta;
    meta.item_id = trim(parts[0]);
    if (meta.item_id.empty()) {
      throw ValidationError("line " + std::to_string(lineno) + ": empty item id");
    }
    std::string attrs;
    if (parts.size() == 2) {
      meta.title = trim(parts[1]);
    } else if (parts.size() > 2) {
      for (std::size_t i = 1; i + 1 < parts.size(); ++i) {
        if (i > 1) meta.title += fmt.delimiter;
        meta.title += parts[i];
      }
      meta.title = trim(meta.title);
      attrs = trim(parts.back());
    }
    if (!attrs.empty()) {
      auto pieces = split(attrs, fmt.attribute_separator);
      const bool keyed = std::all_of(pieces.begin(), pieces.end(), [](const std::string& p) {
        return p.find('=') != std::string::npos;
      });
      if (keyed) {
        std::set<std::string> keys;
        for (const auto& p : pieces) {
          const auto eq = p.find('=');
          std::string key = trim(p.substr(0, eq));
          if (!keys.insert(key).second) {
            throw ValidationError("line " + std::to_string(lineno) + ": duplicate attribute '" +
                                  key + "'");
          }
          meta.attributes.emplace_back(std::move(key), trim(p.substr(eq + 1)));
        }
      } else {
        meta.attributes.emplace_back(fmt.default_attribute_key, attrs);
      }
    }
    const std::string id = meta.item_id;
    if (!catalog.emplace(id, std::move(meta)).second) {
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate item id '" + id + "'");
    }
  }
  return catalog;
}

Catalog load_catalog(const std::filesystem::path& path, const ItemFormat& fmt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open item metadata " + path.string());
  try {
    return parse_catalog(in, fmt);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

// ---- JSON -----------------------------------------------------------------

json to_json(const History& hist) {
  json arr = json::array();
  for (const auto& r : hist) arr.push_back({{"item_id", r.item_id}, {"rating", r.rating}});
  return arr;
}

History history_from_json(const json& j) {
  History hist;
  for (const auto& r : j) hist.push_back({r.at("item_id").get<std::string>(), r.at("rating").get<int>()});
  return hist;
}

json to_json(const LabeledSample& s) {
  return {{"hist", to_json(s.hist)}, {"target_item", s.target_item}, {"label", s.label}};
}

json to_json(const ItemCentricSample& s) {
  json pos = json::array(), neg = json::array();
  for (const auto& h : s.pos) pos.push_back(to_json(h));
  for (const auto& h : s.neg) neg.push_back(to_json(h));
  return {{"item", s.item}, {"pos", pos}, {"neg", neg}, {"tar", to_json(s.tar)}, {"label", s.label}};
}

LabeledSample labeled_sample_from_json(const json& j) {
  return {history_from_json(j.at("hist")), j.at("target_item").get<std::string>(),
          j.at("label").get<int>()};
}

ItemCentricSample item_sample_from_json(const json& j) {
  ItemCentricSample s;
  s.item = j.at("item").get<std::string>();
  for (const auto& h : j.at("pos")) s.pos.push_back(history_from_json(h));
  for (const auto& h : j.at("neg")) s.neg.push_back(history_from_json(h));
  s.tar = history_from_json(j.at("tar"));
  s.label = j.at("label").get<int>();
  return s;
}

}  // namespace recrefine
