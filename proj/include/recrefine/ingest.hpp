#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "recrefine/jsonl.hpp"

namespace recrefine {

enum class DatasetKind { movielens, amazon };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

struct Interaction {
  std::string user_id;
  std::string item_id;
  int rating = 0;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

struct ItemMeta {
  std::string item_id;
  std::string title;
  std::vector<std::pair<std::string, std::string>> attributes;
};

using Catalog = std::map<std::string, ItemMeta>;

struct RatedItem {
  std::string item_id;
  int rating = 0;

  bool operator==(const RatedItem&) const = default;
};

/// Chronologically ordered (oldest first).
using History = std::vector<RatedItem>;

struct LabeledSample {
  History hist;
  std::string target_item;
  int label = 0;

  bool operator==(const LabeledSample&) const = default;
};

struct ItemCentricSample {
  std::string item;
  std::vector<History> pos;
  std::vector<History> neg;
  History tar;
  int label = 0;

  bool operator==(const ItemCentricSample&) const = default;
};

struct SplitConfig {
  double train_fraction = 0.8;
};

struct Split {
  std::vector<Interaction> train;
  std::vector<Interaction> test;
};

/// Positive-label rule. MovieLens: rating > 3. Amazon: rating >= amazon_positive_min
/// (default 5, i.e. only five-star reviews count as positive).
struct LabelRule {
  DatasetKind kind = DatasetKind::movielens;
  int amazon_positive_min = 5;

  int operator()(int rating) const;
};

int binarize(int rating, DatasetKind kind);

/// Total order used everywhere interactions are sorted: (timestamp, user_id, item_id).
bool chronological_less(const Interaction& a, const Interaction& b);

Split chronological_split(std::vector<Interaction> interactions, const SplitConfig& cfg = {});

struct UserSampleOptions {
  std::size_t max_hist = 15;
  /// Keep only the most recent N targets per user; 0 keeps all.
  std::size_t max_targets_per_user = 0;
  LabelRule rule;
};

std::vector<LabeledSample> build_user_samples(const std::vector<Interaction>& train,
                                              const UserSampleOptions& opts = {});

struct ItemSampleOptions {
  std::size_t n_pos = 3;
  std::size_t n_neg = 3;
  std::size_t targets_per_item = 1;
  std::size_t max_hist = 15;
  LabelRule rule;
};

std::vector<ItemCentricSample> build_item_samples(const std::vector<Interaction>& train,
                                                  const ItemSampleOptions& opts,
                                                  std::uint64_t seed);

// ---- file formats -------------------------------------------------------

struct LogFormat {
  std::string delimiter = "::";
  bool has_header = false;
};

struct ItemFormat {
  std::string delimiter = "::";
  std::string attribute_separator = "|";
  /// Attribute columns without key=value pairs (MovieLens genres) are stored
  /// whole under this key.
  std::string default_attribute_key = "genres";
  bool has_header = false;
};

std::vector<Interaction> parse_interactions(std::istream& in, const LogFormat& fmt = {});
std::vector<Interaction> load_interactions(const std::filesystem::path& path,
                                           const LogFormat& fmt = {});
Catalog parse_catalog(std::istream& in, const ItemFormat& fmt = {});
Catalog load_catalog(const std::filesystem::path& path, const ItemFormat& fmt = {});

json to_json(const History& hist);
History history_from_json(const json& j);
json to_json(const LabeledSample& s);
json to_json(const ItemCentricSample& s);
LabeledSample labeled_sample_from_json(const json& j);
ItemCentricSample item_sample_from_json(const json& j);

}  // namespace recrefine
