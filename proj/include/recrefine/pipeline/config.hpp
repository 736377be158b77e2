#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "recrefine/backend.hpp"
#include "recrefine/ctr/train.hpp"
#include "recrefine/encoder.hpp"
#include "recrefine/inference.hpp"
#include "recrefine/ingest.hpp"

namespace recrefine::pipeline {

namespace fs = std::filesystem;

/// Where one model role gets its replies: a scripted oracle file or an HTTP
/// chat-completion endpoint. Exactly one must be configured.
struct BackendSpec {
  std::optional<fs::path> scripted;
  std::optional<HttpBackendConfig> http;
};

inline const std::vector<std::string> kRoles = {"user_actor", "user_reflector", "item_actor",
                                                "item_reflector"};

struct BuilderSection {
  std::size_t passes = 1;
  std::size_t n_pos = 3;
  std::size_t n_neg = 3;
  std::size_t max_hist = 15;
  std::size_t targets_per_user = 1;
  std::size_t targets_per_item = 1;
};

struct StrategySection {
  Strategy name = Strategy::iterative;
  std::size_t max_retries = 1;
  std::size_t k = 3;
  double temperature = 0.7;
};

struct EncoderSection {
  std::string kind = "hash";  // hash | remote
  HashEncoderConfig hash;
  RemoteEncoderConfig remote;
};

struct PipelineConfig {
  fs::path source;
  DatasetKind kind = DatasetKind::movielens;
  fs::path interactions;
  fs::path items;
  LogFormat log_format;
  ItemFormat item_format;
  int amazon_positive_min = 5;
  SplitConfig split;
  BuilderSection builder;
  fs::path construction_templates;
  fs::path inference_templates;
  std::map<std::string, BackendSpec> backends;
  StrategySection strategy;
  EncoderSection encoder;
  ctr::TrainConfig ctr;
  /// Item attribute keys used as CTR fields; absent means every key in the catalog.
  std::optional<std::vector<std::string>> attribute_fields;
  fs::path output_dir = "out";
  std::int64_t seed = 0;
  std::size_t workers = 1;

  LabelRule label_rule() const { return {kind, amazon_positive_min}; }
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::int64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<fs::path> out;
};

/// Parses a JSON config (comments allowed). Relative paths resolve against
/// the config file's directory, except the output directory, which resolves
/// against the working directory when given as an override. Validates that
/// every referenced file exists and every template parses; throws ConfigError
/// otherwise.
PipelineConfig load_config(const fs::path& path, const Overrides& overrides = {});

PipelineConfig parse_config(const json& j, const fs::path& base_dir, const Overrides& overrides = {});

/// Config echo written next to outputs (paths as given, no secrets).
json describe(const PipelineConfig& cfg);

struct BackendSet {
  RoleBackends user;
  RoleBackends item;
};

/// Scripted files shared by several roles are loaded once.
BackendSet make_backends(const PipelineConfig& cfg);

std::unique_ptr<TextEncoder> make_encoder(const PipelineConfig& cfg);

}  // namespace recrefine::pipeline
