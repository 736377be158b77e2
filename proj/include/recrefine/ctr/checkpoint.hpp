#pragma once

#include <filesystem>

#include "recrefine/ctr/features.hpp"
#include "recrefine/ctr/model.hpp"

namespace recrefine::ctr {

struct Checkpoint {
  ModelParams params;
  FeatureSpace features;
  /// Free-form training record (config, per-epoch losses).
  json info;
};

/// One JSON header line {format, shape, features, info, n_params} followed by
/// n_params little-endian IEEE-754 doubles.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace recrefine::ctr
