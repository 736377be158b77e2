#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "recrefine/ctr/metrics.hpp"
#include "recrefine/ctr/model.hpp"

namespace recrefine::ctr {

struct TrainConfig {
  std::size_t emb_dim = 8;
  std::vector<std::size_t> hidden = {32, 16};
  std::size_t connector_hidden = 16;
  Backbone backbone = Backbone::mlp;
  double learning_rate = 0.3;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double clamp_eps = 1e-7;

  /// Throws ConfigError for a non-positive learning rate, zero batch size or
  /// clamp_eps outside (0, 0.5).
  void validate() const;
};

json to_json(const TrainConfig& c);
/// Missing keys keep their defaults.
TrainConfig train_config_from_json(const json& j);

ModelShape make_shape(std::vector<std::size_t> field_sizes, std::size_t knowledge_dim,
                      const TrainConfig& cfg);

struct TrainResult {
  ModelParams params;
  /// Mean BCE over each epoch's mini-batches, measured before each update.
  std::vector<double> epoch_losses;
};

/// Plain mini-batch SGD on mean BCE. The example order is reshuffled every
/// epoch from `cfg.seed`; initialization uses the same seed. Throws
/// TrainingError for empty or single-class data and for a non-finite loss.
TrainResult train(std::span<const CTRExample> examples, const ModelShape& shape,
                  const TrainConfig& cfg);

/// Click probabilities in example order.
std::vector<double> predict(const ModelParams& params, std::span<const CTRExample> examples,
                            std::size_t workers = 1);

Metrics evaluate_model(const ModelParams& params, std::span<const CTRExample> examples,
                       double clamp_eps = 1e-7, std::size_t workers = 1);

}  // namespace recrefine::ctr
