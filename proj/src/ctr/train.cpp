#include "recrefine/ctr/train.hpp"

#include <cmath>
#include <numeric>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"
#include "recrefine/parallel.hpp"

namespace recrefine::ctr {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ConfigError("clamp_eps must lie in (0, 0.5)");
  if (emb_dim == 0) throw ConfigError("emb_dim must be >= 1");
}

json to_json(const TrainConfig& c) {
  return {{"emb_dim", c.emb_dim},
          {"hidden", c.hidden},
          {"connector_hidden", c.connector_hidden},
          {"backbone", to_string(c.backbone)},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"clamp_eps", c.clamp_eps}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.emb_dim = j.value("emb_dim", c.emb_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.connector_hidden = j.value("connector_hidden", c.connector_hidden);
  if (j.contains("backbone")) c.backbone = parse_backbone(j.at("backbone").get<std::string>());
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.clamp_eps = j.value("clamp_eps", c.clamp_eps);
  c.validate();
  return c;
}

ModelShape make_shape(std::vector<std::size_t> field_sizes, std::size_t knowledge_dim,
                      const TrainConfig& cfg) {
  ModelShape s;
  s.field_sizes = std::move(field_sizes);
  s.emb_dim = cfg.emb_dim;
  s.knowledge_dim = knowledge_dim;
  s.connector_hidden = cfg.connector_hidden;
  s.hidden = cfg.hidden;
  s.backbone = cfg.backbone;
  s.validate();
  return s;
}

TrainResult train(std::span<const CTRExample> examples, const ModelShape& shape,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (examples.empty()) throw TrainingError("no training examples");
  std::size_t n_pos = 0;
  for (const auto& x : examples) {
    check_example(shape, x);
    n_pos += x.label == 1 ? 1 : 0;
  }
  if (n_pos == 0 || n_pos == examples.size()) {
    throw TrainingError("training data contains a single class");
  }

  TrainResult result{init_params(shape, cfg.seed), {}};
  Rng rng(mix64(cfg.seed ^ 0x5eed0f0c7a1e5ULL));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad;
  std::vector<CTRExample> batch;
  auto& w = result.params.values;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
      const double loss = batch_bce_gradient(result.params, batch, grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("loss diverged in epoch " + std::to_string(epoch + 1));
      }
      loss_sum += loss * static_cast<double>(end - start);
      for (std::size_t p = 0; p < w.size(); ++p) w[p] -= cfg.learning_rate * grad[p];
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("loss diverged in epoch " + std::to_string(epoch + 1));
    }
    result.epoch_losses.push_back(epoch_loss);
  }
  for (double v : w) {
    if (!std::isfinite(v)) throw TrainingError("parameters became non-finite");
  }
  return result;
}

std::vector<double> predict(const ModelParams& params, std::span<const CTRExample> examples,
                            std::size_t workers) {
  constexpr std::size_t kChunk = 256;
  const std::size_t n_chunks = (examples.size() + kChunk - 1) / kChunk;
  const auto chunks = ordered_parallel_map<std::vector<double>>(n_chunks, workers, [&](std::size_t c) {
    std::vector<double> out;
    for (std::size_t i = c * kChunk; i < std::min(examples.size(), (c + 1) * kChunk); ++i) {
      out.push_back(forward(params, examples[i]));
    }
    return out;
  });
  std::vector<double> scores;
  scores.reserve(examples.size());
  for (const auto& c : chunks) scores.insert(scores.end(), c.begin(), c.end());
  return scores;
}

Metrics evaluate_model(const ModelParams& params, std::span<const CTRExample> examples,
                       double clamp_eps, std::size_t workers) {
  const auto scores = predict(params, examples, workers);
  std::vector<int> labels;
  labels.reserve(examples.size());
  for (const auto& x : examples) labels.push_back(x.label);
  return evaluate(scores, labels, clamp_eps);
}

}  // namespace recrefine::ctr
