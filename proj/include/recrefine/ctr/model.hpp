#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "recrefine/encoder.hpp"
#include "recrefine/jsonl.hpp"

namespace recrefine::ctr {

enum class Backbone { mlp, deepfm };

std::string_view to_string(Backbone b);
Backbone parse_backbone(std::string_view name);

struct ModelShape {
  /// Number of values per categorical field, including the reserved OOV id 0.
  std::vector<std::size_t> field_sizes;
  std::size_t emb_dim = 8;
  /// Length of knowledge vectors; 0 builds the base model without connectors.
  std::size_t knowledge_dim = 0;
  std::size_t connector_hidden = 16;
  std::vector<std::size_t> hidden = {32, 16};
  Backbone backbone = Backbone::mlp;

  bool fused() const { return knowledge_dim > 0; }
  std::size_t n_fields() const { return field_sizes.size(); }
  /// Embedding slots fed to the backbone: one per field plus two connectors.
  std::size_t n_slots() const { return n_fields() + (fused() ? 2 : 0); }
  std::size_t concat_dim() const { return n_slots() * emb_dim; }

  /// Throws ModelError for empty fields or zero sizes.
  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

json to_json(const ModelShape& s);
ModelShape shape_from_json(const json& j);

/// A dense layer stored row-major: weight[o * in + i], followed by `out` biases.
struct DenseLayout {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;
};

/// Offsets of every parameter block inside the flat parameter vector.
struct Layout {
  std::vector<std::size_t> tables;  // per field: field_size x emb_dim
  DenseLayout user_hidden, user_out, item_hidden, item_out;  // fused only
  std::vector<DenseLayout> mlp;     // hidden layers then the 1-unit output layer
  std::vector<std::size_t> linear;  // deepfm only: per field, field_size scalars
  std::size_t linear_bias = 0;      // deepfm only
  std::size_t total = 0;
};

Layout make_layout(const ModelShape& shape);

struct ModelParams {
  ModelShape shape;
  std::vector<double> values;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)) for every weight
/// block; embedding tables use (field_size, emb_dim) as fans. Biases start at 0.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed);

struct CTRExample {
  /// (field_id, value_id); every field exactly once.
  std::vector<std::pair<std::size_t, std::size_t>> cat_features;
  std::optional<EmbeddingVector> e_u;
  std::optional<EmbeddingVector> e_i;
  int label = 0;
};

/// Throws ModelError when the example does not fit the model's shape.
void check_example(const ModelShape& shape, const CTRExample& x);

double sigmoid(double z);

/// Raw score before the sigmoid.
double forward_logit(const ModelParams& params, const CTRExample& x);
double forward(const ModelParams& params, const CTRExample& x);

/// Adds d(loss)/d(params) to `grad` (same length as params.values) given
/// d(loss)/d(logit). Returns the logit.
double accumulate_gradient(const ModelParams& params, const CTRExample& x,
                           const std::function<double(double)>& dloss_dlogit,
                           std::span<double> grad);

/// Mean binary cross-entropy over the batch, computed from logits so large
/// margins stay finite.
double batch_bce(const ModelParams& params, std::span<const CTRExample> batch);

/// Mean BCE and its gradient over the batch.
double batch_bce_gradient(const ModelParams& params, std::span<const CTRExample> batch,
                          std::vector<double>& grad);

}  // namespace recrefine::ctr
