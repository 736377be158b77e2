#include "ctr_fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "recrefine/hashing.hpp"

namespace recrefine::testing {

using namespace recrefine::ctr;

std::vector<CTRExample> random_examples(const ModelShape& shape, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CTRExample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& x = out[i];
    for (std::size_t f = 0; f < shape.n_fields(); ++f) x.cat_features.emplace_back(f, rng.below(shape.field_sizes[f]));
    if (shape.fused()) {
      x.e_u = EmbeddingVector(shape.knowledge_dim);
      x.e_i = EmbeddingVector(shape.knowledge_dim);
      for (auto& v : x.e_u->values) v = rng.uniform(-1.0, 1.0);
      for (auto& v : x.e_i->values) v = rng.uniform(-1.0, 1.0);
    }
    x.label = static_cast<int>(i % 2);
  }
  return out;
}

ModelParams random_params(const ModelShape& shape, std::uint64_t seed, double scale) {
  ModelParams p{shape, std::vector<double>(make_layout(shape).total)};
  Rng rng(seed);
  for (auto& v : p.values) v = rng.uniform(-scale, scale);
  return p;
}

GradCheck gradient_check(const ModelParams& params, const std::vector<CTRExample>& batch, double h,
                         double floor) {
  std::vector<double> analytic;
  batch_bce_gradient(params, batch, analytic);
  GradCheck out;
  ModelParams probe = params;
  for (std::size_t k = 0; k < params.values.size(); ++k) {
    const double orig = probe.values[k];
    probe.values[k] = orig + h;
    const double up = batch_bce(probe, batch);
    probe.values[k] = orig - h;
    const double down = batch_bce(probe, batch);
    probe.values[k] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[k] - numeric) / std::max(std::abs(analytic[k]) + std::abs(numeric), floor);
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_index = k;
    }
    ++out.n_checked;
  }
  return out;
}

ModelParams embed_base_in_fused(const ModelParams& base, const ModelShape& fused_shape, std::uint64_t seed) {
  const ModelShape& bs = base.shape;
  if (bs.field_sizes != fused_shape.field_sizes || bs.emb_dim != fused_shape.emb_dim ||
      bs.hidden != fused_shape.hidden || bs.backbone != fused_shape.backbone || !fused_shape.fused()) {
    throw std::invalid_argument("fused shape does not extend the base shape");
  }
  ModelParams fused = random_params(fused_shape, seed);
  const Layout bl = make_layout(bs);
  const Layout fl = make_layout(fused_shape);
  const auto copy = [&](std::size_t from, std::size_t to, std::size_t n) {
    std::copy_n(base.values.begin() + static_cast<std::ptrdiff_t>(from), n,
                fused.values.begin() + static_cast<std::ptrdiff_t>(to));
  };
  for (std::size_t f = 0; f < bs.n_fields(); ++f) copy(bl.tables[f], fl.tables[f], bs.field_sizes[f] * bs.emb_dim);
  for (const DenseLayout* out : {&fl.user_out, &fl.item_out}) {
    std::fill_n(fused.values.begin() + static_cast<std::ptrdiff_t>(out->weight), out->in * out->out, 0.0);
    std::fill_n(fused.values.begin() + static_cast<std::ptrdiff_t>(out->bias), out->out, 0.0);
  }
  for (std::size_t l = 0; l < bl.mlp.size(); ++l) {
    const DenseLayout& b = bl.mlp[l];
    const DenseLayout& f = fl.mlp[l];
    for (std::size_t o = 0; o < b.out; ++o) {
      copy(b.weight + o * b.in, f.weight + o * f.in, b.in);
      // Columns reading connector slots only ever see zeros; leave them random.
    }
    copy(b.bias, f.bias, b.out);
  }
  if (bs.backbone == Backbone::deepfm) {
    for (std::size_t f = 0; f < bs.n_fields(); ++f) copy(bl.linear[f], fl.linear[f], bs.field_sizes[f]);
    copy(bl.linear_bias, fl.linear_bias, 1);
  }
  return fused;
}

}  // namespace recrefine::testing
