#include "recrefine/ctr/model.hpp"

#include <cmath>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"

namespace recrefine::ctr {

std::string_view to_string(Backbone b) { return b == Backbone::mlp ? "mlp" : "deepfm"; }

Backbone parse_backbone(std::string_view name) {
  if (name == "mlp") return Backbone::mlp;
  if (name == "deepfm") return Backbone::deepfm;
  throw ConfigError("unknown backbone '" + std::string(name) + "' (expected mlp|deepfm)");
}

void ModelShape::validate() const {
  if (field_sizes.empty()) throw ModelError("model needs at least one categorical field");
  for (std::size_t f = 0; f < field_sizes.size(); ++f) {
    if (field_sizes[f] == 0) throw ModelError("field " + std::to_string(f) + " has no values");
  }
  if (emb_dim == 0) throw ModelError("emb_dim must be >= 1");
  if (fused() && connector_hidden == 0) throw ModelError("connector_hidden must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw ModelError("hidden layer sizes must be >= 1");
  }
}

json to_json(const ModelShape& s) {
  return {{"field_sizes", s.field_sizes},   {"emb_dim", s.emb_dim},
          {"knowledge_dim", s.knowledge_dim}, {"connector_hidden", s.connector_hidden},
          {"hidden", s.hidden},             {"backbone", to_string(s.backbone)}};
}

ModelShape shape_from_json(const json& j) {
  ModelShape s;
  s.field_sizes = j.at("field_sizes").get<std::vector<std::size_t>>();
  s.emb_dim = j.at("emb_dim").get<std::size_t>();
  s.knowledge_dim = j.at("knowledge_dim").get<std::size_t>();
  s.connector_hidden = j.at("connector_hidden").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.backbone = parse_backbone(j.at("backbone").get<std::string>());
  s.validate();
  return s;
}

namespace {

DenseLayout dense(std::size_t in, std::size_t out, std::size_t& cursor) {
  DenseLayout d{in, out, cursor, cursor + in * out};
  cursor += in * out + out;
  return d;
}

}  // namespace

Layout make_layout(const ModelShape& shape) {
  shape.validate();
  Layout l;
  std::size_t cur = 0;
  for (auto n : shape.field_sizes) {
    l.tables.push_back(cur);
    cur += n * shape.emb_dim;
  }
  if (shape.fused()) {
    l.user_hidden = dense(shape.knowledge_dim, shape.connector_hidden, cur);
    l.user_out = dense(shape.connector_hidden, shape.emb_dim, cur);
    l.item_hidden = dense(shape.knowledge_dim, shape.connector_hidden, cur);
    l.item_out = dense(shape.connector_hidden, shape.emb_dim, cur);
  }
  std::size_t in = shape.concat_dim();
  for (auto h : shape.hidden) {
    l.mlp.push_back(dense(in, h, cur));
    in = h;
  }
  l.mlp.push_back(dense(in, 1, cur));
  if (shape.backbone == Backbone::deepfm) {
    for (auto n : shape.field_sizes) {
      l.linear.push_back(cur);
      cur += n;
    }
    l.linear_bias = cur++;
  }
  l.total = cur;
  return l;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  const Layout l = make_layout(shape);
  ModelParams p{shape, std::vector<double>(l.total, 0.0)};
  Rng rng(seed);
  const auto fill = [&](std::size_t off, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t k = 0; k < count; ++k) p.values[off + k] = rng.uniform(-a, a);
  };
  for (std::size_t f = 0; f < shape.n_fields(); ++f) {
    fill(l.tables[f], shape.field_sizes[f] * shape.emb_dim, shape.field_sizes[f], shape.emb_dim);
  }
  const auto fill_dense = [&](const DenseLayout& d) { fill(d.weight, d.in * d.out, d.in, d.out); };
  if (shape.fused()) {
    fill_dense(l.user_hidden);
    fill_dense(l.user_out);
    fill_dense(l.item_hidden);
    fill_dense(l.item_out);
  }
  for (const auto& d : l.mlp) fill_dense(d);
  for (std::size_t f = 0; f < l.linear.size(); ++f) {
    fill(l.linear[f], shape.field_sizes[f], shape.field_sizes[f], 1);
  }
  return p;
}

void check_example(const ModelShape& shape, const CTRExample& x) {
  if (x.cat_features.size() != shape.n_fields()) {
    throw ModelError("example has " + std::to_string(x.cat_features.size()) +
                     " categorical features, model expects " + std::to_string(shape.n_fields()));
  }
  std::vector<bool> seen(shape.n_fields(), false);
  for (auto [f, v] : x.cat_features) {
    if (f >= shape.n_fields() || seen[f]) {
      throw ModelError("bad or repeated field id " + std::to_string(f));
    }
    seen[f] = true;
    if (v >= shape.field_sizes[f]) {
      throw ModelError("value id " + std::to_string(v) + " out of range for field " + std::to_string(f));
    }
  }
  if (shape.fused()) {
    if (!x.e_u || !x.e_i) throw ModelError("fused model needs both knowledge vectors");
    if (x.e_u->dims() != shape.knowledge_dim || x.e_i->dims() != shape.knowledge_dim) {
      throw ModelError("knowledge vector length does not match knowledge_dim " +
                       std::to_string(shape.knowledge_dim));
    }
  } else if (x.e_u || x.e_i) {
    throw ModelError("base model does not take knowledge vectors");
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

struct DenseCache {
  std::vector<double> input;
  std::vector<double> pre;
  std::vector<double> out;  // after activation
};

void dense_forward(const std::vector<double>& w, const DenseLayout& d, bool relu, DenseCache& c) {
  c.pre.assign(d.out, 0.0);
  for (std::size_t o = 0; o < d.out; ++o) {
    double s = w[d.bias + o];
    const double* row = &w[d.weight + o * d.in];
    for (std::size_t i = 0; i < d.in; ++i) s += row[i] * c.input[i];
    c.pre[o] = s;
  }
  c.out = c.pre;
  if (relu) {
    for (auto& v : c.out) v = v > 0 ? v : 0.0;
  }
}

/// Given d(loss)/d(out), accumulates weight grads and returns d(loss)/d(input).
std::vector<double> dense_backward(const std::vector<double>& w, const DenseLayout& d, bool relu,
                                   const DenseCache& c, std::vector<double> dout,
                                   std::span<double> grad) {
  if (relu) {
    for (std::size_t o = 0; o < d.out; ++o) {
      if (c.pre[o] <= 0) dout[o] = 0.0;
    }
  }
  std::vector<double> din(d.in, 0.0);
  for (std::size_t o = 0; o < d.out; ++o) {
    const double g = dout[o];
    if (g == 0.0) continue;
    grad[d.bias + o] += g;
    const double* row = &w[d.weight + o * d.in];
    double* grow = &grad[d.weight + o * d.in];
    for (std::size_t i = 0; i < d.in; ++i) {
      grow[i] += g * c.input[i];
      din[i] += g * row[i];
    }
  }
  return din;
}

struct Forward {
  std::vector<double> concat;
  DenseCache user_hidden, user_out, item_hidden, item_out;
  std::vector<DenseCache> mlp;
  double logit = 0.0;
};

Forward run_forward(const ModelParams& p, const Layout& l, const CTRExample& x) {
  const ModelShape& s = p.shape;
  const std::size_t e = s.emb_dim;
  Forward f;
  f.concat.assign(s.concat_dim(), 0.0);
  for (auto [field, value] : x.cat_features) {
    const double* row = &p.values[l.tables[field] + value * e];
    std::copy(row, row + e, f.concat.begin() + static_cast<std::ptrdiff_t>(field * e));
  }
  if (s.fused()) {
    f.user_hidden.input = x.e_u->values;
    dense_forward(p.values, l.user_hidden, true, f.user_hidden);
    f.user_out.input = f.user_hidden.out;
    dense_forward(p.values, l.user_out, false, f.user_out);
    f.item_hidden.input = x.e_i->values;
    dense_forward(p.values, l.item_hidden, true, f.item_hidden);
    f.item_out.input = f.item_hidden.out;
    dense_forward(p.values, l.item_out, false, f.item_out);
    const std::size_t base = s.n_fields() * e;
    std::copy(f.user_out.out.begin(), f.user_out.out.end(), f.concat.begin() + static_cast<std::ptrdiff_t>(base));
    std::copy(f.item_out.out.begin(), f.item_out.out.end(),
              f.concat.begin() + static_cast<std::ptrdiff_t>(base + e));
  }

  f.mlp.resize(l.mlp.size());
  const std::vector<double>* in = &f.concat;
  for (std::size_t k = 0; k < l.mlp.size(); ++k) {
    f.mlp[k].input = *in;
    dense_forward(p.values, l.mlp[k], k + 1 < l.mlp.size(), f.mlp[k]);
    in = &f.mlp[k].out;
  }
  f.logit = f.mlp.back().out[0];

  if (s.backbone == Backbone::deepfm) {
    double lin = p.values[l.linear_bias];
    for (auto [field, value] : x.cat_features) lin += p.values[l.linear[field] + value];
    double fm = 0.0;
    for (std::size_t d = 0; d < e; ++d) {
      double sum = 0.0, sq = 0.0;
      for (std::size_t slot = 0; slot < s.n_slots(); ++slot) {
        const double v = f.concat[slot * e + d];
        sum += v;
        sq += v * v;
      }
      fm += 0.5 * (sum * sum - sq);
    }
    f.logit += lin + fm;
  }
  return f;
}

}  // namespace

double forward_logit(const ModelParams& params, const CTRExample& x) {
  check_example(params.shape, x);
  const Layout l = make_layout(params.shape);
  if (params.values.size() != l.total) throw ModelError("parameter vector does not match shape");
  return run_forward(params, l, x).logit;
}

double forward(const ModelParams& params, const CTRExample& x) {
  return sigmoid(forward_logit(params, x));
}

double accumulate_gradient(const ModelParams& params, const CTRExample& x,
                           const std::function<double(double)>& dloss_dlogit,
                           std::span<double> grad) {
  check_example(params.shape, x);
  const Layout l = make_layout(params.shape);
  if (params.values.size() != l.total || grad.size() != l.total) {
    throw ModelError("parameter or gradient vector does not match shape");
  }
  const ModelShape& s = params.shape;
  const std::size_t e = s.emb_dim;
  const auto& w = params.values;
  const Forward f = run_forward(params, l, x);
  const double g = dloss_dlogit(f.logit);

  std::vector<double> dout{g};
  for (std::size_t k = l.mlp.size(); k-- > 0;) {
    dout = dense_backward(w, l.mlp[k], k + 1 < l.mlp.size(), f.mlp[k], std::move(dout), grad);
  }
  std::vector<double>& dconcat = dout;

  if (s.backbone == Backbone::deepfm) {
    grad[l.linear_bias] += g;
    for (auto [field, value] : x.cat_features) grad[l.linear[field] + value] += g;
    for (std::size_t d = 0; d < e; ++d) {
      double sum = 0.0;
      for (std::size_t slot = 0; slot < s.n_slots(); ++slot) sum += f.concat[slot * e + d];
      for (std::size_t slot = 0; slot < s.n_slots(); ++slot) {
        dconcat[slot * e + d] += g * (sum - f.concat[slot * e + d]);
      }
    }
  }

  for (auto [field, value] : x.cat_features) {
    double* row = &grad[l.tables[field] + value * e];
    for (std::size_t d = 0; d < e; ++d) row[d] += dconcat[field * e + d];
  }
  if (s.fused()) {
    const std::size_t base = s.n_fields() * e;
    std::vector<double> du(dconcat.begin() + static_cast<std::ptrdiff_t>(base),
                           dconcat.begin() + static_cast<std::ptrdiff_t>(base + e));
    std::vector<double> di(dconcat.begin() + static_cast<std::ptrdiff_t>(base + e),
                           dconcat.begin() + static_cast<std::ptrdiff_t>(base + 2 * e));
    auto dh = dense_backward(w, l.user_out, false, f.user_out, std::move(du), grad);
    dense_backward(w, l.user_hidden, true, f.user_hidden, std::move(dh), grad);
    dh = dense_backward(w, l.item_out, false, f.item_out, std::move(di), grad);
    dense_backward(w, l.item_hidden, true, f.item_hidden, std::move(dh), grad);
  }
  return f.logit;
}

namespace {

double bce_from_logit(double z, int y) {
  // softplus(z) - y*z, written to avoid overflow.
  return std::max(z, 0.0) - static_cast<double>(y) * z + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

double batch_bce(const ModelParams& params, std::span<const CTRExample> batch) {
  if (batch.empty()) throw ModelError("empty batch");
  double total = 0.0;
  for (const auto& x : batch) total += bce_from_logit(forward_logit(params, x), x.label);
  return total / static_cast<double>(batch.size());
}

double batch_bce_gradient(const ModelParams& params, std::span<const CTRExample> batch,
                          std::vector<double>& grad) {
  if (batch.empty()) throw ModelError("empty batch");
  grad.assign(params.values.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& x : batch) {
    const double z = accumulate_gradient(
        params, x, [&](double logit) { return (sigmoid(logit) - x.label) * inv_n; }, grad);
    total += bce_from_logit(z, x.label);
  }
  return total * inv_n;
}

}  // namespace recrefine::ctr
