#include "recrefine/encoder.hpp"

#include <cmath>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"
#include "recrefine/jsonl.hpp"

namespace recrefine {

namespace {
constexpr std::uint64_t kIndexSeed = 0x243f6a8885a308d3ULL;
constexpr std::uint64_t kSignSeed = 0x13198a2e03707344ULL;
}  // namespace

double l2_norm(const EmbeddingVector& v) {
  double sq = 0.0;
  for (double x : v.values) sq += x * x;
  return std::sqrt(sq);
}

EmbeddingVector mean_of(std::span<const EmbeddingVector> vectors) {
  if (vectors.empty()) throw ShapeError("mean of zero vectors");
  EmbeddingVector out(vectors.front().dims());
  for (const auto& v : vectors) {
    if (v.dims() != out.dims()) throw ShapeError("mean over vectors of different lengths");
    for (std::size_t d = 0; d < v.dims(); ++d) out.values[d] += v.values[d];
  }
  const double n = static_cast<double>(vectors.size());
  for (double& x : out.values) x /= n;
  return out;
}

std::vector<std::string> encoder_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    const bool word = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      c >= 0x80;
    if (word) {
      current += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

EmbeddingVector encode(std::string_view text, const HashEncoderConfig& cfg) {
  if (cfg.dims < 1) throw ShapeError("encoder dims must be >= 1");
  EmbeddingVector v(cfg.dims);
  for (const auto& tok : encoder_tokens(text)) {
    const std::size_t index = seeded_hash(tok, kIndexSeed) % cfg.dims;
    const double sign = (seeded_hash(tok, kSignSeed) & 1U) ? 1.0 : -1.0;
    v.values[index] += sign;
  }
  if (cfg.normalize) {
    const double norm = l2_norm(v);
    if (norm > 0.0) {
      for (double& x : v.values) x /= norm;
    }
  }
  return v;
}

HashEncoder::HashEncoder(HashEncoderConfig cfg) : cfg_(cfg) {
  if (cfg_.dims < 1) throw ConfigError("encoder dims must be >= 1");
}

std::vector<EmbeddingVector> HashEncoder::encode_batch(std::span<const std::string> texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode(t, cfg_));
  return out;
}

std::string HashEncoder::id() const {
  return "hash-v1:dims=" + std::to_string(cfg_.dims) + ":normalize=" + (cfg_.normalize ? "1" : "0");
}

std::vector<EmbeddingVector> encode_remote(std::span<const std::string> texts,
                                           const RemoteEncoderConfig& cfg) {
  if (cfg.dims < 1) throw ConfigError("remote encoder needs dims >= 1");
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += batch) {
    const std::size_t end = std::min(texts.size(), start + batch);
    const std::string range = "texts [" + std::to_string(start) + ", " + std::to_string(end) + ")";
    json body = {{"input", json::array()}};
    for (std::size_t i = start; i < end; ++i) body["input"].push_back(texts[i]);
    if (!cfg.model.empty()) body["model"] = cfg.model;

    std::string shape_problem;
    const auto check = [&](const json& r) {
      shape_problem.clear();
      const auto fail = [&](std::string msg) {
        shape_problem = std::move(msg);
        throw TransportError(shape_problem);
      };
      if (!r.contains("data") || !r["data"].is_array()) fail("response has no data array");
      if (r["data"].size() != end - start) {
        fail("expected " + std::to_string(end - start) + " embeddings, got " +
             std::to_string(r["data"].size()));
      }
      for (std::size_t k = 0; k < r["data"].size(); ++k) {
        const json& e = r["data"][k];
        if (!e.contains("embedding") || !e["embedding"].is_array()) {
          fail("record " + std::to_string(start + k) + " has no embedding");
        }
        if (e["embedding"].size() != cfg.dims) {
          fail("record " + std::to_string(start + k) + " has " +
               std::to_string(e["embedding"].size()) + " dims, expected " +
               std::to_string(cfg.dims));
        }
        for (const auto& x : e["embedding"]) {
          if (!x.is_number() || !std::isfinite(x.get<double>())) {
            fail("record " + std::to_string(start + k) + " has a non-finite value");
          }
        }
      }
    };

    json response;
    try {
      response = post_json(cfg.endpoint, body, cfg.retry, {}, check);
    } catch (const TransportError& e) {
      if (!shape_problem.empty()) throw ShapeError(range + ": " + shape_problem);
      throw TransportError(range + ": " + e.what());
    }
    for (const auto& e : response["data"]) {
      out.emplace_back(e["embedding"].get<std::vector<double>>());
    }
  }
  return out;
}

// ---- store ---------------------------------------------------------------------

void EmbeddingStore::put(EntityKind kind, const std::string& id, EmbeddingVector v) {
  if (v.dims() != dims_) {
    throw ShapeError("embedding for " + std::string(to_string(kind)) + " " + id + " has " +
                     std::to_string(v.dims()) + " dims, store expects " + std::to_string(dims_));
  }
  entries_[{kind, id}] = std::move(v);
}

const EmbeddingVector* EmbeddingStore::find(EntityKind kind, const std::string& id) const {
  auto it = entries_.find({kind, id});
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::vector<json> rows;
  rows.reserve(entries_.size() + 1);
  rows.push_back({{"dims", dims_}, {"encoder_id", encoder_id_}});
  for (const auto& [key, v] : entries_) {
    rows.push_back({{"entity_kind", to_string(key.first)}, {"entity_id", key.second}, {"values", v.values}});
  }
  write_jsonl(path, rows);
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  const auto rows = read_jsonl(path);
  if (rows.empty()) throw ValidationError(path.string() + ": empty embedding store");
  try {
    EmbeddingStore store(rows[0].at("dims").get<std::size_t>(),
                         rows[0].at("encoder_id").get<std::string>());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      store.put(parse_entity_kind(rows[i].at("entity_kind").get<std::string>()),
                rows[i].at("entity_id").get<std::string>(),
                EmbeddingVector(rows[i].at("values").get<std::vector<double>>()));
    }
    return store;
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace recrefine
