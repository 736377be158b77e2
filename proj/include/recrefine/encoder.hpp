#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recrefine/http.hpp"
#include "recrefine/prompt.hpp"

namespace recrefine {

/// Dense knowledge representation. Length is fixed per run.
struct EmbeddingVector {
  std::vector<double> values;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::size_t dims) : values(dims, 0.0) {}
  explicit EmbeddingVector(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dims() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

double l2_norm(const EmbeddingVector& v);

/// Component-wise arithmetic mean. Throws ShapeError on empty input or
/// mismatched lengths.
EmbeddingVector mean_of(std::span<const EmbeddingVector> vectors);

struct HashEncoderConfig {
  std::size_t dims = 64;
  bool normalize = true;
};

/// Lowercases ASCII and splits on ASCII non-alphanumerics. Bytes >= 0x80 are
/// kept inside tokens so UTF-8 words survive.
std::vector<std::string> encoder_tokens(std::string_view text);

/// Signed feature hashing: token t adds sign(h2(t)) at index h1(t) mod dims.
/// Empty text maps to the zero vector; normalize scales non-zero vectors to
/// unit L2 norm.
EmbeddingVector encode(std::string_view text, const HashEncoderConfig& cfg = {});

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::vector<EmbeddingVector> encode_batch(std::span<const std::string> texts) const = 0;
  virtual std::size_t dims() const = 0;
  virtual std::string id() const = 0;

  EmbeddingVector encode_one(const std::string& text) const {
    return encode_batch(std::span(&text, 1)).front();
  }
};

class HashEncoder final : public TextEncoder {
 public:
  explicit HashEncoder(HashEncoderConfig cfg = {});
  std::vector<EmbeddingVector> encode_batch(std::span<const std::string> texts) const override;
  std::size_t dims() const override { return cfg_.dims; }
  std::string id() const override;

 private:
  HashEncoderConfig cfg_;
};

struct RemoteEncoderConfig {
  std::string endpoint;
  std::size_t dims = 0;
  std::size_t batch_size = 32;
  std::string model;
  RetryPolicy retry;
};

/// POSTs {input: [texts]} (plus model when configured) per batch and expects
/// {data: [{embedding: [...]}, ...]} in input order. Failures name the batch's
/// index range: ShapeError for wrong counts or dimensions, TransportError
/// otherwise.
std::vector<EmbeddingVector> encode_remote(std::span<const std::string> texts,
                                           const RemoteEncoderConfig& cfg);

class RemoteEncoder final : public TextEncoder {
 public:
  explicit RemoteEncoder(RemoteEncoderConfig cfg) : cfg_(std::move(cfg)) {}
  std::vector<EmbeddingVector> encode_batch(std::span<const std::string> texts) const override {
    return encode_remote(texts, cfg_);
  }
  std::size_t dims() const override { return cfg_.dims; }
  std::string id() const override { return "remote:" + cfg_.endpoint; }

 private:
  RemoteEncoderConfig cfg_;
};

/// Embeddings keyed by (entity kind, entity id). On disk: a JSON-lines file
/// whose first line is {dims, encoder_id} followed by
/// {entity_kind, entity_id, values} records in key order.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::size_t dims, std::string encoder_id)
      : dims_(dims), encoder_id_(std::move(encoder_id)) {}

  void put(EntityKind kind, const std::string& id, EmbeddingVector v);
  const EmbeddingVector* find(EntityKind kind, const std::string& id) const;
  std::size_t size() const { return entries_.size(); }
  std::size_t dims() const { return dims_; }
  const std::string& encoder_id() const { return encoder_id_; }

  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path);

 private:
  std::size_t dims_ = 0;
  std::string encoder_id_;
  std::map<std::pair<EntityKind, std::string>, EmbeddingVector> entries_;
};

}  // namespace recrefine
