#include <gtest/gtest.h>

#include <cmath>

#include "recrefine/encoder.hpp"
#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"
#include "stub_server.hpp"
#include "test_util.hpp"

using namespace recrefine;
namespace rt = recrefine::testing;

namespace {

RetryPolicy fast_retry() {
  RetryPolicy p;
  p.initial_backoff = std::chrono::milliseconds(1);
  p.timeout = std::chrono::milliseconds(5000);
  return p;
}

}  // namespace

TEST(Tokens, LowercaseAndSplit) {
  EXPECT_EQ(encoder_tokens("Likes  NOIR, 1940s-era films!"),
            (std::vector<std::string>{"likes", "noir", "1940s", "era", "films"}));
  EXPECT_EQ(encoder_tokens("caf\xc3\xa9 au lait"), (std::vector<std::string>{"caf\xc3\xa9", "au", "lait"}));
  EXPECT_TRUE(encoder_tokens(" ,.; ").empty());
}

TEST(HashEncode, EmptyTextIsZero) {
  EXPECT_EQ(encode(""), EmbeddingVector(64));
  EXPECT_EQ(encode("?!", {8, true}), EmbeddingVector(8));
}

TEST(HashEncode, DeterministicAndUnitNorm) {
  const auto a = encode("prefers slow-burning dramas", {64, true});
  EXPECT_EQ(a, encode("prefers slow-burning dramas", {64, true}));
  EXPECT_NEAR(l2_norm(a), 1.0, 1e-12);
}

TEST(HashEncode, CaseAndPunctuationInsensitive) {
  EXPECT_EQ(encode("Jazz, Blues"), encode("jazz blues"));
}

TEST(HashEncode, UnnormalizedIsSumOfTokenVectors) {
  Rng rng(9);
  const char* vocab[] = {"noir", "jazz", "space", "opera", "quiet", "loud", "retro"};
  HashEncoderConfig raw{16, false};
  for (int trial = 0; trial < 50; ++trial) {
    std::string a, b;
    for (std::uint64_t i = 0; i < rng.below(6); ++i) a += std::string(vocab[rng.below(7)]) + " ";
    for (std::uint64_t i = 0; i < rng.below(6); ++i) b += std::string(vocab[rng.below(7)]) + " ";
    const auto sum = encode(a + " " + b, raw);
    const auto va = encode(a, raw);
    const auto vb = encode(b, raw);
    for (std::size_t d = 0; d < 16; ++d) EXPECT_EQ(sum.values[d], va.values[d] + vb.values[d]);
  }
}

TEST(HashEncode, SingleTokenHasOneUnitEntry) {
  const auto v = encode("serendipity", {32, false});
  int nonzero = 0;
  for (double x : v.values) {
    if (x != 0.0) {
      ++nonzero;
      EXPECT_EQ(std::abs(x), 1.0);
    }
  }
  EXPECT_EQ(nonzero, 1);
}

TEST(HashEncode, OrderInvariant) { EXPECT_EQ(encode("a b c"), encode("c a b")); }

TEST(HashEncoder, BatchMatchesSingle) {
  HashEncoder enc({24, true});
  std::vector<std::string> texts = {"one", "", "two three"};
  auto batch = enc.encode_batch(texts);
  ASSERT_EQ(batch.size(), 3u);
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(batch[i], encode(texts[i], {24, true}));
  EXPECT_THROW(HashEncoder({0, true}), ConfigError);
}

TEST(MeanOf, ShapeChecks) {
  std::vector<EmbeddingVector> none;
  EXPECT_THROW(mean_of(none), ShapeError);
  std::vector<EmbeddingVector> mixed = {EmbeddingVector(2), EmbeddingVector(3)};
  EXPECT_THROW(mean_of(mixed), ShapeError);
  std::vector<EmbeddingVector> two = {EmbeddingVector({1.0, 2.0}), EmbeddingVector({3.0, -2.0})};
  EXPECT_EQ(mean_of(two), EmbeddingVector({2.0, 0.0}));
}

TEST(Store, RoundTrip) {
  rt::TempDir dir("store");
  EmbeddingStore s(3, "hash-v1");
  s.put(EntityKind::user, "u9", EmbeddingVector({0.1, -1.0 / 3.0, 1e-300}));
  s.put(EntityKind::item, "i1", EmbeddingVector({0.0, 0.0, 0.0}));
  s.save(dir / "emb.jsonl");
  auto back = EmbeddingStore::load(dir / "emb.jsonl");
  EXPECT_EQ(back.dims(), 3u);
  EXPECT_EQ(back.encoder_id(), "hash-v1");
  ASSERT_NE(back.find(EntityKind::user, "u9"), nullptr);
  EXPECT_EQ(*back.find(EntityKind::user, "u9"), *s.find(EntityKind::user, "u9"));
  EXPECT_EQ(back.find(EntityKind::item, "u9"), nullptr);
  EXPECT_THROW(s.put(EntityKind::user, "x", EmbeddingVector(2)), ShapeError);
}

TEST(Remote, PreservesOrderAndValuesAcrossBatches) {
  rt::StubServer server([](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    json data = json::array();
    for (const auto& t : body.at("input")) {
      const double len = static_cast<double>(t.get<std::string>().size());
      data.push_back({{"embedding", {len, 1.0 / (len + 3.0), -len * 0.1}}});
    }
    res.set_content(json{{"data", data}}.dump(), "application/json");
  });
  RemoteEncoderConfig cfg{server.url("/v1/embeddings"), 3, 2, "", fast_retry()};
  std::vector<std::string> texts = {"a", "bbb", "cc", "dddd", ""};
  auto out = encode_remote(texts, cfg);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const double len = static_cast<double>(texts[i].size());
    EXPECT_EQ(out[i], EmbeddingVector({len, 1.0 / (len + 3.0), -len * 0.1}));
  }
  EXPECT_EQ(server.requests(), 3);
}

TEST(Remote, WrongDimensionIsShapeError) {
  rt::StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"data":[{"embedding":[1.0,2.0]}]})", "application/json");
  });
  RemoteEncoderConfig cfg{server.url("/v1/embeddings"), 3, 8, "", fast_retry()};
  std::vector<std::string> texts = {"x"};
  try {
    encode_remote(texts, cfg);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[0, 1)"), std::string::npos);
  }
}

TEST(Remote, ServerErrorIsTransportError) {
  rt::StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  RemoteEncoderConfig cfg{server.url("/v1/embeddings"), 3, 8, "", fast_retry()};
  std::vector<std::string> texts = {"x"};
  EXPECT_THROW(encode_remote(texts, cfg), TransportError);
  EXPECT_EQ(server.requests(), 3);
}
