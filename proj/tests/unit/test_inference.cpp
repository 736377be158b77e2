#include <gtest/gtest.h>

#include "inference_fixtures.hpp"
#include "recrefine/error.hpp"
#include "recrefine/inference.hpp"
#include "test_util.hpp"

using namespace recrefine;
namespace rt = recrefine::testing;

namespace {

const TemplateSet& inference() {
  static const TemplateSet t = rt::minimal_templates(PromptStage::inference);
  return t;
}

std::vector<double> oracle_mean(const std::vector<std::string>& texts, const TextEncoder& enc) {
  std::vector<double> sum(enc.dims(), 0.0);
  for (const auto& t : texts) {
    const auto v = enc.encode_one(t);
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += v.values[d];
  }
  for (auto& x : sum) x /= static_cast<double>(texts.size());
  return sum;
}

}  // namespace

TEST(Iterative, ApprovedImmediately) {
  rt::LoopScript s(1);
  auto r = iterative_refine(rt::user_context(), *s.actor, *s.reflector, inference(), 3);
  ASSERT_EQ(r.trace.iterations.size(), 1u);
  EXPECT_EQ(r.final_knowledge, "v1");
  EXPECT_EQ(r.trace.stop_reason, StopReason::approved);
  EXPECT_EQ(*s.actor_calls, 1);
  EXPECT_EQ(*s.reflector_calls, 1);
}

TEST(Iterative, NeverApprovedSpendsAllRetries) {
  rt::LoopScript s(0);
  auto r = iterative_refine(rt::user_context(), *s.actor, *s.reflector, inference(), 1);
  ASSERT_EQ(r.trace.iterations.size(), 2u);
  EXPECT_EQ(r.final_knowledge, "v2");
  EXPECT_EQ(r.trace.stop_reason, StopReason::retries_exhausted);
  EXPECT_EQ(r.trace.iterations[0].reflection_text, "v1 misses the pattern");
  EXPECT_EQ(*s.actor_calls + *s.reflector_calls, 4);
}

TEST(Iterative, ApprovesFirstRefinement) {
  rt::LoopScript s(2);
  auto r = iterative_refine(rt::item_context(), *s.actor, *s.reflector, inference(), 3);
  ASSERT_EQ(r.trace.iterations.size(), 2u);
  EXPECT_EQ(r.final_knowledge, "v2");
  EXPECT_EQ(r.trace.stop_reason, StopReason::approved);
  EXPECT_EQ(r.trace.iterations[0].verdict, Verdict::unreasonable);
  EXPECT_EQ(r.trace.iterations[1].verdict, Verdict::reasonable);
}

TEST(Iterative, ZeroRetriesJudgesOnce) {
  rt::LoopScript s(0);
  auto r = iterative_refine(rt::user_context(), *s.actor, *s.reflector, inference(), 0);
  EXPECT_EQ(r.trace.iterations.size(), 1u);
  EXPECT_EQ(r.trace.stop_reason, StopReason::retries_exhausted);
  EXPECT_EQ(*s.actor_calls + *s.reflector_calls, 2);
}

TEST(Iterative, TraceLengthIsBounded) {
  for (int n = 1; n <= 5; ++n) {
    for (std::size_t retries = 0; retries <= 4; ++retries) {
      rt::LoopScript s(n);
      auto r = iterative_refine(rt::user_context(), *s.actor, *s.reflector, inference(), retries);
      const auto expected = std::min<std::size_t>(static_cast<std::size_t>(n), retries + 1);
      EXPECT_EQ(r.trace.iterations.size(), expected) << "n=" << n << " retries=" << retries;
      EXPECT_EQ(r.trace.stop_reason == StopReason::approved,
                static_cast<std::size_t>(n) <= retries + 1);
      for (std::size_t i = 0; i + 1 < r.trace.iterations.size(); ++i) {
        EXPECT_EQ(r.trace.iterations[i].verdict, Verdict::unreasonable);
        EXPECT_FALSE(r.trace.iterations[i].reflection_text.empty());
      }
    }
  }
}

TEST(Iterative, UnparseableFirstReplyThrows) {
  CallbackBackend actor([](const CompletionRequest&) { return std::string("   "); });
  rt::LoopScript s(1);
  EXPECT_THROW(iterative_refine(rt::user_context(), actor, *s.reflector, inference(), 1), InferenceError);
}

TEST(Iterative, GarbledReflectorStopsWithLastKnowledge) {
  rt::LoopScript s(0);
  CallbackBackend reflector([](const CompletionRequest&) { return std::string("VERDICT: maybe"); });
  auto r = iterative_refine(rt::user_context(), *s.actor, reflector, inference(), 2);
  EXPECT_EQ(r.trace.stop_reason, StopReason::parse_failure);
  EXPECT_EQ(r.final_knowledge, "v1");
  EXPECT_FALSE(r.trace.iterations[0].verdict.has_value());
}

TEST(Iterative, RequestsAreGreedy) {
  std::vector<double> temps;
  CallbackBackend actor([&](const CompletionRequest& req) {
    temps.push_back(req.temperature);
    return std::string("KNOWLEDGE: v1");
  });
  rt::LoopScript s(1);
  iterative_refine(rt::user_context(), actor, *s.reflector, inference(), 1);
  ASSERT_EQ(temps.size(), 1u);
  EXPECT_EQ(temps[0], 0.0);
}

TEST(Filter, AllVerdictPatternsMatchOracleMean) {
  HashEncoder enc({32, true});
  for (unsigned mask = 0; mask < 8; ++mask) {
    std::vector<bool> ok = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    rt::FilterScript s(ok);
    auto out = filter_knowledge(rt::user_context(), *s.actor, *s.reflector, inference(), enc, {3, 0.7, 5});
    std::vector<std::string> expected_texts;
    for (std::size_t j = 0; j < 3; ++j) {
      if (ok[j] || mask == 0) expected_texts.push_back(rt::FilterScript::candidate_text(j));
    }
    const auto expected = oracle_mean(expected_texts, enc);
    ASSERT_EQ(out.embedding.dims(), expected.size());
    for (std::size_t d = 0; d < expected.size(); ++d) {
      EXPECT_NEAR(out.embedding.values[d], expected[d], 1e-12) << "mask=" << mask;
    }
    EXPECT_EQ(out.result.fallback_used, mask == 0);
    EXPECT_EQ(out.result.kept_indices.size(), static_cast<std::size_t>(__builtin_popcount(mask)));
  }
}

TEST(Filter, SingleCandidateIsItsOwnEncoding) {
  HashEncoder enc({16, true});
  for (bool ok : {true, false}) {
    rt::FilterScript s({ok});
    auto out = filter_knowledge(rt::item_context(), *s.actor, *s.reflector, inference(), enc, {1, 0.7, 0});
    EXPECT_EQ(out.embedding, enc.encode_one(rt::FilterScript::candidate_text(0)));
  }
}

TEST(Filter, SamplesUseDistinctSeedsAndIndices) {
  std::vector<std::pair<std::int64_t, int>> seen;
  CallbackBackend actor([&](const CompletionRequest& req) {
    seen.emplace_back(*req.seed, *req.sample_index);
    EXPECT_GT(req.temperature, 0.0);
    return format_knowledge(rt::FilterScript::candidate_text(static_cast<std::size_t>(*req.sample_index)));
  });
  rt::FilterScript s({true, true, true, true});
  HashEncoder enc({8, true});
  filter_knowledge(rt::user_context(), actor, *s.reflector, inference(), enc, {4, 0.7, 100});
  ASSERT_EQ(seen.size(), 4u);
  for (int j = 0; j < 4; ++j) EXPECT_EQ(seen[j], (std::pair<std::int64_t, int>(100 + j, j)));
}

TEST(Filter, UnparseableCandidatesAreSkipped) {
  CallbackBackend actor([](const CompletionRequest& req) {
    if (*req.sample_index == 1) return std::string("");
    return format_knowledge(rt::FilterScript::candidate_text(static_cast<std::size_t>(*req.sample_index)));
  });
  rt::FilterScript s({true, true, false});
  HashEncoder enc({16, true});
  auto out = filter_knowledge(rt::user_context(), actor, *s.reflector, inference(), enc, {3, 0.7, 0});
  EXPECT_EQ(out.result.n_unparseable, 1u);
  EXPECT_EQ(out.result.candidates.size(), 2u);
  EXPECT_EQ(out.embedding, enc.encode_one(rt::FilterScript::candidate_text(0)));
}

TEST(Filter, NothingParsesThrows) {
  CallbackBackend actor([](const CompletionRequest&) { return std::string("\n"); });
  rt::FilterScript s({true});
  HashEncoder enc({8, true});
  EXPECT_THROW(filter_knowledge(rt::user_context(), actor, *s.reflector, inference(), enc, {3, 0.7, 0}),
               InferenceError);
}

TEST(RunInference, OneRowAndVectorPerEntity) {
  HashEncoder enc({16, true});
  rt::FilterScript s({false, true, false});
  RoleBackends roles{s.actor, s.reflector};
  std::vector<EntityContext> ctxs = {rt::user_context("u1"), rt::user_context("u2"), rt::item_context("i1")};
  for (auto strategy : {Strategy::iterative, Strategy::filter}) {
    InferenceOptions opts;
    opts.strategy = strategy;
    opts.workers = 2;
    if (strategy == Strategy::iterative) {
      rt::LoopScript loop(2);
      RoleBackends lr{loop.actor, loop.reflector};
      auto run = run_inference(ctxs, lr, lr, inference(), enc, opts);
      ASSERT_EQ(run.knowledge.size(), 3u);
      EXPECT_EQ(run.embeddings.size(), 3u);
      EXPECT_EQ(run.knowledge[2].at("entity_id"), "i1");
      EXPECT_EQ(*run.embeddings.find(EntityKind::user, "u2"), enc.encode_one("v2"));
    } else {
      auto run = run_inference(ctxs, roles, roles, inference(), enc, opts);
      EXPECT_EQ(run.embeddings.size(), 3u);
      EXPECT_EQ(*run.embeddings.find(EntityKind::item, "i1"),
                enc.encode_one(rt::FilterScript::candidate_text(1)));
    }
  }
}

TEST(RunInference, FailedEntityGetsEmptyKnowledge) {
  HashEncoder enc({16, true});
  auto actor = std::make_shared<CallbackBackend>([](const CompletionRequest&) { return std::string(""); });
  rt::LoopScript s(1);
  RoleBackends roles{actor, s.reflector};
  auto run = run_inference({rt::user_context()}, roles, roles, inference(), enc, {});
  EXPECT_EQ(run.n_failed, 1u);
  EXPECT_EQ(run.knowledge[0].at("knowledge_text"), "");
  EXPECT_TRUE(run.knowledge[0].contains("failed"));
  EXPECT_EQ(*run.embeddings.find(EntityKind::user, "u1"), EmbeddingVector(16));
}

TEST(RunInference, RejectsConstructionTemplates) {
  HashEncoder enc;
  rt::LoopScript s(1);
  RoleBackends roles{s.actor, s.reflector};
  EXPECT_THROW(run_inference({}, roles, roles, rt::minimal_templates(PromptStage::construction), enc, {}),
               TemplateError);
}

TEST(Strategy, Parse) {
  EXPECT_EQ(parse_strategy("filter"), Strategy::filter);
  EXPECT_THROW(parse_strategy("beam"), ConfigError);
}
