#include "recrefine/inference.hpp"

#include "recrefine/error.hpp"
#include "recrefine/parallel.hpp"

namespace recrefine {

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::approved: return "approved";
    case StopReason::retries_exhausted: return "retries_exhausted";
    case StopReason::parse_failure: return "parse_failure";
  }
  return "?";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "iterative") return Strategy::iterative;
  if (name == "filter") return Strategy::filter;
  throw ConfigError("unknown strategy '" + name + "' (expected iterative|filter)");
}

std::string_view to_string(Strategy s) { return s == Strategy::iterative ? "iterative" : "filter"; }

RefineResult iterative_refine(const EntityContext& ctx, const Backend& actor,
                              const Backend& reflector, const TemplateSet& templates,
                              std::size_t max_retries, std::int64_t seed) {
  const auto request = [&](Capability cap, SlotMap slots) {
    return make_request(templates, template_for(ctx.kind, cap), std::move(slots), 0.0, seed);
  };

  RefineResult result;
  auto& steps = result.trace.iterations;
  try {
    steps.push_back({parse_knowledge(actor.complete(request(Capability::reason, ctx.slots))), {}, {}});
  } catch (const ParseError& e) {
    throw InferenceError(std::string(to_string(ctx.kind)) + " " + ctx.entity_id +
                         ": initial knowledge unparseable: " + e.what());
  }

  for (;;) {
    TraceStep& step = steps.back();
    SlotMap judge_slots = ctx.slots;
    judge_slots["knowledge"] = step.knowledge_text;
    ReflectOutput judged;
    try {
      judged = parse_reflect(reflector.complete(request(Capability::reflect, judge_slots)));
    } catch (const ParseError&) {
      result.trace.stop_reason = StopReason::parse_failure;
      break;
    }
    step.verdict = judged.verdict;
    step.reflection_text = judged.reflection_text;
    if (judged.verdict == Verdict::reasonable) {
      result.trace.stop_reason = StopReason::approved;
      break;
    }
    if (steps.size() > max_retries) {
      result.trace.stop_reason = StopReason::retries_exhausted;
      break;
    }
    SlotMap refine_slots = std::move(judge_slots);
    refine_slots["reflection"] = judged.reflection_text;
    std::string refined;
    try {
      refined = parse_knowledge(actor.complete(request(Capability::refine, refine_slots)));
    } catch (const ParseError&) {
      result.trace.stop_reason = StopReason::parse_failure;
      break;
    }
    steps.push_back({std::move(refined), {}, {}});
  }
  result.final_knowledge = steps.back().knowledge_text;
  return result;
}

FilterOutput filter_knowledge(const EntityContext& ctx, const Backend& actor,
                              const Backend& reflector, const TemplateSet& templates,
                              const TextEncoder& encoder, const FilterOptions& opts) {
  if (opts.k < 1) throw ConfigError("filter strategy needs k >= 1");
  FilterOutput out;
  FilterResult& res = out.result;
  for (std::size_t j = 0; j < opts.k; ++j) {
    CompletionRequest req =
        make_request(templates, template_for(ctx.kind, Capability::reason), ctx.slots,
                     opts.temperature, opts.seed + static_cast<std::int64_t>(j));
    req.sample_index = static_cast<int>(j);
    try {
      res.candidates.push_back({parse_knowledge(actor.complete(req)), std::nullopt});
    } catch (const ParseError&) {
      ++res.n_unparseable;
    }
  }
  if (res.candidates.empty()) {
    throw InferenceError(std::string(to_string(ctx.kind)) + " " + ctx.entity_id + ": all " +
                         std::to_string(opts.k) + " candidates unparseable");
  }
  for (std::size_t c = 0; c < res.candidates.size(); ++c) {
    SlotMap judge_slots = ctx.slots;
    judge_slots["knowledge"] = res.candidates[c].knowledge_text;
    try {
      res.candidates[c].verdict = parse_reflect(reflector.complete(make_request(
                                                    templates, template_for(ctx.kind, Capability::reflect),
                                                    std::move(judge_slots), 0.0, opts.seed)))
                                      .verdict;
    } catch (const ParseError&) {
      // Unjudged candidates are not kept but still count for the fallback.
    }
    if (res.candidates[c].verdict == Verdict::reasonable) res.kept_indices.push_back(c);
  }

  std::vector<std::string> texts;
  for (const auto& c : res.candidates) texts.push_back(c.knowledge_text);
  const auto encoded = encoder.encode_batch(texts);

  std::vector<EmbeddingVector> selected;
  if (res.kept_indices.empty()) {
    res.fallback_used = true;
    selected = encoded;
  } else {
    for (auto i : res.kept_indices) selected.push_back(encoded[i]);
  }
  out.embedding = mean_of(selected);
  return out;
}

json trace_summary(const RefinementTrace& trace) {
  json steps = json::array();
  for (const auto& s : trace.iterations) {
    steps.push_back({{"knowledge_text", s.knowledge_text},
                     {"verdict", s.verdict ? json(to_string(*s.verdict)) : json(nullptr)},
                     {"reflection_text", s.reflection_text}});
  }
  return {{"iterations", steps.size()}, {"stop_reason", to_string(trace.stop_reason)}, {"steps", steps}};
}

json filter_summary(const FilterResult& result) {
  json candidates = json::array();
  for (const auto& c : result.candidates) {
    candidates.push_back({{"knowledge_text", c.knowledge_text},
                          {"verdict", c.verdict ? json(to_string(*c.verdict)) : json(nullptr)}});
  }
  return {{"candidates", candidates},
          {"kept_indices", result.kept_indices},
          {"fallback_used", result.fallback_used},
          {"n_unparseable", result.n_unparseable}};
}

InferenceRun run_inference(const std::vector<EntityContext>& contexts, const RoleBackends& users,
                           const RoleBackends& items, const TemplateSet& templates,
                           const TextEncoder& encoder, const InferenceOptions& opts) {
  if (templates.stage() != PromptStage::inference) {
    throw TemplateError("inference needs inference-stage templates");
  }
  struct EntityResult {
    json row;
    std::optional<EmbeddingVector> embedding;  // filter strategy only
    std::string text_to_encode;
    bool failed = false;
  };

  const auto results = ordered_parallel_map<EntityResult>(
      contexts.size(), opts.workers, [&](std::size_t i) {
        const EntityContext& ctx = contexts[i];
        const RoleBackends& roles = ctx.kind == EntityKind::user ? users : items;
        EntityResult r;
        r.row = {{"entity_kind", to_string(ctx.kind)},
                 {"entity_id", ctx.entity_id},
                 {"strategy", to_string(opts.strategy)}};
        try {
          if (opts.strategy == Strategy::iterative) {
            auto res = iterative_refine(ctx, *roles.actor, *roles.reflector, templates,
                                        opts.max_retries, opts.seed);
            r.row["knowledge_text"] = res.final_knowledge;
            r.row["trace"] = trace_summary(res.trace);
            r.text_to_encode = res.final_knowledge;
          } else {
            FilterOptions fo = opts.filter;
            fo.seed = opts.seed;
            auto res = filter_knowledge(ctx, *roles.actor, *roles.reflector, templates, encoder, fo);
            std::string joined;
            const auto& chosen = res.result.fallback_used ? std::vector<std::size_t>{} : res.result.kept_indices;
            for (std::size_t c = 0; c < res.result.candidates.size(); ++c) {
              const bool use = res.result.fallback_used ||
                               std::find(chosen.begin(), chosen.end(), c) != chosen.end();
              if (!use) continue;
              if (!joined.empty()) joined += "\n";
              joined += res.result.candidates[c].knowledge_text;
            }
            r.row["knowledge_text"] = joined;
            r.row["trace"] = filter_summary(res.result);
            r.embedding = std::move(res.embedding);
          }
        } catch (const InferenceError& e) {
          r.failed = true;
          r.row["knowledge_text"] = "";
          r.row["failed"] = e.what();
        }
        return r;
      });

  InferenceRun run;
  run.embeddings = EmbeddingStore(encoder.dims(), encoder.id());
  std::vector<std::string> texts;
  std::vector<std::size_t> text_owner;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].embedding) {
      texts.push_back(results[i].text_to_encode);
      text_owner.push_back(i);
    }
  }
  const auto encoded = encoder.encode_batch(texts);
  std::vector<const EmbeddingVector*> vec(results.size(), nullptr);
  for (std::size_t t = 0; t < text_owner.size(); ++t) vec[text_owner[t]] = &encoded[t];

  for (std::size_t i = 0; i < results.size(); ++i) {
    const EmbeddingVector& v = results[i].embedding ? *results[i].embedding : *vec[i];
    run.embeddings.put(contexts[i].kind, contexts[i].entity_id, v);
    run.knowledge.push_back(results[i].row);
    if (results[i].failed) ++run.n_failed;
  }
  return run;
}

}  // namespace recrefine
