#include "recrefine/dataset_builder.hpp"

#include "recrefine/context.hpp"
#include "recrefine/error.hpp"
#include "recrefine/parallel.hpp"

namespace recrefine {

namespace {

enum class Route { reason, refine, mixed, failed_refine, parse_error };

struct Outcome {
  Route route = Route::parse_error;
  std::optional<ReasonSample> reason;
  std::optional<ReflectSample> reflect;
  std::optional<RefineSample> refine;
  std::optional<std::string> backend_error;
};

struct Job {
  std::string provenance_id;
  SlotMap construction_slots;
  SlotMap entity_slots;
  int label = 0;
  std::int64_t seed = 0;
};

// One pass of the reason -> reflect -> (refine) routing for a single sample.
Outcome route_sample(const Job& job, EntityKind kind, const Backend& backend,
                     const TemplateSet& templates) {
  Outcome out;
  const auto ask = [&](Capability cap, const SlotMap& slots) {
    return backend.complete(make_request(templates, template_for(kind, cap), slots, 0.0, job.seed));
  };
  try {
    const ReasonOutput reasoned = parse_reason(ask(Capability::reason, job.construction_slots));

    SlotMap reflect_slots = job.construction_slots;
    reflect_slots["knowledge"] = reasoned.knowledge_text;
    const ReflectOutput judged = parse_reflect(ask(Capability::reflect, reflect_slots));

    const bool correct = reasoned.prediction == job.label;
    SlotMap reflect_ctx = job.entity_slots;
    reflect_ctx["knowledge"] = reasoned.knowledge_text;

    if (correct && judged.verdict == Verdict::reasonable) {
      out.route = Route::reason;
      out.reason = ReasonSample{job.provenance_id, job.entity_slots, reasoned.knowledge_text};
      out.reflect = ReflectSample{job.provenance_id, reflect_ctx, Verdict::reasonable, ""};
      return out;
    }
    if (!correct && judged.verdict == Verdict::unreasonable) {
      SlotMap refine_slots = reflect_slots;
      refine_slots["reflection"] = judged.reflection_text;
      const RefineOutput refined = parse_refine(ask(Capability::refine, refine_slots));
      if (refined.prediction != job.label) {
        out.route = Route::failed_refine;
        return out;
      }
      SlotMap refine_ctx = reflect_ctx;
      refine_ctx["reflection"] = judged.reflection_text;
      out.route = Route::refine;
      out.reflect =
          ReflectSample{job.provenance_id, reflect_ctx, Verdict::unreasonable, judged.reflection_text};
      out.refine = RefineSample{job.provenance_id, refine_ctx, refined.refined_text};
      return out;
    }
    out.route = Route::mixed;
  } catch (const ParseError&) {
    out.route = Route::parse_error;
  } catch (const TransportError& e) {
    out.backend_error = e.what();
  } catch (const OracleMissError& e) {
    out.backend_error = e.what();
  }
  return out;
}

CapabilityDatasets run_jobs(EntityKind kind, const std::vector<Job>& jobs, const Backend& backend,
                            const TemplateSet& templates, std::size_t workers) {
  for (auto cap : {Capability::reason, Capability::reflect, Capability::refine}) {
    templates.get(template_for(kind, cap));
  }
  if (templates.stage() != PromptStage::construction) {
    throw TemplateError("dataset construction needs construction-stage templates");
  }

  const auto outcomes = ordered_parallel_map<Outcome>(
      jobs.size(), workers, [&](std::size_t i) { return route_sample(jobs[i], kind, backend, templates); });

  CapabilityDatasets result;
  result.kind = kind;
  BuildStats& st = result.stats;
  for (const auto& o : outcomes) {
    if (o.backend_error) {
      result.abort_error = *o.backend_error;
      break;
    }
    ++st.n_input;
    switch (o.route) {
      case Route::reason:
        ++st.n_reason;
        ++st.n_reflect_pos;
        result.reason.push_back(*o.reason);
        result.reflect.push_back(*o.reflect);
        break;
      case Route::refine:
        ++st.n_refine;
        ++st.n_reflect_neg;
        result.reflect.push_back(*o.reflect);
        result.refine.push_back(*o.refine);
        break;
      case Route::mixed: ++st.n_discarded_mixed; break;
      case Route::failed_refine: ++st.n_discarded_failed_refine; break;
      case Route::parse_error: ++st.n_parse_errors; break;
    }
  }
  return result;
}

std::string provenance(EntityKind kind, std::size_t index, std::size_t pass) {
  return std::string(to_string(kind)) + "-" + std::to_string(index) + "-p" + std::to_string(pass);
}

}  // namespace

CapabilityDatasets build_user_datasets(const std::vector<LabeledSample>& samples,
                                       const Backend& backend, const TemplateSet& construction,
                                       const Catalog& catalog, const BuildOptions& opts) {
  std::vector<Job> jobs;
  jobs.reserve(samples.size() * opts.passes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < opts.passes; ++p) {
      jobs.push_back({provenance(EntityKind::user, i, p),
                      user_construction_slots(samples[i], catalog),
                      user_entity_slots(samples[i], catalog), samples[i].label,
                      opts.seed + static_cast<std::int64_t>(p)});
    }
  }
  return run_jobs(EntityKind::user, jobs, backend, construction, opts.workers);
}

CapabilityDatasets build_item_datasets(const std::vector<ItemCentricSample>& samples,
                                       const Backend& backend, const TemplateSet& construction,
                                       const Catalog& catalog, const BuildOptions& opts) {
  std::vector<Job> jobs;
  jobs.reserve(samples.size() * opts.passes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t p = 0; p < opts.passes; ++p) {
      jobs.push_back({provenance(EntityKind::item, i, p),
                      item_construction_slots(samples[i], catalog),
                      item_entity_slots(samples[i], catalog), samples[i].label,
                      opts.seed + static_cast<std::int64_t>(p)});
    }
  }
  return run_jobs(EntityKind::item, jobs, backend, construction, opts.workers);
}

// ---- JSON -----------------------------------------------------------------------

json to_json(const ReasonSample& s) {
  return {{"provenance_id", s.provenance_id}, {"input_context", s.input_context},
          {"target_knowledge", s.target_knowledge}};
}

json to_json(const ReflectSample& s) {
  return {{"provenance_id", s.provenance_id}, {"input_context", s.input_context},
          {"verdict", to_string(s.verdict)}, {"reflection_text", s.reflection_text}};
}

json to_json(const RefineSample& s) {
  return {{"provenance_id", s.provenance_id}, {"input_context", s.input_context},
          {"target_refined", s.target_refined}};
}

json to_json(const BuildStats& s) {
  return {{"n_input", s.n_input},
          {"n_reason", s.n_reason},
          {"n_reflect_pos", s.n_reflect_pos},
          {"n_reflect_neg", s.n_reflect_neg},
          {"n_refine", s.n_refine},
          {"n_discarded_mixed", s.n_discarded_mixed},
          {"n_discarded_failed_refine", s.n_discarded_failed_refine},
          {"n_parse_errors", s.n_parse_errors}};
}

ReasonSample reason_sample_from_json(const json& j) {
  return {j.at("provenance_id").get<std::string>(), j.at("input_context").get<SlotMap>(),
          j.at("target_knowledge").get<std::string>()};
}

ReflectSample reflect_sample_from_json(const json& j) {
  return {j.at("provenance_id").get<std::string>(), j.at("input_context").get<SlotMap>(),
          parse_verdict_name(j.at("verdict").get<std::string>()),
          j.at("reflection_text").get<std::string>()};
}

RefineSample refine_sample_from_json(const json& j) {
  return {j.at("provenance_id").get<std::string>(), j.at("input_context").get<SlotMap>(),
          j.at("target_refined").get<std::string>()};
}

BuildStats build_stats_from_json(const json& j) {
  BuildStats s;
  s.n_input = j.at("n_input").get<std::size_t>();
  s.n_reason = j.at("n_reason").get<std::size_t>();
  s.n_reflect_pos = j.at("n_reflect_pos").get<std::size_t>();
  s.n_reflect_neg = j.at("n_reflect_neg").get<std::size_t>();
  s.n_refine = j.at("n_refine").get<std::size_t>();
  s.n_discarded_mixed = j.at("n_discarded_mixed").get<std::size_t>();
  s.n_discarded_failed_refine = j.at("n_discarded_failed_refine").get<std::size_t>();
  s.n_parse_errors = j.at("n_parse_errors").get<std::size_t>();
  return s;
}

}  // namespace recrefine
