#include "recrefine/sft_export.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "recrefine/error.hpp"
#include "recrefine/replies.hpp"

namespace recrefine {

namespace {

std::string render_for(const TemplateSet& templates, EntityKind kind, Capability cap,
                       const SlotMap& ctx, const std::string& provenance_id) {
  try {
    return render(templates.get(template_for(kind, cap)), ctx);
  } catch (const TemplateError& e) {
    throw ExportError(provenance_id + ": " + e.what());
  }
}

void require(bool ok, const std::string& provenance_id, const char* what) {
  if (!ok) throw ExportError(provenance_id + ": " + what);
}

}  // namespace

std::vector<SFTPair> assemble(EntityKind kind, std::span<const ReasonSample> reason,
                              std::span<const ReflectSample> reflect,
                              std::span<const RefineSample> refine, const TemplateSet& templates) {
  if (templates.stage() != PromptStage::inference) {
    throw ExportError("fine-tuning pairs need inference-stage templates");
  }
  std::vector<SFTPair> pairs;
  pairs.reserve(reason.size() + reflect.size() + refine.size());
  std::set<std::string> ids;
  auto emit = [&](Capability cap, const std::string& source, std::string input, std::string target) {
    std::string id = std::string(to_string(cap)) + ":" + source;
    require(ids.insert(id).second, source, "duplicate provenance id");
    pairs.push_back({std::move(input), std::move(target), cap, std::move(id)});
  };

  for (const auto& s : reason) {
    require(!s.target_knowledge.empty(), s.provenance_id, "empty target knowledge");
    emit(Capability::reason, s.provenance_id,
         render_for(templates, kind, Capability::reason, s.input_context, s.provenance_id),
         s.target_knowledge);
  }
  for (const auto& s : refine) {
    require(!s.target_refined.empty(), s.provenance_id, "empty refined knowledge");
    auto it = s.input_context.find("reflection");
    require(it != s.input_context.end() && !it->second.empty(), s.provenance_id,
            "refine context lacks reflection text");
    emit(Capability::refine, s.provenance_id,
         render_for(templates, kind, Capability::refine, s.input_context, s.provenance_id),
         s.target_refined);
  }
  for (const auto& s : reflect) {
    const bool empty = s.reflection_text.empty();
    require(empty == (s.verdict == Verdict::reasonable), s.provenance_id,
            "reflection text must be empty exactly when the verdict is reasonable");
    emit(Capability::reflect, s.provenance_id,
         render_for(templates, kind, Capability::reflect, s.input_context, s.provenance_id),
         reflect_target(s.verdict, s.reflection_text));
  }
  return pairs;
}

std::vector<SFTPair> assemble(const CapabilityDatasets& datasets, const TemplateSet& templates) {
  return assemble(datasets.kind, datasets.reason, datasets.reflect, datasets.refine, templates);
}

json to_json(const SFTPair& p) {
  return {{"input", p.input_text},
          {"target", p.target_text},
          {"capability", to_string(p.capability)},
          {"provenance_id", p.provenance_id}};
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

std::vector<std::string> TokenScorer::tokenize(std::string_view text) const {
  return whitespace_tokens(text);
}

UnigramScorer::UnigramScorer(std::span<const std::string> corpus) {
  for (const auto& text : corpus) {
    for (auto& tok : whitespace_tokens(text)) {
      counts_[tok] += 1.0;
      total_ += 1.0;
    }
  }
}

double UnigramScorer::log_prob(std::string_view, std::span<const std::string>,
                               const std::string& token) const {
  auto it = counts_.find(token);
  const double count = it == counts_.end() ? 0.0 : it->second;
  // One extra vocabulary slot for unseen tokens.
  const double vocab = static_cast<double>(counts_.size()) + 1.0;
  return std::log((count + 1.0) / (total_ + vocab));
}

LossReport eval_losses(std::span<const SFTPair> pairs, const TokenScorer& scorer) {
  std::vector<double> reason, refine, reflect;
  for (const auto& p : pairs) {
    const auto tokens = scorer.tokenize(p.target_text);
    double loss = 0.0;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const double lp = scorer.log_prob(p.input_text, std::span(tokens).first(t), tokens[t]);
      if (!std::isfinite(lp) || lp > 0.0) {
        throw NumericError(p.provenance_id + ": invalid token log-probability " +
                           std::to_string(lp));
      }
      loss -= lp;
    }
    switch (p.capability) {
      case Capability::reason: reason.push_back(loss); break;
      case Capability::refine: refine.push_back(loss); break;
      case Capability::reflect: reflect.push_back(loss); break;
    }
  }
  auto mean = [](std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
  };
  LossReport r;
  r.n_reason = reason.size();
  r.n_refine = refine.size();
  r.n_reflect = reflect.size();
  r.l_reason = mean(reason);
  r.l_refine = mean(refine);
  r.l_reflect = mean(reflect);
  r.l_actor = r.l_reason + r.l_refine;
  return r;
}

json to_json(const LossReport& r) {
  return {{"l_reason", r.l_reason}, {"l_refine", r.l_refine},   {"l_actor", r.l_actor},
          {"l_reflect", r.l_reflect}, {"n_reason", r.n_reason}, {"n_refine", r.n_refine},
          {"n_reflect", r.n_reflect}};
}

json lora_metadata() {
  return {{"method", "lora"},
          {"rank", 8},
          {"alpha", 16},
          {"dropout", 0.05},
          {"target_modules", "all-linear"},
          {"epochs", 3},
          {"actor_datasets", {"reason", "refine"}},
          {"reflector_datasets", {"reflect"}}};
}

}  // namespace recrefine
