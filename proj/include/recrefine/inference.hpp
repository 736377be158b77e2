#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recrefine/backend.hpp"
#include "recrefine/context.hpp"
#include "recrefine/encoder.hpp"
#include "recrefine/replies.hpp"

namespace recrefine {

enum class StopReason { approved, retries_exhausted, parse_failure };

std::string_view to_string(StopReason r);

struct TraceStep {
  std::string knowledge_text;
  /// Absent when the reflector's reply could not be parsed.
  std::optional<Verdict> verdict;
  std::string reflection_text;
};

/// Invariants: 1 <= |iterations| <= max_retries + 1; every step but the last
/// is unreasonable with a non-empty reflection; stop_reason is approved iff
/// the last verdict is reasonable.
struct RefinementTrace {
  std::vector<TraceStep> iterations;
  StopReason stop_reason = StopReason::approved;
};

struct RefineResult {
  std::string final_knowledge;
  RefinementTrace trace;
};

/// Generate, judge, and refine until the reflector approves or max_retries
/// refinements have been spent. Every produced knowledge text is judged once.
/// An unparseable actor or reflector reply mid-loop ends the loop with the
/// last good knowledge (stop_reason = parse_failure); an unparseable first
/// generation throws InferenceError. Backend errors propagate.
RefineResult iterative_refine(const EntityContext& ctx, const Backend& actor,
                              const Backend& reflector, const TemplateSet& templates,
                              std::size_t max_retries, std::int64_t seed = 0);

struct FilterCandidate {
  std::string knowledge_text;
  std::optional<Verdict> verdict;
};

struct FilterResult {
  std::vector<FilterCandidate> candidates;
  std::vector<std::size_t> kept_indices;
  bool fallback_used = false;
  std::size_t n_unparseable = 0;
};

struct FilterOutput {
  EmbeddingVector embedding;
  FilterResult result;
};

struct FilterOptions {
  std::size_t k = 3;
  double temperature = 0.7;
  std::int64_t seed = 0;
};

/// Samples k candidates (candidate j uses seed + j and sample index j), keeps
/// the ones judged reasonable and averages their encodings. When none is
/// kept, averages every parsed candidate and sets fallback_used. Throws
/// InferenceError when no candidate parses.
FilterOutput filter_knowledge(const EntityContext& ctx, const Backend& actor,
                              const Backend& reflector, const TemplateSet& templates,
                              const TextEncoder& encoder, const FilterOptions& opts = {});

enum class Strategy { iterative, filter };

Strategy parse_strategy(const std::string& name);
std::string_view to_string(Strategy s);

struct InferenceOptions {
  Strategy strategy = Strategy::iterative;
  std::size_t max_retries = 1;
  FilterOptions filter;
  std::size_t workers = 1;
  std::int64_t seed = 0;
};

struct RoleBackends {
  BackendPtr actor;
  BackendPtr reflector;
};

struct InferenceRun {
  /// Knowledge store rows in context order.
  std::vector<json> knowledge;
  EmbeddingStore embeddings;
  std::size_t n_failed = 0;
};

/// Runs the chosen strategy for every entity. Entities whose inference fails
/// to parse get empty knowledge (and the encoder's vector for ""), marked
/// "failed" in their row.
InferenceRun run_inference(const std::vector<EntityContext>& contexts, const RoleBackends& users,
                           const RoleBackends& items, const TemplateSet& templates,
                           const TextEncoder& encoder, const InferenceOptions& opts);

json trace_summary(const RefinementTrace& trace);
json filter_summary(const FilterResult& result);

}  // namespace recrefine
