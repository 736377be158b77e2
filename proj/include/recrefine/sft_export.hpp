#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recrefine/dataset_builder.hpp"
#include "recrefine/prompt.hpp"

namespace recrefine {

struct SFTPair {
  std::string input_text;
  std::string target_text;
  Capability capability = Capability::reason;
  /// "<capability>:<source provenance id>", unique across an assembled set.
  std::string provenance_id;
};

/// Turns the three capability datasets into (prompt, target) pairs rendered
/// with inference-stage templates:
///   reason  -> input = reason prompt(context),  target = knowledge
///   refine  -> input = refine prompt(context + knowledge + reflection), target = refined
///   reflect -> input = reflect prompt(context + knowledge), target = verdict line
///              (+ REFLECTION line when unreasonable)
/// Throws ExportError naming the offending record.
std::vector<SFTPair> assemble(EntityKind kind, std::span<const ReasonSample> reason,
                              std::span<const ReflectSample> reflect,
                              std::span<const RefineSample> refine, const TemplateSet& templates);

std::vector<SFTPair> assemble(const CapabilityDatasets& datasets, const TemplateSet& templates);

json to_json(const SFTPair& p);

/// Per-token log-probability model consulted by eval_losses.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const;
  /// log p(token | input, preceding target tokens); must be finite and <= 0.
  virtual double log_prob(std::string_view input, std::span<const std::string> prefix,
                          const std::string& token) const = 0;
};

std::vector<std::string> whitespace_tokens(std::string_view text);

class ConstantScorer final : public TokenScorer {
 public:
  explicit ConstantScorer(double log_prob) : log_prob_(log_prob) {}
  double log_prob(std::string_view, std::span<const std::string>, const std::string&) const override {
    return log_prob_;
  }

 private:
  double log_prob_;
};

/// Add-one smoothed unigram model over whitespace tokens of a corpus. Ignores
/// the input and prefix; used to report reference losses at export time.
class UnigramScorer final : public TokenScorer {
 public:
  explicit UnigramScorer(std::span<const std::string> corpus);
  double log_prob(std::string_view, std::span<const std::string>,
                  const std::string& token) const override;

 private:
  std::unordered_map<std::string, double> counts_;
  double total_ = 0.0;
};

struct LossReport {
  double l_reason = 0.0;
  double l_refine = 0.0;
  double l_actor = 0.0;
  double l_reflect = 0.0;
  std::size_t n_reason = 0;
  std::size_t n_refine = 0;
  std::size_t n_reflect = 0;
};

/// Per-pair loss is the negated sum of target-token log-probabilities; each
/// capability loss is the mean over its pairs (0 when it has none) and
/// l_actor = l_reason + l_refine. Means are reduced over sorted per-pair
/// losses so the report does not depend on pair order.
LossReport eval_losses(std::span<const SFTPair> pairs, const TokenScorer& scorer);

json to_json(const LossReport& r);

/// Fine-tuning hyperparameters recorded alongside exported files. They are
/// metadata for downstream trainers; nothing here trains a model.
json lora_metadata();

}  // namespace recrefine
