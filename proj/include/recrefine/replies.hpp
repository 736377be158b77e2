#pragma once

#include <string>
#include <string_view>

namespace recrefine {

// Structured reply protocol. Models answer with marker lines:
//   PREDICTION: Yes|No
//   KNOWLEDGE: <text, may continue on following lines>
//   VERDICT: Reasonable|Unreasonable
//   REFLECTION: <text>
// Keys are case-insensitive and the first occurrence of a key wins. A marker's
// text runs until the next marker line.

enum class Verdict { reasonable, unreasonable };

std::string_view to_string(Verdict v);
Verdict parse_verdict_name(std::string_view name);

struct ReasonOutput {
  std::string knowledge_text;
  int prediction = 0;

  bool operator==(const ReasonOutput&) const = default;
};

struct ReflectOutput {
  Verdict verdict = Verdict::reasonable;
  /// Empty iff verdict is reasonable.
  std::string reflection_text;

  bool operator==(const ReflectOutput&) const = default;
};

struct RefineOutput {
  std::string refined_text;
  int prediction = 0;

  bool operator==(const RefineOutput&) const = default;
};

ReasonOutput parse_reason(std::string_view raw);
ReflectOutput parse_reflect(std::string_view raw);
RefineOutput parse_refine(std::string_view raw);

/// Actor reply at inference time: the KNOWLEDGE marker when present, otherwise
/// the whole trimmed reply (a fine-tuned actor answers with bare knowledge).
std::string parse_knowledge(std::string_view raw);

std::string format_reason(const ReasonOutput& out);
std::string format_reflect(const ReflectOutput& out);
std::string format_refine(const RefineOutput& out);
std::string format_knowledge(std::string_view knowledge);

/// The canonical SFT target for a reflection sample.
std::string reflect_target(Verdict verdict, std::string_view reflection_text);

}  // namespace recrefine
