#pragma once

#include <cstddef>
#include <span>

#include "recrefine/jsonl.hpp"

namespace recrefine::ctr {

struct Metrics {
  double auc = 0.0;
  double logloss = 0.0;
  std::size_t n = 0;
};

json to_json(const Metrics& m);

/// Rank-based AUC; tied scores share their average rank, so each tied
/// positive/negative pair counts one half. Throws MetricError unless both
/// classes are present and lengths match.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean binary cross-entropy with probabilities clamped to
/// [clamp_eps, 1 - clamp_eps]. clamp_eps must lie in (0, 0.5).
double logloss(std::span<const double> scores, std::span<const int> labels, double clamp_eps = 1e-7);

Metrics evaluate(std::span<const double> scores, std::span<const int> labels, double clamp_eps = 1e-7);

}  // namespace recrefine::ctr
