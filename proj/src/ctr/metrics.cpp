#include "recrefine/ctr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "recrefine/error.hpp"

namespace recrefine::ctr {

json to_json(const Metrics& m) { return {{"auc", m.auc}, {"logloss", m.logloss}, {"n", m.n}}; }

namespace {

void check_lengths(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw MetricError("scores and labels differ in length (" + std::to_string(scores.size()) +
                      " vs " + std::to_string(labels.size()) + ")");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw MetricError("labels must be 0 or 1");
  }
}

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw MetricError("AUC needs both positive and negative labels");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double logloss(std::span<const double> scores, std::span<const int> labels, double clamp_eps) {
  check_lengths(scores, labels);
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw MetricError("clamp_eps must lie in (0, 0.5)");
  if (scores.empty()) throw MetricError("logloss of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], clamp_eps, 1.0 - clamp_eps);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(scores.size());
}

Metrics evaluate(std::span<const double> scores, std::span<const int> labels, double clamp_eps) {
  return {auc(scores, labels), logloss(scores, labels, clamp_eps), scores.size()};
}

}  // namespace recrefine::ctr
