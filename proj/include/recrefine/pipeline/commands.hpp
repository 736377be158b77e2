#pragma once

#include <filesystem>
#include <string>

#include "recrefine/ctr/metrics.hpp"
#include "recrefine/log.hpp"
#include "recrefine/pipeline/config.hpp"

namespace recrefine::pipeline {

// Output layout under PipelineConfig::output_dir:
//   build/   {user,item}_{reason,reflect,refine}.jsonl, {user,item}_stats.json
//   export/  {user,item}_{reason,reflect,refine}.jsonl, metadata.json, losses.json
//   infer/   knowledge.jsonl, embeddings.jsonl, stats.json
//   train/   base.ckpt, fused.ckpt, train_log.json
//   eval/    metrics.json, comparison.md

fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage);

// Each command returns a process exit code: 0 on success, 1 when the run
// stopped early after writing partial outputs. Other failures are thrown.
// build and infer use the configured backends unless `backends` is given.
int cmd_build(const PipelineConfig& cfg, EventLog& log, const BackendSet* backends = nullptr);
int cmd_export(const PipelineConfig& cfg, EventLog& log);
int cmd_infer(const PipelineConfig& cfg, EventLog& log, const BackendSet* backends = nullptr);
int cmd_train(const PipelineConfig& cfg, EventLog& log);
int cmd_eval(const PipelineConfig& cfg, EventLog& log);

struct Comparison {
  std::string backbone;
  ctr::Metrics base;
  ctr::Metrics fused;
  /// (fused - base) / base * 100.
  double auc_rel_impr = 0.0;
  /// (base - fused) / base * 100; positive when the fused model's loss is lower.
  double logloss_rel_reduction = 0.0;
};

Comparison compare(const std::string& backbone, const ctr::Metrics& base, const ctr::Metrics& fused);
json to_json(const Comparison& c);
/// Markdown table with one row per comparison.
std::string format_table(const Comparison& c);

}  // namespace recrefine::pipeline
