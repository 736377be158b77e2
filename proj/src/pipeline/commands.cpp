#include "recrefine/pipeline/commands.hpp"

#include <cstdio>

#include "recrefine/context.hpp"
#include "recrefine/ctr/checkpoint.hpp"
#include "recrefine/ctr/features.hpp"
#include "recrefine/dataset_builder.hpp"
#include "recrefine/error.hpp"
#include "recrefine/sft_export.hpp"

namespace recrefine::pipeline {

fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage) { return cfg.output_dir / stage; }

namespace {

struct Data {
  std::vector<Interaction> all;
  Catalog catalog;
  Split split;
};

Data load_data(const PipelineConfig& cfg, EventLog& log) {
  Data d;
  d.all = load_interactions(cfg.interactions, cfg.log_format);
  d.catalog = load_catalog(cfg.items, cfg.item_format);
  d.split = chronological_split(d.all, cfg.split);
  log.emit("data.loaded", {{"interactions", d.all.size()},
                           {"items", d.catalog.size()},
                           {"train", d.split.train.size()},
                           {"test", d.split.test.size()}});
  return d;
}

/// A prior stage's output; missing files are a usage error, not a runtime one.
fs::path require(const fs::path& p, const std::string& producer) {
  if (!fs::exists(p)) {
    throw ValidationError("missing " + p.string() + " (run '" + producer + "' first)");
  }
  return p;
}

template <typename T>
std::vector<json> rows(const std::vector<T>& items) {
  std::vector<json> out;
  out.reserve(items.size());
  for (const auto& x : items) out.push_back(to_json(x));
  return out;
}

void write_datasets(const fs::path& dir, const CapabilityDatasets& ds) {
  const std::string k(to_string(ds.kind));
  write_jsonl(dir / (k + "_reason.jsonl"), rows(ds.reason));
  write_jsonl(dir / (k + "_reflect.jsonl"), rows(ds.reflect));
  write_jsonl(dir / (k + "_refine.jsonl"), rows(ds.refine));
  json stats = to_json(ds.stats);
  stats["aborted"] = ds.abort_error ? json(*ds.abort_error) : json(nullptr);
  write_json_file(dir / (k + "_stats.json"), stats);
}

CapabilityDatasets read_datasets(const fs::path& dir, EntityKind kind) {
  const std::string k(to_string(kind));
  CapabilityDatasets ds;
  ds.kind = kind;
  for (const auto& j : read_jsonl(require(dir / (k + "_reason.jsonl"), "build"))) {
    ds.reason.push_back(reason_sample_from_json(j));
  }
  for (const auto& j : read_jsonl(require(dir / (k + "_reflect.jsonl"), "build"))) {
    ds.reflect.push_back(reflect_sample_from_json(j));
  }
  for (const auto& j : read_jsonl(require(dir / (k + "_refine.jsonl"), "build"))) {
    ds.refine.push_back(refine_sample_from_json(j));
  }
  return ds;
}

std::vector<std::string> attribute_fields(const PipelineConfig& cfg, const Catalog& catalog) {
  return cfg.attribute_fields ? *cfg.attribute_fields : ctr::attribute_keys(catalog);
}

}  // namespace

int cmd_build(const PipelineConfig& cfg, EventLog& log, const BackendSet* injected) {
  const Data data = load_data(cfg, log);
  const TemplateSet templates = TemplateSet::load(cfg.construction_templates, PromptStage::construction);
  const BackendSet backends = injected ? *injected : make_backends(cfg);
  const LabelRule rule = cfg.label_rule();

  const auto user_samples = build_user_samples(
      data.split.train, {cfg.builder.max_hist, cfg.builder.targets_per_user, rule});
  const auto item_samples = build_item_samples(
      data.split.train,
      {cfg.builder.n_pos, cfg.builder.n_neg, cfg.builder.targets_per_item, cfg.builder.max_hist, rule},
      static_cast<std::uint64_t>(cfg.seed));
  log.emit("build.samples", {{"user", user_samples.size()}, {"item", item_samples.size()}});

  const BuildOptions opts{cfg.builder.passes, cfg.workers, cfg.seed};
  const fs::path dir = stage_dir(cfg, "build");

  const RoleRouter user_router(backends.user.actor, backends.user.reflector);
  const auto user = build_user_datasets(user_samples, user_router, templates, data.catalog, opts);
  write_datasets(dir, user);
  log.emit("build.done", {{"kind", "user"}, {"stats", to_json(user.stats)}});
  if (user.abort_error) {
    log.emit("build.aborted", {{"kind", "user"}, {"error", *user.abort_error}});
    return 1;
  }

  const RoleRouter item_router(backends.item.actor, backends.item.reflector);
  const auto item = build_item_datasets(item_samples, item_router, templates, data.catalog, opts);
  write_datasets(dir, item);
  log.emit("build.done", {{"kind", "item"}, {"stats", to_json(item.stats)}});
  if (item.abort_error) {
    log.emit("build.aborted", {{"kind", "item"}, {"error", *item.abort_error}});
    return 1;
  }
  return 0;
}

int cmd_export(const PipelineConfig& cfg, EventLog& log) {
  const TemplateSet templates = TemplateSet::load(cfg.inference_templates, PromptStage::inference);
  const fs::path in_dir = stage_dir(cfg, "build");
  const fs::path dir = stage_dir(cfg, "export");

  std::map<EntityKind, std::vector<SFTPair>> pairs;
  json counts = json::object();
  for (EntityKind kind : {EntityKind::user, EntityKind::item}) {
    const auto ds = read_datasets(in_dir, kind);
    pairs[kind] = assemble(ds, templates);
    std::map<Capability, std::vector<json>> by_cap;
    for (Capability c : {Capability::reason, Capability::reflect, Capability::refine}) by_cap[c];
    for (const auto& p : pairs[kind]) by_cap[p.capability].push_back(to_json(p));
    for (const auto& [cap, r] : by_cap) {
      const std::string name = std::string(to_string(kind)) + "_" + std::string(to_string(cap));
      write_jsonl(dir / (name + ".jsonl"), r);
      counts[name] = r.size();
    }
  }

  std::vector<std::string> corpus;
  for (const auto& [kind, ps] : pairs) {
    for (const auto& p : ps) corpus.push_back(p.target_text);
  }
  const UnigramScorer scorer(corpus);
  json losses = json::object();
  for (const auto& [kind, ps] : pairs) losses[std::string(to_string(kind))] = to_json(eval_losses(ps, scorer));
  losses["scorer"] = "unigram (add-one smoothing over exported targets)";

  write_json_file(dir / "losses.json", losses);
  write_json_file(dir / "metadata.json",
                  {{"format", {{"record", "jsonl"}, {"fields", {"input", "target", "capability", "provenance_id"}}}},
                   {"counts", counts},
                   {"fine_tuning", lora_metadata()}});
  log.emit("export.done", {{"counts", counts}});
  return 0;
}

int cmd_infer(const PipelineConfig& cfg, EventLog& log, const BackendSet* injected) {
  const Data data = load_data(cfg, log);
  const TemplateSet templates = TemplateSet::load(cfg.inference_templates, PromptStage::inference);
  const BackendSet backends = injected ? *injected : make_backends(cfg);
  const auto encoder = make_encoder(cfg);

  const auto contexts = build_entity_contexts(
      data.all, data.split.train, data.catalog,
      {cfg.builder.max_hist, cfg.builder.n_pos, cfg.builder.n_neg, cfg.label_rule()},
      static_cast<std::uint64_t>(cfg.seed));
  log.emit("infer.start", {{"entities", contexts.size()}, {"strategy", to_string(cfg.strategy.name)}});

  InferenceOptions opts;
  opts.strategy = cfg.strategy.name;
  opts.max_retries = cfg.strategy.max_retries;
  opts.filter.k = cfg.strategy.k;
  opts.filter.temperature = cfg.strategy.temperature;
  opts.workers = cfg.workers;
  opts.seed = cfg.seed;
  const auto run = run_inference(contexts, backends.user, backends.item, templates, *encoder, opts);

  const fs::path dir = stage_dir(cfg, "infer");
  write_jsonl(dir / "knowledge.jsonl", run.knowledge);
  run.embeddings.save(dir / "embeddings.jsonl");
  const json stats = {{"entities", contexts.size()},
                      {"failed", run.n_failed},
                      {"strategy", to_string(cfg.strategy.name)},
                      {"encoder_id", encoder->id()}};
  write_json_file(dir / "stats.json", stats);
  log.emit("infer.done", stats);
  return 0;
}

int cmd_train(const PipelineConfig& cfg, EventLog& log) {
  const fs::path store_path = require(stage_dir(cfg, "infer") / "embeddings.jsonl", "infer");
  const Data data = load_data(cfg, log);
  const EmbeddingStore store = EmbeddingStore::load(store_path);
  const LabelRule rule = cfg.label_rule();
  const auto space = ctr::FeatureSpace::build(data.split.train, data.catalog, attribute_fields(cfg, data.catalog));

  json train_log = {{"config", ctr::to_json(cfg.ctr)}, {"fields", space.fields()}};
  const fs::path dir = stage_dir(cfg, "train");
  for (const bool fused : {false, true}) {
    const std::string name = fused ? "fused" : "base";
    ctr::ExampleBuildStats stats;
    const auto examples =
        ctr::make_examples(data.split.train, data.catalog, space, rule, fused ? &store : nullptr, &stats);
    const auto shape = ctr::make_shape(space.field_sizes(), fused ? store.dims() : 0, cfg.ctr);
    log.emit("train.start", {{"model", name}, {"examples", examples.size()}});
    auto result = ctr::train(examples, shape, cfg.ctr);
    const json info = {{"model", name},
                       {"config", ctr::to_json(cfg.ctr)},
                       {"epoch_losses", result.epoch_losses},
                       {"missing_knowledge", stats.missing_knowledge}};
    ctr::save_checkpoint({std::move(result.params), space, info}, dir / (name + ".ckpt"));
    train_log[name] = info;
    log.emit("train.done", {{"model", name},
                            {"epochs", result.epoch_losses.size()},
                            {"final_loss", result.epoch_losses.empty() ? json(nullptr)
                                                                       : json(result.epoch_losses.back())}});
  }
  write_json_file(dir / "train_log.json", train_log);
  return 0;
}

int cmd_eval(const PipelineConfig& cfg, EventLog& log) {
  const fs::path dir_in = stage_dir(cfg, "train");
  const auto base = ctr::load_checkpoint(require(dir_in / "base.ckpt", "train"));
  const auto fused = ctr::load_checkpoint(require(dir_in / "fused.ckpt", "train"));
  const EmbeddingStore store =
      EmbeddingStore::load(require(stage_dir(cfg, "infer") / "embeddings.jsonl", "infer"));
  const Data data = load_data(cfg, log);
  const LabelRule rule = cfg.label_rule();

  const auto score = [&](const ctr::Checkpoint& ck, const EmbeddingStore* knowledge) {
    const auto examples = ctr::make_examples(data.split.test, data.catalog, ck.features, rule, knowledge);
    return ctr::evaluate_model(ck.params, examples, cfg.ctr.clamp_eps, cfg.workers);
  };
  const auto m_base = score(base, nullptr);
  const auto m_fused = score(fused, &store);
  const Comparison cmp = compare(std::string(ctr::to_string(cfg.ctr.backbone)), m_base, m_fused);

  const fs::path dir = stage_dir(cfg, "eval");
  write_json_file(dir / "metrics.json", to_json(cmp));
  const std::string table = format_table(cmp);
  write_text_file(dir / "comparison.md", table);
  std::fputs(table.c_str(), stdout);
  log.emit("eval.done", to_json(cmp));
  return 0;
}

Comparison compare(const std::string& backbone, const ctr::Metrics& base, const ctr::Metrics& fused) {
  Comparison c{backbone, base, fused, 0.0, 0.0};
  if (base.auc == 0.0 || base.logloss == 0.0) throw MetricError("relative change against a zero baseline");
  c.auc_rel_impr = (fused.auc - base.auc) / base.auc * 100.0;
  c.logloss_rel_reduction = (base.logloss - fused.logloss) / base.logloss * 100.0;
  return c;
}

json to_json(const Comparison& c) {
  return {{"backbone", c.backbone},
          {"base", ctr::to_json(c.base)},
          {"fused", ctr::to_json(c.fused)},
          {"auc_rel_impr_pct", c.auc_rel_impr},
          {"logloss_rel_reduction_pct", c.logloss_rel_reduction}};
}

std::string format_table(const Comparison& c) {
  char row[512];
  std::snprintf(row, sizeof row, "| %s | %.4f | %.4f | %+.2f%% | %.4f | %.4f | %+.2f%% |\n", c.backbone.c_str(),
                c.base.auc, c.fused.auc, c.auc_rel_impr, c.base.logloss, c.fused.logloss,
                c.logloss_rel_reduction);
  return "| backbone | base AUC | fused AUC | AUC rel. impr. | base LogLoss | fused LogLoss | "
         "LogLoss rel. reduction |\n"
         "|---|---|---|---|---|---|---|\n" +
         std::string(row);
}

}  // namespace recrefine::pipeline
