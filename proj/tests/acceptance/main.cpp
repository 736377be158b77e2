// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctr_fixtures.hpp"
#include "inference_fixtures.hpp"
#include "recrefine/context.hpp"
#include "recrefine/ctr/features.hpp"
#include "recrefine/ctr/metrics.hpp"
#include "recrefine/ctr/train.hpp"
#include "recrefine/dataset_builder.hpp"
#include "recrefine/hashing.hpp"
#include "recrefine/inference.hpp"
#include "recrefine/sft_export.hpp"
#include "recrefine/synthetic.hpp"
#include "routing.hpp"
#include "test_util.hpp"

using namespace recrefine;
namespace rt = recrefine::testing;
namespace fs = std::filesystem;

namespace {

// Tolerances and limits.
constexpr double kFilterTol = 1e-12;
constexpr double kAucTol = 1e-12;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kMinFusionLift = 0.02;
constexpr double kLossTol = 1e-12;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Criterion {
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << x;
  return os.str();
}

// ---- AC1 --------------------------------------------------------------------

bool same_buckets(const CapabilityDatasets& ds, const BuildStats& expected) {
  return ds.stats == expected && ds.reason.size() == expected.n_reason &&
         ds.reflect.size() == expected.n_reflect_pos + expected.n_reflect_neg &&
         ds.refine.size() == expected.n_refine;
}

Outcome routing_truth_table() {
  Outcome out;
  const TemplateSet construction = rt::minimal_templates(PromptStage::construction);
  std::vector<std::vector<rt::RoutingCase>> suites;
  for (const auto& c : rt::all_routing_cases()) suites.push_back({c});
  suites.push_back({{true, true, true, true}});
  suites.push_back(rt::all_routing_cases());
  Rng rng(2024);
  std::vector<rt::RoutingCase> mixed;
  for (int i = 0; i < 64; ++i) {
    mixed.push_back({rng.below(2) == 1, rng.below(2) == 1, rng.below(2) == 1, rng.below(10) == 0});
  }
  suites.push_back(mixed);

  std::size_t n_cases = 0;
  for (const auto& cases : suites) {
    n_cases += cases.size();
    const BuildStats expected = rt::expected_stats(cases);
    for (std::size_t workers : {1u, 3u}) {
      BuildOptions opts;
      opts.workers = workers;
      auto uf = rt::make_user_routing(cases, construction);
      const auto users = build_user_datasets(uf.samples, uf.backend, construction, uf.catalog, opts);
      out.require(same_buckets(users, expected), "user buckets differ for a " + std::to_string(cases.size()) +
                                                     "-case suite with " + std::to_string(workers) + " workers");
      auto itf = rt::make_item_routing(cases, construction);
      const auto items = build_item_datasets(itf.samples, itf.backend, construction, itf.catalog, opts);
      out.require(same_buckets(items, expected), "item buckets differ for a " + std::to_string(cases.size()) +
                                                     "-case suite with " + std::to_string(workers) + " workers");
    }
  }
  out.require(n_cases >= 8, "fewer than 8 scripted cases");
  if (out.pass) out.detail = std::to_string(n_cases) + " scripted cases, user and item, 1 and 3 workers";
  return out;
}

// ---- AC2 --------------------------------------------------------------------

Outcome loop_contract() {
  Outcome out;
  const TemplateSet templates = rt::minimal_templates(PromptStage::inference);
  const std::map<std::size_t, int> expected_calls = {{0, 1}, {1, 2}, {3, 4}};
  for (const auto& [retries, calls] : expected_calls) {
    rt::LoopScript never(0);
    iterative_refine(rt::user_context(), *never.actor, *never.reflector, templates, retries);
    out.require(*never.actor_calls == calls, "max_retries=" + std::to_string(retries) + " made " +
                                                 std::to_string(never.actor_calls->load()) + " actor calls");
  }
  int n_checked = 0;
  for (int n = 1; n <= 6; ++n) {
    for (std::size_t retries = 0; retries <= 4; ++retries) {
      rt::LoopScript s(n);
      const auto r = iterative_refine(rt::item_context(), *s.actor, *s.reflector, templates, retries);
      const std::size_t expected = std::min<std::size_t>(static_cast<std::size_t>(n), retries + 1);
      out.require(r.trace.iterations.size() == expected,
                  "approve-at " + std::to_string(n) + ", max_retries " + std::to_string(retries) + ": trace length " +
                      std::to_string(r.trace.iterations.size()));
      ++n_checked;
    }
  }
  if (out.pass) out.detail = "calls 1/2/4 for max_retries 0/1/3; " + std::to_string(n_checked) + " approve-at cases";
  return out;
}

// ---- AC3 --------------------------------------------------------------------

Outcome filter_contract() {
  Outcome out;
  const TemplateSet templates = rt::minimal_templates(PromptStage::inference);
  const HashEncoder encoder({64, true});
  double worst = 0.0;
  for (unsigned mask = 0; mask < 8; ++mask) {
    const std::vector<bool> ok = {(mask & 1U) != 0, (mask & 2U) != 0, (mask & 4U) != 0};
    rt::FilterScript s(ok);
    FilterOptions fo;
    fo.k = 3;
    fo.seed = 17;
    const auto res = filter_knowledge(rt::user_context(), *s.actor, *s.reflector, templates, encoder, fo);

    std::vector<double> sum(encoder.dims(), 0.0);
    double count = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      if (!ok[j] && mask != 0) continue;
      const auto v = encoder.encode_one(rt::FilterScript::candidate_text(j));
      for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += v.values[d];
      count += 1.0;
    }
    out.require(res.embedding.dims() == sum.size(), "wrong output length");
    for (std::size_t d = 0; d < sum.size() && d < res.embedding.dims(); ++d) {
      worst = std::max(worst, std::abs(res.embedding.values[d] - sum[d] / count));
    }
    out.require(res.result.fallback_used == (mask == 0), "fallback flag wrong for pattern " + std::to_string(mask));
  }
  out.require(worst <= kFilterTol, "max deviation " + sci(worst));
  if (out.pass) out.detail = "8 patterns, max deviation " + sci(worst);
  return out;
}

// ---- AC4 --------------------------------------------------------------------

double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

Outcome auc_equivalence() {
  Outcome out;
  Rng rng(4);
  double worst = 0.0;
  std::size_t with_ties = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(99);
    const std::uint64_t levels = 2 + rng.below(n + 1);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(levels)) / static_cast<double>(levels);
      y[i] = static_cast<int>(rng.below(2));
    }
    const std::size_t pos = rng.below(n);
    y[pos] = 1;
    y[(pos + 1 + rng.below(n - 1)) % n] = 0;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) ++with_ties;
    worst = std::max(worst, std::abs(ctr::auc(s, y) - pairwise_auc(s, y)));
  }
  out.require(worst <= kAucTol, "max deviation " + sci(worst));
  out.require(with_ties > 0, "no instance contained ties");
  if (out.pass) {
    out.detail = "200 instances (" + std::to_string(with_ties) + " with ties), max deviation " + sci(worst);
  }
  return out;
}

// ---- AC5 --------------------------------------------------------------------

Outcome gradient_check() {
  Outcome out;
  std::string detail;
  for (auto backbone : {ctr::Backbone::mlp, ctr::Backbone::deepfm}) {
    ctr::ModelShape shape;
    shape.field_sizes = {6, 7, 4};
    shape.emb_dim = 4;
    shape.knowledge_dim = 16;
    shape.connector_hidden = 8;
    shape.hidden = {8, 4};
    shape.backbone = backbone;
    const auto params = rt::random_params(shape, 31);
    const auto batch = rt::random_examples(shape, 16, 32);
    const auto gc = rt::gradient_check(params, batch, kGradStep);
    out.require(gc.max_rel_error <= kGradRelTol, std::string(ctr::to_string(backbone)) + " max relative error " +
                                                     sci(gc.max_rel_error) + " at parameter " +
                                                     std::to_string(gc.worst_index));
    detail += std::string(detail.empty() ? "" : ", ") + std::string(ctr::to_string(backbone)) + " " +
              std::to_string(gc.n_checked) + " params max rel " + sci(gc.max_rel_error);
  }
  if (out.pass) out.detail = detail;
  return out;
}

// ---- AC6 / AC7 --------------------------------------------------------------

struct SyntheticRun {
  std::size_t n_examples = 0;
  double base_auc = 0.0;
  double fused_auc = 0.0;
};

class SyntheticExperiment {
 public:
  SyntheticExperiment()
      : world_(synth::make_world({})),
        split_(chronological_split(world_.interactions)),
        contexts_(build_entity_contexts(world_.interactions, split_.train, world_.catalog, {}, 0)),
        space_(ctr::FeatureSpace::build(split_.train, world_.catalog, {"studio"})),
        templates_(TemplateSet::load(rt::source_dir() / "templates" / "inference", PromptStage::inference)) {}

  std::size_t n_examples() const { return world_.interactions.size(); }

  double train_and_score(const EmbeddingStore* knowledge) const {
    ctr::TrainConfig cfg;
    const LabelRule rule;
    const auto train = ctr::make_examples(split_.train, world_.catalog, space_, rule, knowledge);
    const auto test = ctr::make_examples(split_.test, world_.catalog, space_, rule, knowledge);
    const auto shape = ctr::make_shape(space_.field_sizes(), knowledge ? knowledge->dims() : 0, cfg);
    const auto result = ctr::train(train, shape, cfg);
    return ctr::evaluate_model(result.params, test).auc;
  }

  EmbeddingStore knowledge(std::size_t max_retries) const {
    const synth::Simulator sim(world_, {});
    const auto backends = sim.backends();
    InferenceOptions opts;
    opts.max_retries = max_retries;
    const HashEncoder encoder;
    return run_inference(contexts_, backends.user, backends.item, templates_, encoder, opts).embeddings;
  }

 private:
  synth::World world_;
  Split split_;
  std::vector<EntityContext> contexts_;
  ctr::FeatureSpace space_;
  TemplateSet templates_;
};

Outcome fusion_lift() {
  Outcome out;
  const SyntheticExperiment exp;
  out.require(exp.n_examples() >= 20000, "only " + std::to_string(exp.n_examples()) + " examples");
  const double base = exp.train_and_score(nullptr);
  const auto store = exp.knowledge(1);
  const double fused = exp.train_and_score(&store);
  const std::string numbers = std::to_string(exp.n_examples()) + " examples, base AUC " + fmt(base) +
                              ", fused AUC " + fmt(fused) + ", lift " + fmt(fused - base);
  out.require(fused - base >= kMinFusionLift, numbers);
  if (out.pass) out.detail = numbers;
  return out;
}

Outcome iteration_trend() {
  Outcome out;
  const SyntheticExperiment exp;
  std::vector<double> aucs;
  for (std::size_t r : {0u, 1u, 2u}) {
    const auto store = exp.knowledge(r);
    aucs.push_back(exp.train_and_score(&store));
  }
  const std::string numbers =
      "fused AUC " + fmt(aucs[0]) + " / " + fmt(aucs[1]) + " / " + fmt(aucs[2]) + " for max_retries 0/1/2";
  out.require(aucs[0] <= aucs[1] && aucs[1] <= aucs[2], numbers);
  if (out.pass) out.detail = numbers;
  return out;
}

// ---- AC8 --------------------------------------------------------------------

class TableScorer final : public TokenScorer {
 public:
  explicit TableScorer(std::map<std::string, double> table) : table_(std::move(table)) {}
  double log_prob(std::string_view, std::span<const std::string>, const std::string& token) const override {
    return table_.at(token);
  }

 private:
  std::map<std::string, double> table_;
};

Outcome loss_identity() {
  Outcome out;
  Rng rng(8);
  double worst_identity = 0.0;
  double worst_oracle = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::string, double> table;
    const std::size_t vocab = 1 + rng.below(12);
    for (std::size_t w = 0; w < vocab; ++w) table["t" + std::to_string(w)] = -rng.uniform(1e-3, 8.0);
    std::vector<SFTPair> pairs;
    std::map<Capability, std::pair<double, double>> by_hand;  // (sum of pair losses, count)
    const std::size_t n = rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      const auto cap = static_cast<Capability>(rng.below(3));
      std::string target;
      double loss = 0.0;
      const std::size_t len = 1 + rng.below(10);
      for (std::size_t k = 0; k < len; ++k) {
        const std::string tok = "t" + std::to_string(rng.below(vocab));
        target += (k ? " " : "") + tok;
        loss -= table[tok];
      }
      pairs.push_back({"input " + std::to_string(i), target, cap, std::to_string(i)});
      by_hand[cap].first += loss;
      by_hand[cap].second += 1.0;
    }
    const auto report = eval_losses(pairs, TableScorer(table));
    worst_identity = std::max(worst_identity, std::abs(report.l_actor - (report.l_reason + report.l_refine)));
    const auto mean = [&](Capability c) {
      const auto& [sum, count] = by_hand[c];
      return count == 0.0 ? 0.0 : sum / count;
    };
    worst_oracle = std::max({worst_oracle, std::abs(report.l_reason - mean(Capability::reason)),
                             std::abs(report.l_refine - mean(Capability::refine)),
                             std::abs(report.l_reflect - mean(Capability::reflect))});
  }
  out.require(worst_identity <= kLossTol, "identity deviation " + sci(worst_identity));
  out.require(worst_oracle <= 1e-9, "per-capability mean deviation " + sci(worst_oracle));
  const std::vector<SFTPair> five = {{"in", "a b c d e", Capability::reason, "x"}};
  const double l = eval_losses(five, ConstantScorer(-1.0)).l_reason;
  out.require(l == 5.0, "5-token case returned " + std::to_string(l));
  if (out.pass) out.detail = "100 datasets, identity deviation " + sci(worst_identity) + ", 5-token case 5.0";
  return out;
}

// ---- AC9 --------------------------------------------------------------------

int run(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism_sweep() {
  Outcome out;
  rt::TempDir dir("determinism");
  const fs::path bundle = dir / "bundle";
  const int demo = run(std::string(RECREFINE_DEMO) + " --out " + bundle.string() +
                       " --templates " + (rt::source_dir() / "templates").string() +
                       " --users 80 --items 40 --interactions-per-user 15 --epochs 5");
  out.require(demo == 0, "demo generator exited " + std::to_string(demo));
  if (!out.pass) return out;

  const std::vector<std::string> stages = {"build", "export", "infer", "train", "eval"};
  std::vector<std::map<std::string, std::string>> runs;
  for (const char* name : {"run-a", "run-b"}) {
    const fs::path out_dir = dir / name;
    for (const auto& stage : stages) {
      const int code = run(std::string(RECREFINE_CLI) + " " + stage + " --config " + (bundle / "config.json").string() +
                           " --out " + out_dir.string());
      out.require(code == 0, std::string(name) + " " + stage + " exited " + std::to_string(code));
    }
    if (!out.pass) return out;
    runs.push_back(snapshot(out_dir));
  }
  out.require(runs[0].size() >= 20, "only " + std::to_string(runs[0].size()) + " artifacts");
  std::size_t bytes = 0;
  std::vector<std::string> names;
  for (const auto& [k, v] : runs[0]) names.push_back(k);
  for (const auto& [k, v] : runs[1]) names.push_back(k);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const auto& name : names) {
    const auto a = runs[0].find(name);
    const auto b = runs[1].find(name);
    if (a == runs[0].end() || b == runs[1].end()) {
      out.require(false, name + " present in only one run");
      continue;
    }
    out.require(a->second == b->second, name + " differs");
    bytes += a->second.size();
  }
  if (out.pass) out.detail = std::to_string(names.size()) + " artifacts, " + std::to_string(bytes) + " bytes identical";
  return out;
}

// ---- AC10 -------------------------------------------------------------------

Outcome split_property() {
  Outcome out;
  Rng rng(10);
  std::size_t total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = trial < 5 ? static_cast<std::size_t>(trial + 1)
                                    : (trial % 20 == 0 ? 10000 : 1 + rng.below(10000));
    const std::uint64_t span = 1 + rng.below(2 * n);
    std::vector<Interaction> log;
    for (std::size_t i = 0; i < n; ++i) {
      log.push_back({"u" + std::to_string(rng.below(50)), "i" + std::to_string(rng.below(200)),
                     static_cast<int>(1 + rng.below(5)), static_cast<std::int64_t>(rng.below(span))});
    }
    const auto split = chronological_split(log);
    total += n;
    const std::size_t expected_train = n * 4 / 5;
    out.require(split.train.size() == expected_train,
                "n=" + std::to_string(n) + ": |train|=" + std::to_string(split.train.size()));
    out.require(split.train.size() + split.test.size() == n, "n=" + std::to_string(n) + ": sizes do not add up");
    if (!split.train.empty() && !split.test.empty()) {
      const auto key = [](const Interaction& x) { return std::make_tuple(x.timestamp, x.user_id, x.item_id); };
      auto max_train = key(split.train.front());
      for (const auto& x : split.train) max_train = std::max(max_train, key(x));
      auto min_test = key(split.test.front());
      for (const auto& x : split.test) min_test = std::min(min_test, key(x));
      out.require(max_train <= min_test, "n=" + std::to_string(n) + ": a train key follows a test key");
    }
    auto joined = split.train;
    joined.insert(joined.end(), split.test.begin(), split.test.end());
    const auto by_key = [](const Interaction& a, const Interaction& b) {
      return std::tie(a.timestamp, a.user_id, a.item_id, a.rating) < std::tie(b.timestamp, b.user_id, b.item_id, b.rating);
    };
    std::sort(joined.begin(), joined.end(), by_key);
    std::sort(log.begin(), log.end(), by_key);
    out.require(joined == log, "n=" + std::to_string(n) + ": split is not a partition of the log");
  }
  if (out.pass) out.detail = "200 logs, " + std::to_string(total) + " interactions";
  return out;
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "routing truth table", 5.0, routing_truth_table},
      {2, "refinement loop contract", 1.0, loop_contract},
      {3, "filter contract", 1.0, filter_contract},
      {4, "AUC matches pairwise count", 10.0, auc_equivalence},
      {5, "gradient check", 30.0, gradient_check},
      {6, "fusion lift on synthetic data", 300.0, fusion_lift},
      {7, "fused AUC vs refinement budget", 300.0, iteration_trend},
      {8, "loss identity", 1.0, loss_identity},
      {9, "determinism sweep", 300.0, determinism_sweep},
      {10, "chronological split property", 5.0, split_property},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) {
      o.require(false, "took " + fmt(secs, 2) + "s");
    }
    if (!o.pass) ++failures;
    std::printf("AC%-2d %s  %s: %s [%.2fs / %.0fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.limit_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
