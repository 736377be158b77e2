#include <CLI11.hpp>

#include <iostream>

#include "recrefine/error.hpp"
#include "recrefine/log.hpp"
#include "recrefine/pipeline/commands.hpp"

namespace {

using namespace recrefine;
using namespace recrefine::pipeline;

struct Args {
  std::string config;
  std::optional<std::int64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Args& args) {
  sub->add_option("--config", args.config, "pipeline config file (JSON, comments allowed)")->required();
  sub->add_option("--seed", args.seed, "global seed (overrides config)");
  sub->add_option("--workers", args.workers, "parallel workers (overrides config)");
  sub->add_option("--out", args.out, "output directory (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reason, reflect and refine knowledge for CTR models"};
  app.require_subcommand(1);
  Args args;
  using Command = std::function<int(const PipelineConfig&, EventLog&)>;
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"build", "construct reason/reflect/refine datasets",
       [](const PipelineConfig& c, EventLog& l) { return cmd_build(c, l); }},
      {"export", "write fine-tuning pairs and reference losses", &cmd_export},
      {"infer", "generate, judge and encode knowledge for every user and item",
       [](const PipelineConfig& c, EventLog& l) { return cmd_infer(c, l); }},
      {"train", "train base and knowledge-fused CTR models", &cmd_train},
      {"eval", "evaluate both models on the test split", &cmd_eval},
  };
  for (const auto& [name, help, fn] : commands) add_common(app.add_subcommand(name, help), args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  EventLog log(&std::cerr);
  const std::string name = app.get_subcommands().front()->get_name();
  Command fn = nullptr;
  for (const auto& [n, help, f] : commands) {
    if (n == name) fn = f;
  }

  PipelineConfig cfg;
  try {
    Overrides o{args.seed, args.workers, args.out ? std::optional<fs::path>(*args.out) : std::nullopt};
    cfg = load_config(args.config, o);
  } catch (const std::exception& e) {
    log.emit("config.error", {{"command", name}, {"error", e.what()}});
    return 2;
  }

  log.emit("command.start", {{"command", name}, {"seed", cfg.seed}, {"out", cfg.output_dir.string()}});
  try {
    const int code = fn(cfg, log);
    log.emit("command.end", {{"command", name}, {"exit", code}});
    return code;
  } catch (const ConfigError& e) {
    log.emit("config.error", {{"command", name}, {"error", e.what()}});
    return 2;
  } catch (const TemplateError& e) {
    log.emit("config.error", {{"command", name}, {"error", e.what()}});
    return 2;
  } catch (const ValidationError& e) {
    log.emit("validation.error", {{"command", name}, {"error", e.what()}});
    return 2;
  } catch (const std::exception& e) {
    log.emit("runtime.error", {{"command", name}, {"error", e.what()}});
    return 1;
  }
}
