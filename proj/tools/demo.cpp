// Writes a synthetic dataset, recorded scripted oracles and a config that
// runs the whole pipeline offline.
#include <CLI11.hpp>

#include <iostream>

#include "recrefine/synthetic.hpp"

#ifndef RECREFINE_TEMPLATES_DIR
#define RECREFINE_TEMPLATES_DIR "templates"
#endif

int main(int argc, char** argv) {
  CLI::App app{"Generate an offline demo bundle"};
  recrefine::synth::DemoOptions opts;
  opts.templates_dir = RECREFINE_TEMPLATES_DIR;
  opts.world.n_users = 200;
  opts.world.n_items = 80;
  opts.world.interactions_per_user = 20;
  std::string out;
  std::string templates = opts.templates_dir.string();
  app.add_option("--out", out, "bundle directory")->required();
  app.add_option("--templates", templates, "template root with construction/ and inference/")
      ->capture_default_str();
  app.add_option("--users", opts.world.n_users)->capture_default_str();
  app.add_option("--items", opts.world.n_items)->capture_default_str();
  app.add_option("--interactions-per-user", opts.world.interactions_per_user)->capture_default_str();
  app.add_option("--seed", opts.world.seed)->capture_default_str();
  app.add_option("--strategy", opts.strategy)->check(CLI::IsMember({"iterative", "filter"}))->capture_default_str();
  app.add_option("--max-retries", opts.max_retries)->capture_default_str();
  app.add_option("--epochs", opts.epochs)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  opts.templates_dir = templates;
  try {
    std::cout << recrefine::synth::write_demo(out, opts).string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
