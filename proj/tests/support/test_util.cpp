#include "test_util.hpp"

#include <random>

#include "recrefine/jsonl.hpp"

namespace recrefine::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          ("recrefine-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

PromptTemplate minimal_template(TemplateId id, PromptStage stage) {
  std::string body = std::string(to_string(id)) + "\n";
  for (const auto& name : placeholders_for(id, stage)) body += name + ": {" + name + "}\n";
  return {id, stage, body};
}

TemplateSet minimal_templates(PromptStage stage) {
  TemplateSet set(stage);
  for (auto id : kAllTemplateIds) set.set(minimal_template(id, stage));
  return set;
}

void write_minimal_templates(const fs::path& dir, PromptStage stage) {
  for (auto id : kAllTemplateIds) {
    write_text_file(dir / (std::string(to_string(id)) + ".txt"), minimal_template(id, stage).body);
  }
}

fs::path source_dir() { return RECREFINE_SOURCE_DIR; }

}  // namespace recrefine::testing
