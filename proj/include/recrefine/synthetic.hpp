#pragma once

// A small simulated world for demos and end-to-end checks: items carry a
// hidden topic, users like a hidden set of topics, and ratings follow topic
// match. Simulated actor and reflector models read the prompt slots, recover
// what a well-read model would know about the titles, and make mistakes at
// configurable rates.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "recrefine/backend.hpp"
#include "recrefine/ingest.hpp"
#include "recrefine/pipeline/config.hpp"

namespace recrefine::synth {

struct WorldConfig {
  std::size_t n_users = 1000;
  std::size_t n_items = 300;
  std::size_t n_topics = 6;
  std::size_t liked_topics = 2;
  std::size_t interactions_per_user = 25;
  /// Probability that a rating contradicts the topic match.
  double label_noise = 0.1;
  std::uint64_t seed = 7;
};

struct World {
  WorldConfig cfg;
  std::vector<Interaction> interactions;
  Catalog catalog;
  std::map<std::string, std::size_t> item_topic;
  std::map<std::string, std::vector<std::size_t>> user_topics;
};

World make_world(const WorldConfig& cfg);

/// The descriptive words used for topic t in knowledge text.
const std::vector<std::string>& topic_words(std::size_t t);

/// Writes interactions.dat and items.dat in the '::'-delimited log format.
void write_world(const World& world, const std::filesystem::path& dir);

struct OracleConfig {
  /// Chance that first-draft knowledge names the wrong topics.
  double initial_error = 0.5;
  /// Chance that refined knowledge is still wrong.
  double refined_error = 0.2;
  /// Chance the reflector rejects correct knowledge.
  double false_reject = 0.1;
  /// Chance the reflector approves wrong knowledge.
  double miss = 0.2;
  std::uint64_t seed = 11;
};

/// Replies are pure functions of (template, slots, sample index, seed).
class Simulator {
 public:
  Simulator(const World& world, OracleConfig cfg) : world_(&world), cfg_(cfg) {}

  std::string actor(const CompletionRequest& req) const;
  std::string reflector(const CompletionRequest& req) const;

  pipeline::BackendSet backends() const;

  /// Topics the knowledge should name for a user with this rendered history.
  std::vector<std::size_t> user_truth(const std::string& hist_text) const;
  /// Topics named in a knowledge text.
  std::vector<std::size_t> topics_in(const std::string& text) const;

 private:
  std::string knowledge_for(const CompletionRequest& req, double error_rate) const;
  std::vector<std::size_t> truth(const CompletionRequest& req) const;
  double draw(const CompletionRequest& req, std::string_view salt) const;

  const World* world_;
  OracleConfig cfg_;
};

std::string user_knowledge_text(const std::vector<std::size_t>& topics);
std::string item_knowledge_text(std::size_t topic);

struct DemoOptions {
  WorldConfig world;
  OracleConfig oracle;
  std::filesystem::path templates_dir;
  std::string strategy = "iterative";
  std::size_t max_retries = 1;
  std::size_t epochs = 20;
};

/// Writes a self-contained bundle: data files, scripted oracle files recorded
/// from the simulator for exactly the prompts `build` and `infer` will issue,
/// and config.json pointing at them. Returns the config path.
std::filesystem::path write_demo(const std::filesystem::path& dir, const DemoOptions& opts);

}  // namespace recrefine::synth
