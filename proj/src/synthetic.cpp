#include "recrefine/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>

#include "recrefine/error.hpp"
#include "recrefine/hashing.hpp"
#include "recrefine/log.hpp"
#include "recrefine/pipeline/commands.hpp"
#include "recrefine/replies.hpp"

namespace recrefine::synth {

namespace fs = std::filesystem;

namespace {

const std::vector<std::vector<std::string>> kTopics = {
    {"space", "rocket", "alien"},      {"romance", "wedding", "love"},
    {"crime", "detective", "heist"},   {"comedy", "prank", "satire"},
    {"war", "soldier", "battle"},      {"horror", "ghost", "haunted"},
    {"music", "band", "concert"},      {"sports", "stadium", "champion"},
};

const std::vector<std::string> kStudios = {"north", "south", "east", "west"};

std::string join_topic(std::size_t t) {
  const auto& w = kTopics[t];
  return w[0] + " " + w[1] + " " + w[2];
}

std::vector<std::string> item_ids_in(const std::string& text) {
  static const std::regex re(R"(Film #(\d+))");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

std::vector<std::size_t> random_other_topics(const std::vector<std::size_t>& avoid, std::size_t count,
                                             std::size_t n_topics, Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t t = 0; t < n_topics; ++t) {
    if (std::find(avoid.begin(), avoid.end(), t) == avoid.end()) pool.push_back(t);
  }
  rng.shuffle(pool);
  pool.resize(std::min(std::max<std::size_t>(count, 1), pool.size()));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

const std::vector<std::string>& topic_words(std::size_t t) { return kTopics.at(t); }

World make_world(const WorldConfig& cfg) {
  if (cfg.n_topics < 2 || cfg.n_topics > kTopics.size()) {
    throw ConfigError("n_topics must lie in [2, " + std::to_string(kTopics.size()) + "]");
  }
  if (cfg.liked_topics < 1 || cfg.liked_topics >= cfg.n_topics) {
    throw ConfigError("liked_topics must lie in [1, n_topics)");
  }
  if (cfg.interactions_per_user > cfg.n_items) throw ConfigError("more interactions than items");
  World w;
  w.cfg = cfg;
  Rng rng(cfg.seed);
  std::vector<std::string> items;
  for (std::size_t i = 1; i <= cfg.n_items; ++i) {
    const std::string id = std::to_string(i);
    items.push_back(id);
    w.item_topic[id] = static_cast<std::size_t>(rng.below(cfg.n_topics));
    w.catalog[id] = ItemMeta{id, "Film #" + id, {{"studio", kStudios[rng.below(kStudios.size())]}}};
  }
  std::vector<std::size_t> topics(cfg.n_topics);
  for (std::size_t t = 0; t < cfg.n_topics; ++t) topics[t] = t;
  for (std::size_t u = 1; u <= cfg.n_users; ++u) {
    const std::string uid = std::to_string(u);
    rng.shuffle(topics);
    std::vector<std::size_t> liked(topics.begin(), topics.begin() + static_cast<std::ptrdiff_t>(cfg.liked_topics));
    std::sort(liked.begin(), liked.end());
    w.user_topics[uid] = liked;
    std::vector<std::string> pick = items;
    rng.shuffle(pick);
    for (std::size_t k = 0; k < cfg.interactions_per_user; ++k) {
      const std::string& iid = pick[k];
      bool likes = std::binary_search(liked.begin(), liked.end(), w.item_topic[iid]);
      if (rng.uniform() < cfg.label_noise) likes = !likes;
      const int rating = likes ? 4 + static_cast<int>(rng.below(2)) : 1 + static_cast<int>(rng.below(3));
      const auto ts = static_cast<std::int64_t>(rng.below(100'000'000));
      w.interactions.push_back({uid, iid, rating, ts});
    }
  }
  return w;
}

void write_world(const World& world, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream inter(dir / "interactions.dat");
  for (const auto& x : world.interactions) {
    inter << x.user_id << "::" << x.item_id << "::" << x.rating << "::" << x.timestamp << "\n";
  }
  std::ofstream items(dir / "items.dat");
  for (const auto& [id, meta] : world.catalog) {
    items << id << "::" << meta.title << "::";
    for (std::size_t a = 0; a < meta.attributes.size(); ++a) {
      items << (a ? "|" : "") << meta.attributes[a].first << "=" << meta.attributes[a].second;
    }
    items << "\n";
  }
  if (!inter || !items) throw Error("failed writing synthetic world to " + dir.string());
}

std::string user_knowledge_text(const std::vector<std::size_t>& topics) {
  if (topics.empty()) return "The user has not shown a clear preference yet.";
  std::string text = "The user enjoys ";
  for (std::size_t k = 0; k < topics.size(); ++k) {
    if (k > 0) text += " and ";
    text += join_topic(topics[k]) + " stories";
  }
  return text + ".";
}

std::string item_knowledge_text(std::size_t topic) {
  return "This film is about " + join_topic(topic) + " themes.";
}

std::vector<std::size_t> Simulator::user_truth(const std::string& hist_text) const {
  static const std::regex line(R"(Film #(\d+)[^\n]*\(rated (\d)/5\))");
  std::vector<std::size_t> counts(world_->cfg.n_topics, 0);
  for (auto it = std::sregex_iterator(hist_text.begin(), hist_text.end(), line);
       it != std::sregex_iterator(); ++it) {
    if (std::stoi((*it)[2].str()) >= 4) ++counts[world_->item_topic.at((*it)[1].str())];
  }
  std::vector<std::size_t> order(counts.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return counts[a] > counts[b]; });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < world_->cfg.liked_topics && counts[order[k]] > 0; ++k) out.push_back(order[k]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Simulator::topics_in(const std::string& text) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < world_->cfg.n_topics; ++t) {
    if (text.find(kTopics[t][0] + " ") != std::string::npos) out.push_back(t);
  }
  return out;
}

double Simulator::draw(const CompletionRequest& req, std::string_view salt) const {
  std::string key(to_string(req.template_id));
  key += '\x1f';
  key += slot_fingerprint(req.slots);
  key += '\x1f';
  key += req.sample_index ? std::to_string(*req.sample_index) : "-";
  key += '\x1f';
  key += salt;
  return static_cast<double>(seeded_hash(key, cfg_.seed) >> 11) * 0x1.0p-53;
}

std::vector<std::size_t> Simulator::truth(const CompletionRequest& req) const {
  const bool user = req.template_id == TemplateId::user_reason || req.template_id == TemplateId::user_reflect ||
                    req.template_id == TemplateId::user_refine;
  if (user) return user_truth(req.slots.at("hist"));
  const auto ids = item_ids_in(req.slots.at("item"));
  if (ids.empty()) throw Error("simulated model cannot identify the item");
  return {world_->item_topic.at(ids.front())};
}

std::string Simulator::knowledge_for(const CompletionRequest& req, double error_rate) const {
  const bool user = req.template_id == TemplateId::user_reason || req.template_id == TemplateId::user_refine;
  auto topics = truth(req);
  if (draw(req, "error") < error_rate) {
    Rng rng(seeded_hash(slot_fingerprint(req.slots) + std::to_string(req.sample_index.value_or(-1)), cfg_.seed));
    topics = random_other_topics(topics, user ? world_->cfg.liked_topics : 1, world_->cfg.n_topics, rng);
  }
  return user ? user_knowledge_text(topics) : item_knowledge_text(topics.front());
}

std::string Simulator::actor(const CompletionRequest& req) const {
  const bool refine = req.template_id == TemplateId::user_refine || req.template_id == TemplateId::item_refine;
  const std::string knowledge = knowledge_for(req, refine ? cfg_.refined_error : cfg_.initial_error);
  const bool user = req.template_id == TemplateId::user_reason || req.template_id == TemplateId::user_refine;
  // Construction prompts also carry the target (item for users, user history for items).
  const bool construction = user ? req.slots.count("item") > 0 : req.slots.count("hist") > 0;
  if (!construction) return format_knowledge(knowledge);

  bool yes = false;
  const auto named = topics_in(knowledge);
  if (user) {
    const auto ids = item_ids_in(req.slots.at("item"));
    const std::size_t target_topic = world_->item_topic.at(ids.front());
    yes = std::find(named.begin(), named.end(), target_topic) != named.end();
  } else {
    const auto liked = user_truth(req.slots.at("hist"));
    yes = !named.empty() && std::find(liked.begin(), liked.end(), named.front()) != liked.end();
  }
  return format_reason({knowledge, yes ? 1 : 0});
}

std::string Simulator::reflector(const CompletionRequest& req) const {
  const bool correct = topics_in(req.slots.at("knowledge")) == truth(req);
  const double u = draw(req, "verdict");
  const bool approve = correct ? u >= cfg_.false_reject : u < cfg_.miss;
  return approve ? reflect_target(Verdict::reasonable, "")
                 : reflect_target(Verdict::unreasonable,
                                  "The description does not match the evidence. Look again at which "
                                  "themes were rated highly and which were rated poorly.");
}

pipeline::BackendSet Simulator::backends() const {
  auto actor = std::make_shared<CallbackBackend>([this](const CompletionRequest& r) { return this->actor(r); });
  auto reflector =
      std::make_shared<CallbackBackend>([this](const CompletionRequest& r) { return this->reflector(r); });
  return {{actor, reflector}, {actor, reflector}};
}

fs::path write_demo(const fs::path& dir, const DemoOptions& opts) {
  const World world = make_world(opts.world);
  write_world(world, dir / "data");
  const std::vector<std::string> roles = pipeline::kRoles;
  for (const auto& role : roles) write_jsonl(dir / "oracles" / (role + ".jsonl"), {});

  json config = {
      {"dataset", {{"kind", "movielens"}, {"interactions", "data/interactions.dat"}, {"items", "data/items.dat"}}},
      {"split", {{"train_fraction", 0.8}}},
      {"builder", {{"passes", 1}, {"n_pos", 3}, {"n_neg", 3}, {"max_hist", 15}}},
      {"templates",
       {{"construction", fs::absolute(opts.templates_dir / "construction").string()},
        {"inference", fs::absolute(opts.templates_dir / "inference").string()}}},
      {"backends", json::object()},
      {"strategy", {{"name", opts.strategy}, {"max_retries", opts.max_retries}, {"k", 3}, {"temperature", 0.7}}},
      {"encoder", {{"kind", "hash"}, {"dims", 64}, {"normalize", true}}},
      {"ctr", {{"emb_dim", 8}, {"hidden", {32, 16}}, {"epochs", opts.epochs}, {"learning_rate", 0.3},
               {"batch_size", 32}, {"attribute_fields", {"studio"}}}},
      {"output_dir", "out"},
      {"seed", 0}};
  for (const auto& role : roles) config["backends"][role] = {{"scripted", "oracles/" + role + ".jsonl"}};
  const fs::path config_path = dir / "config.json";
  write_json_file(config_path, config);

  pipeline::Overrides o;
  o.out = dir / ".record";
  const auto cfg = pipeline::load_config(config_path, o);
  const Simulator sim(world, opts.oracle);
  const auto live = sim.backends();
  const auto rec = [](BackendPtr inner) { return std::make_shared<RecordingBackend>(std::move(inner)); };
  const auto ua = rec(live.user.actor), ur = rec(live.user.reflector);
  const auto ia = rec(live.item.actor), ir = rec(live.item.reflector);
  const pipeline::BackendSet recording{{ua, ur}, {ia, ir}};
  EventLog quiet;
  if (pipeline::cmd_build(cfg, quiet, &recording) != 0) throw Error("demo build did not finish");
  pipeline::cmd_infer(cfg, quiet, &recording);
  write_jsonl(dir / "oracles" / "user_actor.jsonl", ua->entries());
  write_jsonl(dir / "oracles" / "user_reflector.jsonl", ur->entries());
  write_jsonl(dir / "oracles" / "item_actor.jsonl", ia->entries());
  write_jsonl(dir / "oracles" / "item_reflector.jsonl", ir->entries());
  fs::remove_all(dir / ".record");
  return config_path;
}

}  // namespace recrefine::synth
