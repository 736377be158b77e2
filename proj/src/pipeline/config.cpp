#include "recrefine/pipeline/config.hpp"

#include <set>

#include "recrefine/error.hpp"
#include "recrefine/prompt.hpp"

namespace recrefine::pipeline {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + section);
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& section) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for " + section + "." + key);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

RetryPolicy parse_retry(const json& j, const std::string& section) {
  RetryPolicy r;
  if (!j.contains("retry")) return r;
  const json& rj = j.at("retry");
  check_keys(rj, {"max_attempts", "initial_backoff_ms", "timeout_ms"}, section + ".retry");
  r.max_attempts = get_or(rj, "max_attempts", r.max_attempts, section + ".retry");
  r.initial_backoff = std::chrono::milliseconds(
      get_or<long>(rj, "initial_backoff_ms", r.initial_backoff.count(), section + ".retry"));
  r.timeout = std::chrono::milliseconds(get_or<long>(rj, "timeout_ms", r.timeout.count(), section + ".retry"));
  if (r.max_attempts < 1) throw ConfigError(section + ".retry.max_attempts must be >= 1");
  return r;
}

BackendSpec parse_backend(const json& j, const fs::path& base, const std::string& role) {
  const std::string section = "backends." + role;
  check_keys(j, {"scripted", "endpoint", "model", "api_key_env", "system_prompt", "retry", "max_in_flight"},
             section);
  BackendSpec spec;
  const bool scripted = j.contains("scripted");
  const bool http = j.contains("endpoint");
  if (scripted == http) {
    throw ConfigError(section + " needs exactly one of 'scripted' or 'endpoint'");
  }
  if (scripted) {
    spec.scripted = resolve(base, get_or<std::string>(j, "scripted", "", section));
    if (!fs::exists(*spec.scripted)) {
      throw ConfigError(section + ": scripted oracle file not found: " + spec.scripted->string());
    }
    return spec;
  }
  HttpBackendConfig h;
  h.endpoint = get_or<std::string>(j, "endpoint", "", section);
  h.model = get_or<std::string>(j, "model", "", section);
  h.api_key_env = get_or<std::string>(j, "api_key_env", "", section);
  h.system_prompt = get_or<std::string>(j, "system_prompt", "", section);
  h.retry = parse_retry(j, section);
  h.max_in_flight = get_or(j, "max_in_flight", h.max_in_flight, section);
  if (h.model.empty()) throw ConfigError(section + ".model is required with an endpoint");
  if (h.max_in_flight < 1 || h.max_in_flight > 1024) {
    throw ConfigError(section + ".max_in_flight must lie in [1, 1024]");
  }
  spec.http = std::move(h);
  return spec;
}

void check_templates(const fs::path& dir, PromptStage stage, const std::string& section) {
  if (!fs::is_directory(dir)) throw ConfigError(section + ": template directory not found: " + dir.string());
  try {
    TemplateSet::load(dir, stage);
  } catch (const TemplateError& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

}  // namespace

PipelineConfig parse_config(const json& j, const fs::path& base_dir, const Overrides& overrides) {
  check_keys(j, {"dataset", "split", "builder", "templates", "backends", "strategy", "encoder", "ctr",
                 "output_dir", "seed", "workers"},
             "config");
  PipelineConfig c;

  if (!j.contains("dataset")) throw ConfigError("config.dataset is required");
  const json& d = j.at("dataset");
  check_keys(d, {"kind", "interactions", "items", "delimiter", "has_header", "item_delimiter",
                 "attribute_separator", "default_attribute_key", "amazon_positive_min"},
             "dataset");
  c.kind = parse_dataset_kind(get_or<std::string>(d, "kind", "movielens", "dataset"));
  if (!d.contains("interactions") || !d.contains("items")) {
    throw ConfigError("dataset.interactions and dataset.items are required");
  }
  c.interactions = resolve(base_dir, d.at("interactions").get<std::string>());
  c.items = resolve(base_dir, d.at("items").get<std::string>());
  c.log_format.delimiter = get_or(d, "delimiter", c.log_format.delimiter, "dataset");
  c.log_format.has_header = get_or(d, "has_header", c.log_format.has_header, "dataset");
  c.item_format.delimiter = get_or(d, "item_delimiter", c.log_format.delimiter, "dataset");
  c.item_format.attribute_separator =
      get_or(d, "attribute_separator", c.item_format.attribute_separator, "dataset");
  c.item_format.default_attribute_key =
      get_or(d, "default_attribute_key", c.item_format.default_attribute_key, "dataset");
  c.amazon_positive_min = get_or(d, "amazon_positive_min", c.amazon_positive_min, "dataset");
  for (const auto& p : {c.interactions, c.items}) {
    if (!fs::exists(p)) throw ConfigError("dataset file not found: " + p.string());
  }

  if (j.contains("split")) {
    check_keys(j.at("split"), {"train_fraction"}, "split");
    c.split.train_fraction = get_or(j.at("split"), "train_fraction", c.split.train_fraction, "split");
  }
  if (!(c.split.train_fraction > 0.0 && c.split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  }

  if (j.contains("builder")) {
    const json& b = j.at("builder");
    check_keys(b, {"passes", "n_pos", "n_neg", "max_hist", "targets_per_user", "targets_per_item"}, "builder");
    c.builder.passes = get_or(b, "passes", c.builder.passes, "builder");
    c.builder.n_pos = get_or(b, "n_pos", c.builder.n_pos, "builder");
    c.builder.n_neg = get_or(b, "n_neg", c.builder.n_neg, "builder");
    c.builder.max_hist = get_or(b, "max_hist", c.builder.max_hist, "builder");
    c.builder.targets_per_user = get_or(b, "targets_per_user", c.builder.targets_per_user, "builder");
    c.builder.targets_per_item = get_or(b, "targets_per_item", c.builder.targets_per_item, "builder");
  }
  if (c.builder.passes < 1) throw ConfigError("builder.passes must be >= 1");
  if (c.builder.max_hist < 1) throw ConfigError("builder.max_hist must be >= 1");

  if (!j.contains("templates")) throw ConfigError("config.templates is required");
  const json& t = j.at("templates");
  check_keys(t, {"construction", "inference"}, "templates");
  if (!t.contains("construction") || !t.contains("inference")) {
    throw ConfigError("templates.construction and templates.inference are required");
  }
  c.construction_templates = resolve(base_dir, t.at("construction").get<std::string>());
  c.inference_templates = resolve(base_dir, t.at("inference").get<std::string>());
  check_templates(c.construction_templates, PromptStage::construction, "templates.construction");
  check_templates(c.inference_templates, PromptStage::inference, "templates.inference");

  if (!j.contains("backends")) throw ConfigError("config.backends is required");
  const json& bk = j.at("backends");
  check_keys(bk, {kRoles.begin(), kRoles.end()}, "backends");
  for (const auto& role : kRoles) {
    if (!bk.contains(role)) throw ConfigError("backends." + role + " is required");
    c.backends[role] = parse_backend(bk.at(role), base_dir, role);
  }

  if (j.contains("strategy")) {
    const json& s = j.at("strategy");
    check_keys(s, {"name", "max_retries", "k", "temperature"}, "strategy");
    c.strategy.name = parse_strategy(get_or<std::string>(s, "name", "iterative", "strategy"));
    c.strategy.max_retries = get_or(s, "max_retries", c.strategy.max_retries, "strategy");
    c.strategy.k = get_or(s, "k", c.strategy.k, "strategy");
    c.strategy.temperature = get_or(s, "temperature", c.strategy.temperature, "strategy");
  }
  if (c.strategy.k < 1) throw ConfigError("strategy.k must be >= 1");
  if (c.strategy.name == Strategy::filter && !(c.strategy.temperature > 0.0)) {
    throw ConfigError("strategy.temperature must be > 0 for the filter strategy");
  }

  if (j.contains("encoder")) {
    const json& e = j.at("encoder");
    check_keys(e, {"kind", "dims", "normalize", "endpoint", "batch_size", "model", "retry"}, "encoder");
    c.encoder.kind = get_or<std::string>(e, "kind", "hash", "encoder");
    if (c.encoder.kind == "hash") {
      c.encoder.hash.dims = get_or(e, "dims", c.encoder.hash.dims, "encoder");
      c.encoder.hash.normalize = get_or(e, "normalize", c.encoder.hash.normalize, "encoder");
    } else if (c.encoder.kind == "remote") {
      c.encoder.remote.endpoint = get_or<std::string>(e, "endpoint", "", "encoder");
      c.encoder.remote.dims = get_or<std::size_t>(e, "dims", 0, "encoder");
      c.encoder.remote.batch_size = get_or(e, "batch_size", c.encoder.remote.batch_size, "encoder");
      c.encoder.remote.model = get_or<std::string>(e, "model", "", "encoder");
      c.encoder.remote.retry = parse_retry(e, "encoder");
      if (c.encoder.remote.endpoint.empty()) throw ConfigError("encoder.endpoint is required for kind=remote");
      if (c.encoder.remote.batch_size < 1) throw ConfigError("encoder.batch_size must be >= 1");
    } else {
      throw ConfigError("encoder.kind must be hash or remote");
    }
  }
  const std::size_t dims = c.encoder.kind == "hash" ? c.encoder.hash.dims : c.encoder.remote.dims;
  if (dims < 1) throw ConfigError("encoder.dims must be >= 1");

  if (j.contains("ctr")) {
    json ctr = j.at("ctr");
    check_keys(ctr, {"emb_dim", "hidden", "connector_hidden", "backbone", "learning_rate", "epochs",
                     "batch_size", "clamp_eps", "attribute_fields"},
               "ctr");
    if (ctr.contains("attribute_fields")) {
      c.attribute_fields = get_or<std::vector<std::string>>(ctr, "attribute_fields", {}, "ctr");
      ctr.erase("attribute_fields");
    }
    try {
      c.ctr = ctr::train_config_from_json(ctr);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("ctr: ") + e.what());
    }
  }

  c.output_dir = resolve(base_dir, get_or<std::string>(j, "output_dir", "out", "config"));
  c.seed = get_or<std::int64_t>(j, "seed", 0, "config");
  c.workers = get_or<std::size_t>(j, "workers", 1, "config");

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.workers) c.workers = *overrides.workers;
  if (overrides.out) c.output_dir = *overrides.out;
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  c.ctr.seed = static_cast<std::uint64_t>(c.seed);
  return c;
}

PipelineConfig load_config(const fs::path& path, const Overrides& overrides) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = read_json_file(path, true);
  } catch (const std::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  PipelineConfig c = parse_config(j, path.parent_path(), overrides);
  c.source = path;
  return c;
}

json describe(const PipelineConfig& c) {
  json backends = json::object();
  for (const auto& [role, spec] : c.backends) {
    if (spec.scripted) {
      backends[role] = {{"scripted", spec.scripted->filename().string()}};
    } else {
      backends[role] = {{"endpoint", spec.http->endpoint}, {"model", spec.http->model}};
    }
  }
  json encoder = {{"kind", c.encoder.kind}};
  if (c.encoder.kind == "hash") {
    encoder["dims"] = c.encoder.hash.dims;
    encoder["normalize"] = c.encoder.hash.normalize;
  } else {
    encoder["endpoint"] = c.encoder.remote.endpoint;
    encoder["dims"] = c.encoder.remote.dims;
  }
  return {{"dataset_kind", to_string(c.kind)},
          {"train_fraction", c.split.train_fraction},
          {"builder",
           {{"passes", c.builder.passes},
            {"n_pos", c.builder.n_pos},
            {"n_neg", c.builder.n_neg},
            {"max_hist", c.builder.max_hist},
            {"targets_per_user", c.builder.targets_per_user},
            {"targets_per_item", c.builder.targets_per_item}}},
          {"backends", backends},
          {"strategy",
           {{"name", to_string(c.strategy.name)},
            {"max_retries", c.strategy.max_retries},
            {"k", c.strategy.k},
            {"temperature", c.strategy.temperature}}},
          {"encoder", encoder},
          {"ctr", ctr::to_json(c.ctr)},
          {"seed", c.seed}};
}

BackendSet make_backends(const PipelineConfig& cfg) {
  std::map<fs::path, BackendPtr> scripted;
  const auto make = [&](const std::string& role) -> BackendPtr {
    const BackendSpec& spec = cfg.backends.at(role);
    if (spec.scripted) {
      auto& slot = scripted[*spec.scripted];
      if (!slot) slot = std::make_shared<ScriptedBackend>(ScriptedBackend::load(*spec.scripted));
      return slot;
    }
    return std::make_shared<HttpBackend>(*spec.http);
  };
  return {{make("user_actor"), make("user_reflector")}, {make("item_actor"), make("item_reflector")}};
}

std::unique_ptr<TextEncoder> make_encoder(const PipelineConfig& cfg) {
  if (cfg.encoder.kind == "remote") return std::make_unique<RemoteEncoder>(cfg.encoder.remote);
  return std::make_unique<HashEncoder>(cfg.encoder.hash);
}

}  // namespace recrefine::pipeline
