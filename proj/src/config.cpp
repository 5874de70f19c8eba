#include "groundgap/config.hpp"

#include <set>
#include <sstream>

#include <fmt/format.h>
#include <toml.hpp>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"

namespace groundgap {

namespace fs = std::filesystem;

fs::path data_dir() {
  if (const char* env = std::getenv("GROUNDGAP_DATA_DIR"); env && *env) return env;
  return GROUNDGAP_DATA_DIR;
}

namespace {

struct Reader {
  const std::string& origin;
  const fs::path& base;

  void check_keys(const toml::table& t, std::string_view section, const std::set<std::string_view>& allowed) const {
    for (const auto& [key, _] : t) {
      if (!allowed.contains(key.str())) {
        throw ConfigError(fmt::format("{}: unknown key \"{}\" in {}", origin, key.str(), section));
      }
    }
  }

  template <typename T>
  std::optional<T> get(const toml::table& t, std::string_view key, std::string_view section) const {
    const auto* node = t.get(key);
    if (!node) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) return *v;  // accepts integers too
    } else {
      if (auto v = node->value_exact<T>()) return *v;
    }
    throw ConfigError(fmt::format("{}: {}.{} has the wrong type", origin, section, key));
  }

  std::optional<fs::path> path(const toml::table& t, std::string_view key, std::string_view section) const {
    auto s = get<std::string>(t, key, section);
    if (!s) return std::nullopt;
    fs::path p(*s);
    return p.is_absolute() ? p : (base / p).lexically_normal();
  }

  const toml::table* table(const toml::table& root, std::string_view key) const {
    const auto* node = root.get(key);
    if (!node) return nullptr;
    if (const auto* t = node->as_table()) return t;
    throw ConfigError(fmt::format("{}: [{}] must be a table", origin, key));
  }

  std::vector<const toml::table*> array_of_tables(const toml::table& root, std::string_view key) const {
    std::vector<const toml::table*> out;
    const auto* node = root.get(key);
    if (!node) return out;
    const auto* arr = node->as_array();
    if (!arr) throw ConfigError(fmt::format("{}: {} must be written as [[{}]] tables", origin, key, key));
    for (const auto& item : *arr) {
      const auto* t = item.as_table();
      if (!t) throw ConfigError(fmt::format("{}: {} must be written as [[{}]] tables", origin, key, key));
      out.push_back(t);
    }
    return out;
  }
};

toml::table parse_toml(std::string_view text, const std::string& origin) {
  try {
    return toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError(fmt::format("{}:{}:{}: {}", origin, where.line, where.column, e.description()));
  }
}

std::vector<Checkpoint> read_checkpoints(const Reader& r, const toml::table& root) {
  std::vector<Checkpoint> out;
  for (const auto* t : r.array_of_tables(root, "checkpoint")) {
    r.check_keys(*t, "[[checkpoint]]", {"step", "backend", "model"});
    Checkpoint c;
    auto step = r.get<std::int64_t>(*t, "step", "checkpoint");
    auto backend = r.get<std::string>(*t, "backend", "checkpoint");
    if (!step || !backend) throw ConfigError(fmt::format("{}: every [[checkpoint]] needs step and backend", r.origin));
    c.step = *step;
    c.backend = *backend;
    c.model = r.get<std::string>(*t, "model", "checkpoint").value_or("");
    out.push_back(std::move(c));
  }
  return out;
}

BackendKind backend_kind(const std::string& name, const std::string& origin) {
  if (name == "mock") return BackendKind::mock;
  if (name == "openai-compatible") return BackendKind::openai_compatible;
  throw ConfigError(fmt::format("{}: unknown backend kind \"{}\" (mock, openai-compatible)", origin, name));
}

}  // namespace

Config parse_config(std::string_view text, const fs::path& base_dir, const std::string& origin) {
  const auto root = parse_toml(text, origin);
  const Reader r{origin, base_dir};
  r.check_keys(root, "the top level",
               {"dataset", "seed", "backend", "cache", "classifier", "simulation", "checkpoint"});

  Config cfg;
  cfg.source = origin;
  cfg.dataset = r.get<std::string>(root, "dataset", "top level").value_or("");
  if (auto seed = r.get<std::int64_t>(root, "seed", "top level")) {
    if (*seed < 0) throw ConfigError(fmt::format("{}: seed must be non-negative", origin));
    cfg.seed = static_cast<std::uint64_t>(*seed);
  }

  std::set<std::string> ids;
  for (const auto* t : r.array_of_tables(root, "backend")) {
    r.check_keys(*t, "[[backend]]",
                 {"id", "kind", "endpoint", "auth_env", "model", "fixture", "fallback_responses", "timeout_seconds"});
    BackendSpec b;
    b.id = r.get<std::string>(*t, "id", "backend").value_or("");
    if (b.id.empty()) throw ConfigError(fmt::format("{}: every [[backend]] needs an id", origin));
    if (!ids.insert(b.id).second) throw ConfigError(fmt::format("{}: duplicate backend id \"{}\"", origin, b.id));
    b.kind = backend_kind(r.get<std::string>(*t, "kind", "backend").value_or("mock"), origin);
    b.endpoint = r.get<std::string>(*t, "endpoint", "backend").value_or("");
    b.auth_env = r.get<std::string>(*t, "auth_env", "backend").value_or("");
    b.model = r.get<std::string>(*t, "model", "backend").value_or("");
    if (auto p = r.path(*t, "fixture", "backend")) b.fixture = *p;
    b.timeout_seconds = r.get<double>(*t, "timeout_seconds", "backend").value_or(b.timeout_seconds);
    if (const auto* node = t->get("fallback_responses")) {
      const auto* arr = node->as_array();
      if (!arr) throw ConfigError(fmt::format("{}: backend.fallback_responses must be an array", origin));
      for (const auto& item : *arr) {
        auto s = item.value<std::string>();
        if (!s) throw ConfigError(fmt::format("{}: backend.fallback_responses must hold strings", origin));
        b.fallback_responses.push_back(*s);
      }
    }
    if (b.kind == BackendKind::openai_compatible && b.endpoint.empty()) {
      throw ConfigError(fmt::format("{}: backend \"{}\" needs an endpoint", origin, b.id));
    }
    cfg.backends.push_back(std::move(b));
  }

  if (const auto* t = r.table(root, "cache")) {
    r.check_keys(*t, "[cache]", {"dir", "max_in_flight"});
    cfg.cache_dir = r.path(*t, "dir", "cache");
    if (auto n = r.get<std::int64_t>(*t, "max_in_flight", "cache")) {
      if (*n < 1) throw ConfigError(fmt::format("{}: cache.max_in_flight must be at least 1", origin));
      cfg.max_in_flight = static_cast<int>(*n);
    }
  }

  auto& cl = cfg.classifier;
  cl.templates_dir = data_dir() / "templates";
  cl.exemplars = data_dir() / "exemplars" / "default.jsonl";
  if (const auto* t = r.table(root, "classifier")) {
    r.check_keys(*t, "[classifier]",
                 {"mode", "template", "templates_dir", "exemplars", "backend", "model", "max_tokens",
                  "ack_rule_prefilter", "lexicon"});
    if (auto mode = r.get<std::string>(*t, "mode", "classifier")) cl.mode = classifier_mode_from_string(*mode);
    cl.template_name = r.get<std::string>(*t, "template", "classifier").value_or("");
    if (auto p = r.path(*t, "templates_dir", "classifier")) cl.templates_dir = *p;
    if (auto p = r.path(*t, "exemplars", "classifier")) cl.exemplars = *p;
    cl.backend = r.get<std::string>(*t, "backend", "classifier").value_or("");
    cl.model = r.get<std::string>(*t, "model", "classifier").value_or("");
    cl.max_tokens = static_cast<int>(r.get<std::int64_t>(*t, "max_tokens", "classifier").value_or(cl.max_tokens));
    cl.ack_rule_prefilter = r.get<bool>(*t, "ack_rule_prefilter", "classifier").value_or(false);
    cl.lexicon = r.path(*t, "lexicon", "classifier");
  }
  if (cl.template_name.empty()) {
    cl.template_name = cl.mode == ClassifierMode::zero_shot ? "classify-zeroshot-v1" : "classify-v1";
  }

  auto& sim = cfg.simulation;
  sim.mitigation_file = data_dir() / "mitigation.txt";
  if (const auto* t = r.table(root, "simulation")) {
    r.check_keys(*t, "[simulation]",
                 {"backend", "model", "instruction", "mitigation_file", "temperature", "max_tokens", "tag"});
    sim.backend = r.get<std::string>(*t, "backend", "simulation").value_or("");
    sim.model = r.get<std::string>(*t, "model", "simulation").value_or("");
    sim.instruction = r.get<std::string>(*t, "instruction", "simulation").value_or("");
    if (auto p = r.path(*t, "mitigation_file", "simulation")) sim.mitigation_file = *p;
    sim.temperature = r.get<double>(*t, "temperature", "simulation").value_or(sim.temperature);
    sim.max_tokens = static_cast<int>(r.get<std::int64_t>(*t, "max_tokens", "simulation").value_or(sim.max_tokens));
    sim.tag = r.get<std::string>(*t, "tag", "simulation").value_or("");
  }

  cfg.checkpoints = read_checkpoints(r, root);

  for (const auto* id : {&cl.backend, &sim.backend}) {
    if (!id->empty() && !ids.contains(*id)) {
      throw ConfigError(fmt::format("{}: backend \"{}\" is not defined", origin, *id));
    }
  }
  for (const auto& c : cfg.checkpoints) {
    if (!ids.contains(c.backend)) {
      throw ConfigError(fmt::format("{}: checkpoint {} uses undefined backend \"{}\"", origin, c.step, c.backend));
    }
  }
  return cfg;
}

Config load_config(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path(), path.string());
}

std::vector<Checkpoint> load_checkpoints(const fs::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto origin = path.string();
  const auto root = parse_toml(text, origin);
  const auto base = path.parent_path();
  const Reader r{origin, base};
  r.check_keys(root, "the top level", {"checkpoint"});
  return read_checkpoints(r, root);
}

std::string default_instruction(const std::string& dataset) {
  const auto path = data_dir() / "instructions.toml";
  const auto root = parse_toml(io::read_text_file(path), path.string());
  if (auto v = root[dataset].value<std::string>()) return *v;
  throw ConfigError(fmt::format("no default instruction for dataset \"{}\"; set simulation.instruction", dataset));
}

ClientOptions client_options(const Config& cfg) {
  ClientOptions opts;
  opts.cache_dir = cfg.cache_dir;
  opts.max_in_flight = cfg.max_in_flight;
  return opts;
}

void register_backends(ChatClient& client, const Config& cfg) {
  for (const auto& spec : cfg.backends) client.register_backend(spec);
}

namespace {

std::string backend_model(const Config& cfg, const std::string& backend, const std::string& model) {
  if (!model.empty()) return model;
  for (const auto& b : cfg.backends) {
    if (b.id == backend) return b.model;
  }
  return {};
}

}  // namespace

ClassifierConfig classifier_config(const Config& cfg) {
  const auto& s = cfg.classifier;
  ClassifierConfig out;
  out.mode = s.mode;
  out.template_name = s.template_name;
  out.backend = s.backend;
  out.model = backend_model(cfg, s.backend, s.model);
  out.max_tokens = s.max_tokens;
  out.ack_rule_prefilter = s.ack_rule_prefilter;
  if (s.mode == ClassifierMode::few_shot) out.exemplars = load_exemplars(s.exemplars);
  if (s.lexicon) out.lexicon = AckLexicon::load(*s.lexicon);
  return out;
}

SimulationConfig simulation_config(const Config& cfg, bool mitigation) {
  const auto& s = cfg.simulation;
  SimulationConfig out;
  out.backend = s.backend;
  out.model = backend_model(cfg, s.backend, s.model);
  out.instruction = s.instruction.empty() ? default_instruction(cfg.dataset) : s.instruction;
  out.temperature = s.temperature;
  out.max_tokens = s.max_tokens;
  out.tag = s.tag;
  if (mitigation) {
    auto text = io::read_text_file(s.mitigation_file);
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    if (text.empty()) throw ConfigError(fmt::format("mitigation file {} is empty", s.mitigation_file.string()));
    out.mitigation = std::move(text);
  }
  return out;
}

}  // namespace groundgap
