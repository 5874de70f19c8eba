#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "groundgap/backends.hpp"
#include "groundgap/chat_client.hpp"
#include "groundgap/classifier.hpp"
#include "groundgap/simulate.hpp"

namespace groundgap {

// Directory holding bundled templates, exemplars, the mitigation prompt and
// default instructions.
std::filesystem::path data_dir();

struct ClassifierSettings {
  ClassifierMode mode = ClassifierMode::few_shot;
  std::string template_name;  // defaults by mode
  std::filesystem::path templates_dir;
  std::filesystem::path exemplars;
  std::string backend;
  std::string model;
  int max_tokens = 256;
  bool ack_rule_prefilter = false;
  std::optional<std::filesystem::path> lexicon;
};

struct SimulationSettings {
  std::string backend;
  std::string model;
  std::string instruction;  // empty: per-dataset default
  std::filesystem::path mitigation_file;
  double temperature = kSimulationTemperature;
  int max_tokens = kSimulationMaxTokens;
  std::string tag;
};

// One TOML file: top-level dataset and seed, [[backend]] tables, [cache],
// [classifier], [simulation] and optional [[checkpoint]] tables. Relative
// paths resolve against the file's directory.
struct Config {
  std::filesystem::path source;
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::vector<BackendSpec> backends;
  std::optional<std::filesystem::path> cache_dir;
  int max_in_flight = 4;
  ClassifierSettings classifier;
  SimulationSettings simulation;
  std::vector<Checkpoint> checkpoints;
};

Config parse_config(std::string_view text, const std::filesystem::path& base_dir, const std::string& origin);
Config load_config(const std::filesystem::path& path);

// [[checkpoint]] tables from a standalone file.
std::vector<Checkpoint> load_checkpoints(const std::filesystem::path& path);

// Bundled default instruction for a dataset tag (data/instructions.toml).
std::string default_instruction(const std::string& dataset);

ClientOptions client_options(const Config& cfg);
void register_backends(ChatClient& client, const Config& cfg);

// Loads exemplars and lexicon files referenced by the settings.
ClassifierConfig classifier_config(const Config& cfg);

// Reads the mitigation file only when `mitigation` is set.
SimulationConfig simulation_config(const Config& cfg, bool mitigation);

}  // namespace groundgap
