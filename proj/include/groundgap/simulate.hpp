#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "groundgap/acts.hpp"
#include "groundgap/chat_client.hpp"
#include "groundgap/classifier.hpp"
#include "groundgap/corpus.hpp"
#include "groundgap/error.hpp"
#include "groundgap/labels.hpp"

namespace groundgap {

struct SimulationConfig {
  std::string backend;
  std::string model;
  std::string instruction;  // e.g. "Roleplay a therapist."
  std::optional<std::string> mitigation;
  double temperature = kSimulationTemperature;
  int max_tokens = kSimulationMaxTokens;
  std::string tag;  // names output files
};

// instruction, then a blank line and the mitigation text when one is set.
std::string system_prompt(const SimulationConfig& cfg);

// Folds the mitigation into the instruction and clears it, so applying twice
// is the same as applying once. cfg itself is left untouched.
SimulationConfig apply_mitigation(const SimulationConfig& cfg);

// [system prompt] followed by turns 0..t-1, expert as assistant and listener
// as user. Turn t and everything after it are never included.
ChatRequest build_simulation_request(const Conversation& conv, std::size_t t, const SimulationConfig& cfg);

std::string simulate_turn(const Conversation& conv, std::size_t t, const SimulationConfig& cfg,
                          ChatClient& client);

inline constexpr double kMaxTurnFailureFraction = 0.10;

struct TurnFailure {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::string message;
};

struct SimulationResult {
  std::vector<LabeledPair> pairs;  // corpus order, then turn order
  std::vector<TurnFailure> failures;
  std::size_t attempted = 0;
};

class SimulationAborted : public SimulationError {
public:
  SimulationAborted(const std::string& message, SimulationResult partial)
      : SimulationError(message), partial_(std::move(partial)) {}

  const SimulationResult& partial() const { return partial_; }

private:
  SimulationResult partial_;
};

// One pair per expert turn with index >= 1. Failed turns are recorded and
// skipped; more than 10% failures throws SimulationAborted.
SimulationResult simulate_corpus(const Corpus& corpus, const SimulationConfig& cfg, ChatClient& client);

// Number of expert turns with index >= 1.
std::size_t count_simulatable_turns(const Corpus& corpus);

void save_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs);
std::vector<LabeledPair> load_pairs(const std::filesystem::path& path);

// Fills human_label / generated_label from prediction files by position.
// Predictions for positions outside the pairs are ignored.
void attach_labels(std::vector<LabeledPair>& pairs, const std::vector<Prediction>& human,
                   const std::vector<Prediction>& generated);

struct Checkpoint {
  long long step = 0;
  std::string backend;
  std::string model;
};

struct SweepSpec {
  std::vector<Checkpoint> checkpoints;
  SimulationConfig simulation;
};

struct SweepRow {
  long long step = 0;
  ActLabel act = ActLabel::none;
  double kappa = 0.0;
  double base_rate = 0.0;  // generated-side percentage
};

class SweepAborted : public SimulationError {
public:
  SweepAborted(const std::string& message, std::vector<SweepRow> partial)
      : SimulationError(message), partial_(std::move(partial)) {}

  const std::vector<SweepRow>& partial() const { return partial_; }

private:
  std::vector<SweepRow> partial_;
};

inline constexpr std::size_t kMinSweepCheckpoints = 3;

void validate_sweep(const SweepSpec& sweep);

// Per checkpoint, in order: simulate, classify the generated turns, and score
// each act against the human labels.
std::vector<SweepRow> run_sweep(const Corpus& corpus, const SweepSpec& sweep,
                                const std::vector<Prediction>& human_labels, const Classifier& classifier,
                                ChatClient& client);

}  // namespace groundgap
