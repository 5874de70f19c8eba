#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "groundgap/acts.hpp"
#include "groundgap/chat_client.hpp"
#include "groundgap/corpus.hpp"
#include "groundgap/prompt_template.hpp"

namespace groundgap {

enum class ClassifierMode { zero_shot, few_shot, rule_ack_only };

std::string_view to_string(ClassifierMode mode);
ClassifierMode classifier_mode_from_string(std::string_view name);

struct Exemplar {
  std::string context;
  std::string target;
  ActLabel label = ActLabel::none;
};

// JSONL of {"context", "target", "label"}; context is either a string or an
// array of {"role", "text"} turns.
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

inline constexpr std::string_view kReprompt = "Answer with exactly one label.";

struct ClassifierConfig {
  ClassifierMode mode = ClassifierMode::few_shot;
  // few-shot templates take {context, utterance, exemplars}; zero-shot ones
  // take {context, utterance}.
  std::string template_name = "classify-v1";
  std::vector<Exemplar> exemplars;
  std::string backend;
  std::string model;
  double temperature = kClassificationTemperature;
  int max_tokens = 256;
  // When set, utterances the acknowledgement rule accepts are labeled without
  // a backend call.
  bool ack_rule_prefilter = false;
  AckLexicon lexicon = AckLexicon::seed();
};

// A turn to label, with the turns before it.
struct ClassificationTarget {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::vector<Utterance> context;
  Utterance target;
};

struct ClassificationFailure {
  std::string conversation_id;
  std::size_t turn_index = 0;
  std::string message;
  std::string raw_text;
};

struct ClassificationBatch {
  std::vector<Prediction> predictions;  // ordered by (conversation_id, turn_index)
  std::vector<ClassificationFailure> failures;
};

// "role: text" lines, or a placeholder when there is no prior turn.
std::string format_context(const std::vector<Utterance>& context);

class Classifier {
public:
  // client and templates are unused in rule-ack-only mode but must outlive
  // the classifier.
  Classifier(ClassifierConfig config, ChatClient& client, TemplateStore& templates);

  const ClassifierConfig& config() const { return config_; }

  std::vector<ChatMessage> render(const std::vector<Utterance>& context, const Utterance& target) const;
  ChatRequest build_request(const std::vector<Utterance>& context, const Utterance& target) const;

  // Throws ClassificationError (carrying the raw reply) if the reply still has
  // no label after one reprompt.
  ActLabel classify(const std::vector<Utterance>& context, const Utterance& target) const;

  ClassificationBatch classify_all(const std::vector<ClassificationTarget>& targets) const;

private:
  ClassifierConfig config_;
  ChatClient& client_;
  TemplateStore& templates_;
};

// Free-function form of Classifier::classify.
ActLabel classify_utterance(const std::vector<Utterance>& context, const Utterance& target,
                            const ClassifierConfig& cfg, ChatClient& client, TemplateStore& templates);

// Every expert turn of every conversation, in corpus order.
std::vector<ClassificationTarget> human_targets(const Corpus& corpus);

// Generated turns in place of the human ones, with the human context.
std::vector<ClassificationTarget> generated_targets(const Corpus& corpus,
                                                    const std::vector<LabeledPair>& pairs);

}  // namespace groundgap
