#include "groundgap/classifier.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/parallel.hpp"

namespace groundgap {

using nlohmann::json;

std::string_view to_string(ClassifierMode mode) {
  switch (mode) {
    case ClassifierMode::zero_shot:
      return "zero-shot";
    case ClassifierMode::few_shot:
      return "few-shot";
    case ClassifierMode::rule_ack_only:
      return "rule-ack-only";
  }
  return "few-shot";
}

ClassifierMode classifier_mode_from_string(std::string_view name) {
  for (auto mode : {ClassifierMode::zero_shot, ClassifierMode::few_shot, ClassifierMode::rule_ack_only}) {
    if (to_string(mode) == name) return mode;
  }
  throw ConfigError(fmt::format("unknown classifier mode \"{}\" (zero-shot, few-shot, rule-ack-only)", name));
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) {
  std::vector<Exemplar> out;
  io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    const auto where = fmt::format("{}:{}", path.string(), line);
    Exemplar ex;
    const auto ctx = obj.find("context");
    if (ctx == obj.end()) {
      throw ConfigError(fmt::format("{}: exemplar needs a context", where));
    }
    if (ctx->is_string()) {
      ex.context = ctx->get<std::string>();
    } else if (ctx->is_array()) {
      std::vector<Utterance> turns;
      for (const auto& t : *ctx) {
        turns.push_back({io::require_string(t, "role", where), io::require_string(t, "text", where),
                         turns.size(), {}});
      }
      ex.context = format_context(turns);
    } else {
      throw ConfigError(fmt::format("{}: exemplar context must be a string or an array", where));
    }
    ex.target = io::require_string(obj, "target", where);
    try {
      ex.label = require_label(io::require_string(obj, "label", where));
    } catch (const LabelParseError& e) {
      throw ConfigError(fmt::format("{}: {}", where, e.what()));
    }
    out.push_back(std::move(ex));
  });
  return out;
}

std::string format_context(const std::vector<Utterance>& context) {
  if (context.empty()) {
    return "(no prior turns)";
  }
  std::string out;
  for (const auto& u : context) {
    if (!out.empty()) out += '\n';
    out += u.role;
    out += ": ";
    out += u.text;
  }
  return out;
}

namespace {

std::string format_exemplars(const std::vector<Exemplar>& exemplars) {
  std::string out;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    const auto& ex = exemplars[i];
    if (i > 0) out += "\n\n";
    out += fmt::format("Example {}:\nContext:\n{}\nUtterance: {}\nLabel: {}", i + 1, ex.context, ex.target,
                       to_string(ex.label));
  }
  return out;
}

}  // namespace

Classifier::Classifier(ClassifierConfig config, ChatClient& client, TemplateStore& templates)
    : config_(std::move(config)), client_(client), templates_(templates) {
  if (config_.mode == ClassifierMode::few_shot && config_.exemplars.empty()) {
    throw ConfigError("few-shot classification needs a non-empty exemplar set");
  }
  if (config_.mode != ClassifierMode::rule_ack_only && config_.backend.empty()) {
    throw ConfigError(fmt::format("{} classification needs a backend", to_string(config_.mode)));
  }
}

std::vector<ChatMessage> Classifier::render(const std::vector<Utterance>& context,
                                            const Utterance& target) const {
  SlotMap slots{{"context", format_context(context)},
                {"utterance", fmt::format("{}: {}", target.role, target.text)}};
  if (config_.mode == ClassifierMode::few_shot) {
    slots["exemplars"] = format_exemplars(config_.exemplars);
  }
  return render_template(templates_, config_.template_name, slots);
}

ChatRequest Classifier::build_request(const std::vector<Utterance>& context, const Utterance& target) const {
  ChatRequest req;
  req.backend_id = config_.backend;
  req.model = config_.model;
  req.messages = render(context, target);
  req.temperature = config_.temperature;
  req.max_tokens = config_.max_tokens;
  req.template_version = templates_.get(config_.template_name).version_tag();
  return req;
}

ActLabel Classifier::classify(const std::vector<Utterance>& context, const Utterance& target) const {
  for (const auto& u : context) {
    if (u.index >= target.index) {
      throw ClassificationError(
          fmt::format("context turn {} does not precede target turn {}", u.index, target.index), {});
    }
  }
  if (config_.mode == ClassifierMode::rule_ack_only) {
    return detect_acknowledgement_rule(target.text, config_.lexicon) ? ActLabel::acknowledgement
                                                                    : ActLabel::none;
  }
  if (config_.ack_rule_prefilter && detect_acknowledgement_rule(target.text, config_.lexicon)) {
    return ActLabel::acknowledgement;
  }

  auto req = build_request(context, target);
  const auto first = client_.complete(req).text;
  try {
    return parse_label(first);
  } catch (const LabelParseError&) {
  }
  req.messages.push_back({ChatRole::assistant, first});
  req.messages.push_back({ChatRole::user, std::string(kReprompt)});
  const auto second = client_.complete(req).text;
  try {
    return parse_label(second);
  } catch (const LabelParseError&) {
    throw ClassificationError(
        fmt::format("no act label in model output after reprompt: \"{}\"", second.substr(0, 200)), second);
  }
}

ClassificationBatch Classifier::classify_all(const std::vector<ClassificationTarget>& targets) const {
  std::vector<std::optional<ActLabel>> labels(targets.size());
  const auto errors = parallel_for(targets.size(), static_cast<std::size_t>(client_.max_in_flight()),
                                   [&](std::size_t i) { labels[i] = classify(targets[i].context, targets[i].target); });

  ClassificationBatch batch;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& t = targets[i];
    if (labels[i]) {
      batch.predictions.push_back({t.conversation_id, t.turn_index, *labels[i]});
      continue;
    }
    ClassificationFailure failure{t.conversation_id, t.turn_index, "unknown failure", {}};
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ClassificationError& e) {
      failure.message = e.what();
      failure.raw_text = e.raw_text();
    } catch (const std::exception& e) {
      failure.message = e.what();
    }
    batch.failures.push_back(std::move(failure));
  }
  auto by_position = [](const auto& a, const auto& b) {
    return std::tie(a.conversation_id, a.turn_index) < std::tie(b.conversation_id, b.turn_index);
  };
  std::sort(batch.predictions.begin(), batch.predictions.end(), by_position);
  std::sort(batch.failures.begin(), batch.failures.end(), by_position);
  return batch;
}

ActLabel classify_utterance(const std::vector<Utterance>& context, const Utterance& target,
                            const ClassifierConfig& cfg, ChatClient& client, TemplateStore& templates) {
  return Classifier(cfg, client, templates).classify(context, target);
}

std::vector<ClassificationTarget> human_targets(const Corpus& corpus) {
  std::vector<ClassificationTarget> out;
  for (const auto& conv : corpus) {
    for (std::size_t t = 0; t < conv.turns.size(); ++t) {
      if (!conv.is_expert_turn(t)) continue;
      out.push_back({conv.id, t, {conv.turns.begin(), conv.turns.begin() + static_cast<std::ptrdiff_t>(t)},
                     conv.turns[t]});
    }
  }
  return out;
}

std::vector<ClassificationTarget> generated_targets(const Corpus& corpus,
                                                    const std::vector<LabeledPair>& pairs) {
  std::map<std::string, const Conversation*> by_id;
  for (const auto& conv : corpus) by_id[conv.id] = &conv;
  std::vector<ClassificationTarget> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto it = by_id.find(p.conversation_id);
    if (it == by_id.end()) {
      throw SimulationError(fmt::format("pair references unknown conversation \"{}\"", p.conversation_id));
    }
    const auto& conv = *it->second;
    if (!conv.is_expert_turn(p.turn_index)) {
      throw SimulationError(fmt::format("pair ({}, {}) does not address an expert turn", p.conversation_id,
                                        p.turn_index));
    }
    Utterance target{conv.expert_role, p.generated_text, p.turn_index, {}};
    out.push_back({p.conversation_id, p.turn_index,
                   {conv.turns.begin(), conv.turns.begin() + static_cast<std::ptrdiff_t>(p.turn_index)},
                   std::move(target)});
  }
  return out;
}

}  // namespace groundgap
