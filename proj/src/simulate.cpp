#include "groundgap/simulate.hpp"

#include <map>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "groundgap/io.hpp"
#include "groundgap/metrics.hpp"
#include "groundgap/parallel.hpp"

namespace groundgap {

using nlohmann::json;

std::string system_prompt(const SimulationConfig& cfg) {
  if (!cfg.mitigation || cfg.mitigation->empty()) {
    return cfg.instruction;
  }
  return cfg.instruction + "\n\n" + *cfg.mitigation;
}

SimulationConfig apply_mitigation(const SimulationConfig& cfg) {
  SimulationConfig out = cfg;
  if (cfg.mitigation && !cfg.mitigation->empty() && !cfg.instruction.ends_with(*cfg.mitigation)) {
    out.instruction = system_prompt(cfg);
  }
  out.mitigation.reset();
  return out;
}

ChatRequest build_simulation_request(const Conversation& conv, std::size_t t, const SimulationConfig& cfg) {
  if (cfg.instruction.empty()) {
    throw SimulationError("simulation instruction is empty");
  }
  if (t == 0) {
    throw SimulationError(fmt::format("conversation \"{}\": turn 0 has no prior context to simulate from",
                                      conv.id));
  }
  if (t >= conv.turns.size()) {
    throw SimulationError(fmt::format("conversation \"{}\" has no turn {}", conv.id, t));
  }
  if (!conv.is_expert_turn(t)) {
    throw SimulationError(fmt::format("conversation \"{}\": turn {} belongs to listener \"{}\"", conv.id, t,
                                      conv.turns[t].role));
  }
  ChatRequest req;
  req.backend_id = cfg.backend;
  req.model = cfg.model;
  req.temperature = cfg.temperature;
  req.max_tokens = cfg.max_tokens;
  req.messages.push_back({ChatRole::system, system_prompt(cfg)});
  for (std::size_t i = 0; i < t; ++i) {
    const auto& u = conv.turns[i];
    req.messages.push_back({u.role == conv.expert_role ? ChatRole::assistant : ChatRole::user, u.text});
  }
  return req;
}

std::string simulate_turn(const Conversation& conv, std::size_t t, const SimulationConfig& cfg,
                          ChatClient& client) {
  return client.complete(build_simulation_request(conv, t, cfg)).text;
}

std::size_t count_simulatable_turns(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& conv : corpus) {
    for (std::size_t t = 1; t < conv.turns.size(); ++t) {
      if (conv.is_expert_turn(t)) ++n;
    }
  }
  return n;
}

SimulationResult simulate_corpus(const Corpus& corpus, const SimulationConfig& cfg, ChatClient& client) {
  struct Job {
    const Conversation* conv;
    std::size_t turn;
  };
  std::vector<Job> jobs;
  for (const auto& conv : corpus) {
    for (std::size_t t = 1; t < conv.turns.size(); ++t) {
      if (conv.is_expert_turn(t)) jobs.push_back({&conv, t});
    }
  }
  std::vector<std::string> texts(jobs.size());
  const auto errors = parallel_for(jobs.size(), static_cast<std::size_t>(client.max_in_flight()),
                                   [&](std::size_t i) { texts[i] = simulate_turn(*jobs[i].conv, jobs[i].turn, cfg, client); });

  SimulationResult result;
  result.attempted = jobs.size();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& conv = *jobs[i].conv;
    const auto t = jobs[i].turn;
    if (errors[i]) {
      std::string message;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        message = e.what();
      }
      result.failures.push_back({conv.id, t, std::move(message)});
      continue;
    }
    result.pairs.push_back({conv.id, t, conv.turns[t].text, std::move(texts[i]), std::nullopt, std::nullopt});
  }
  if (!result.failures.empty()) {
    spdlog::warn("{} of {} simulated turns failed", result.failures.size(), result.attempted);
  }
  if (static_cast<double>(result.failures.size()) >
      kMaxTurnFailureFraction * static_cast<double>(result.attempted)) {
    const auto& first = result.failures.front();
    auto message = fmt::format("{} of {} turns failed (more than {:.0f}%); first: ({}, {}) {}",
                               result.failures.size(), result.attempted, kMaxTurnFailureFraction * 100,
                               first.conversation_id, first.turn_index, first.message);
    throw SimulationAborted(message, std::move(result));
  }
  return result;
}

void save_pairs(const std::filesystem::path& path, const std::vector<LabeledPair>& pairs) {
  std::vector<json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) {
    json row{{"conversation_id", p.conversation_id},
             {"turn_index", p.turn_index},
             {"human_text", p.human_text},
             {"generated_text", p.generated_text}};
    if (p.human_label) row["human_label"] = to_string(*p.human_label);
    if (p.generated_label) row["generated_label"] = to_string(*p.generated_label);
    rows.push_back(std::move(row));
  }
  io::write_file_atomic(path, io::to_jsonl(rows));
}

std::vector<LabeledPair> load_pairs(const std::filesystem::path& path) {
  std::vector<LabeledPair> out;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      LabeledPair p;
      p.conversation_id = io::require_string(obj, "conversation_id", where);
      const auto turn = io::require_int(obj, "turn_index", where);
      if (turn < 0) throw SimulationError(fmt::format("{}: negative turn_index", where));
      p.turn_index = static_cast<std::size_t>(turn);
      p.human_text = io::require_string(obj, "human_text", where);
      p.generated_text = io::require_string(obj, "generated_text", where);
      if (auto it = obj.find("human_label"); it != obj.end() && !it->is_null()) {
        p.human_label = require_label(it->get<std::string>());
      }
      if (auto it = obj.find("generated_label"); it != obj.end() && !it->is_null()) {
        p.generated_label = require_label(it->get<std::string>());
      }
      out.push_back(std::move(p));
    });
  } catch (const SimulationError&) {
    throw;
  } catch (const Error& e) {
    throw SimulationError(e.what());
  }
  return out;
}

void attach_labels(std::vector<LabeledPair>& pairs, const std::vector<Prediction>& human,
                   const std::vector<Prediction>& generated) {
  using Key = std::pair<std::string, std::size_t>;
  std::map<Key, ActLabel> h;
  std::map<Key, ActLabel> g;
  for (const auto& p : human) h[{p.conversation_id, p.turn_index}] = p.label;
  for (const auto& p : generated) g[{p.conversation_id, p.turn_index}] = p.label;
  for (auto& p : pairs) {
    const Key key{p.conversation_id, p.turn_index};
    if (auto it = h.find(key); it != h.end()) p.human_label = it->second;
    if (auto it = g.find(key); it != g.end()) p.generated_label = it->second;
  }
}

void validate_sweep(const SweepSpec& sweep) {
  if (sweep.checkpoints.size() < kMinSweepCheckpoints) {
    throw SimulationError(fmt::format("a sweep needs at least {} checkpoints, got {}", kMinSweepCheckpoints,
                                      sweep.checkpoints.size()));
  }
  for (std::size_t i = 1; i < sweep.checkpoints.size(); ++i) {
    if (sweep.checkpoints[i].step <= sweep.checkpoints[i - 1].step) {
      throw SimulationError(fmt::format("checkpoint steps must be strictly increasing ({} after {})",
                                        sweep.checkpoints[i].step, sweep.checkpoints[i - 1].step));
    }
  }
}

std::vector<SweepRow> run_sweep(const Corpus& corpus, const SweepSpec& sweep,
                                const std::vector<Prediction>& human_labels, const Classifier& classifier,
                                ChatClient& client) {
  validate_sweep(sweep);
  std::vector<SweepRow> rows;
  for (const auto& ckpt : sweep.checkpoints) {
    auto cfg = sweep.simulation;
    cfg.backend = ckpt.backend;
    if (!ckpt.model.empty()) cfg.model = ckpt.model;

    std::vector<LabeledPair> pairs;
    try {
      pairs = simulate_corpus(corpus, cfg, client).pairs;
    } catch (const SimulationError& e) {
      throw SweepAborted(fmt::format("checkpoint step {} failed: {}", ckpt.step, e.what()), rows);
    }
    if (pairs.empty()) {
      throw SweepAborted(fmt::format("checkpoint step {} produced no pairs", ckpt.step), rows);
    }
    const auto batch = classifier.classify_all(generated_targets(corpus, pairs));
    if (!batch.failures.empty()) {
      const auto& f = batch.failures.front();
      throw SweepAborted(fmt::format("checkpoint step {}: {} generated turns could not be classified; "
                                     "first ({}, {}): {}",
                                     ckpt.step, batch.failures.size(), f.conversation_id, f.turn_index,
                                     f.message),
                         rows);
    }
    attach_labels(pairs, human_labels, batch.predictions);
    for (const auto& p : pairs) {
      if (!p.human_label) {
        throw SweepAborted(fmt::format("no human label for ({}, {})", p.conversation_id, p.turn_index), rows);
      }
    }
    for (auto act : kGroundingActs) {
      const auto kappa = cohen_kappa_binary(binary_series(pairs, act));
      std::size_t positives = 0;
      for (const auto& p : pairs) positives += *p.generated_label == act ? 1 : 0;
      rows.push_back({ckpt.step, act, kappa.kappa,
                      100.0 * static_cast<double>(positives) / static_cast<double>(pairs.size())});
    }
    spdlog::info("checkpoint step {} done ({} pairs)", ckpt.step, pairs.size());
  }
  return rows;
}

}  // namespace groundgap
