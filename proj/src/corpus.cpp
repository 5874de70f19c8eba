#include "groundgap/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"
#include "groundgap/random.hpp"

namespace groundgap {

using nlohmann::json;

namespace {

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string::npos;
}

}  // namespace

std::vector<Role> Conversation::roles() const {
  std::vector<Role> out{{expert_role, true}};
  for (const auto& turn : turns) {
    if (turn.role != expert_role) {
      out.push_back({turn.role, false});
      break;
    }
  }
  return out;
}

void validate_conversation(const Conversation& conv) {
  if (conv.id.empty()) {
    throw CorpusError("conversation id is empty");
  }
  if (conv.turns.size() < 2) {
    throw CorpusError(fmt::format("conversation \"{}\" has {} turn(s); at least 2 turns required", conv.id,
                                  conv.turns.size()));
  }
  std::set<std::string> roles;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const auto& turn = conv.turns[i];
    if (turn.index != i) {
      throw CorpusError(fmt::format("conversation \"{}\": turn indices are not contiguous at {}",
                                    conv.id, i));
    }
    if (turn.role.empty()) {
      throw CorpusError(fmt::format("conversation \"{}\": turn {} has an empty role", conv.id, i));
    }
    if (is_blank(turn.text)) {
      throw CorpusError(fmt::format("conversation \"{}\": turn {} has empty text", conv.id, i));
    }
    roles.insert(turn.role);
  }
  if (roles.size() != 2) {
    throw CorpusError(fmt::format("conversation \"{}\" has {} distinct roles; exactly 2 required",
                                  conv.id, roles.size()));
  }
  if (!roles.contains(conv.expert_role)) {
    throw CorpusError(fmt::format("conversation \"{}\": expert role \"{}\" never speaks", conv.id,
                                  conv.expert_role));
  }
}

Conversation conversation_from_json(const json& obj, const std::string& where) {
  Conversation conv;
  try {
    conv.id = io::require_string(obj, "id", where);
    conv.dataset = io::require_string(obj, "dataset", where);
    conv.expert_role = io::require_string(obj, "expert_role", where);
  } catch (const Error& e) {
    throw CorpusError(e.what());
  }
  auto turns = obj.find("turns");
  if (turns == obj.end() || !turns->is_array()) {
    throw CorpusError(fmt::format("{}: missing required array field \"turns\"", where));
  }
  for (const auto& t : *turns) {
    const auto turn_where = fmt::format("{} turn {}", where, conv.turns.size());
    if (!t.is_object()) {
      throw CorpusError(fmt::format("{}: expected an object", turn_where));
    }
    Utterance u;
    try {
      u.role = io::require_string(t, "role", turn_where);
      u.text = io::require_string(t, "text", turn_where);
    } catch (const Error& e) {
      throw CorpusError(e.what());
    }
    u.index = conv.turns.size();
    if (auto meta = t.find("meta"); meta != t.end() && !meta->is_null()) {
      if (!meta->is_object()) {
        throw CorpusError(fmt::format("{}: \"meta\" must be an object of strings", turn_where));
      }
      for (const auto& [k, v] : meta->items()) {
        if (!v.is_string()) {
          throw CorpusError(fmt::format("{}: meta value for \"{}\" must be a string", turn_where, k));
        }
        u.meta.emplace(k, v.get<std::string>());
      }
    }
    conv.turns.push_back(std::move(u));
  }
  return conv;
}

json conversation_to_json(const Conversation& conv) {
  json turns = json::array();
  for (const auto& u : conv.turns) {
    json t{{"role", u.role}, {"text", u.text}};
    if (!u.meta.empty()) {
      t["meta"] = u.meta;
    }
    turns.push_back(std::move(t));
  }
  return json{{"id", conv.id},
              {"dataset", conv.dataset},
              {"expert_role", conv.expert_role},
              {"turns", std::move(turns)}};
}

Corpus load_corpus(const std::filesystem::path& path, const std::string& expected_dataset) {
  if (!std::filesystem::exists(path)) {
    throw CorpusError(fmt::format("corpus file {} does not exist", path.string()));
  }
  Corpus corpus;
  std::unordered_set<std::string> seen;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      auto conv = conversation_from_json(obj, where);
      try {
        validate_conversation(conv);
      } catch (const CorpusError& e) {
        throw CorpusError(fmt::format("{}: {}", where, e.what()));
      }
      if (!expected_dataset.empty() && conv.dataset != expected_dataset) {
        throw CorpusError(fmt::format("{}: dataset \"{}\" does not match expected \"{}\"", where,
                                      conv.dataset, expected_dataset));
      }
      if (!seen.insert(conv.id).second) {
        throw CorpusError(fmt::format("{}: duplicate conversation id \"{}\"", where, conv.id));
      }
      corpus.push_back(std::move(conv));
    });
  } catch (const CorpusError&) {
    throw;
  } catch (const Error& e) {
    throw CorpusError(e.what());
  }
  if (corpus.empty()) {
    spdlog::warn("corpus file {} contains no conversations", path.string());
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::vector<json> rows;
  rows.reserve(corpus.size());
  for (const auto& conv : corpus) {
    rows.push_back(conversation_to_json(conv));
  }
  io::write_file_atomic(path, io::to_jsonl(rows));
}

Conversation merge_consecutive_turns(const Conversation& conv) {
  Conversation out{conv.id, conv.dataset, conv.expert_role, {}};
  for (const auto& turn : conv.turns) {
    if (!out.turns.empty() && out.turns.back().role == turn.role) {
      auto& last = out.turns.back();
      last.text += '\n';
      last.text += turn.text;
      // Keep the provenance of every merged source turn.
      for (const auto& [k, v] : turn.meta) {
        auto [it, inserted] = last.meta.emplace(k, v);
        if (!inserted && it->second != v) {
          it->second += ',';
          it->second += v;
        }
      }
      continue;
    }
    auto copy = turn;
    copy.index = out.turns.size();
    out.turns.push_back(std::move(copy));
  }
  return out;
}

Corpus merge_consecutive_turns(const Corpus& corpus) {
  Corpus out;
  out.reserve(corpus.size());
  for (const auto& conv : corpus) {
    out.push_back(merge_consecutive_turns(conv));
  }
  return out;
}

std::size_t median_message_count(const Corpus& corpus) {
  if (corpus.empty()) {
    throw CorpusError("median of an empty corpus is undefined");
  }
  std::vector<std::size_t> counts;
  counts.reserve(corpus.size());
  for (const auto& conv : corpus) {
    counts.push_back(conv.turns.size());
  }
  const auto mid = counts.begin() + static_cast<std::ptrdiff_t>((counts.size() - 1) / 2);
  std::nth_element(counts.begin(), mid, counts.end());
  return *mid;
}

Corpus sample_and_truncate(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  const auto median = median_message_count(corpus);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].turns.size() >= median) {
      eligible.push_back(i);
    }
  }
  if (eligible.size() < n) {
    throw CorpusError(fmt::format(
        "cannot sample {} conversations: only {} have at least the median {} turns", n,
        eligible.size(), median));
  }
  Rng rng(seed);
  shuffle(std::span<std::size_t>(eligible), rng);
  eligible.resize(n);
  std::sort(eligible.begin(), eligible.end());

  Corpus out;
  out.reserve(n);
  for (auto i : eligible) {
    auto conv = corpus[i];
    conv.turns.resize(median);
    out.push_back(std::move(conv));
  }
  return out;
}

CorpusSplit make_splits(const Corpus& corpus, std::uint64_t seed) {
  if (corpus.size() < 3) {
    throw CorpusError(fmt::format("corpus of {} conversation(s) is too small to split; need 3",
                                  corpus.size()));
  }
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const auto& conv : corpus) {
    ids.push_back(conv.id);
  }
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  shuffle(std::span<std::string>(ids), rng);

  const auto held_out = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(0.10 * static_cast<double>(ids.size()))));
  CorpusSplit split;
  split.seed = seed;
  auto first = ids.begin();
  split.validation_ids.assign(first, first + static_cast<std::ptrdiff_t>(held_out));
  split.test_ids.assign(first + static_cast<std::ptrdiff_t>(held_out),
                        first + static_cast<std::ptrdiff_t>(2 * held_out));
  split.train_ids.assign(first + static_cast<std::ptrdiff_t>(2 * held_out), ids.end());
  for (auto* part : {&split.train_ids, &split.validation_ids, &split.test_ids}) {
    std::sort(part->begin(), part->end());
  }
  return split;
}

json split_to_json(const CorpusSplit& split) {
  return json{{"seed", split.seed},
              {"train", split.train_ids},
              {"validation", split.validation_ids},
              {"test", split.test_ids}};
}

CorpusSplit split_from_json(const json& obj) {
  CorpusSplit split;
  try {
    split.seed = obj.at("seed").get<std::uint64_t>();
    split.train_ids = obj.at("train").get<std::vector<std::string>>();
    split.validation_ids = obj.at("validation").get<std::vector<std::string>>();
    split.test_ids = obj.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw CorpusError(fmt::format("malformed split file: {}", e.what()));
  }
  return split;
}

}  // namespace groundgap
