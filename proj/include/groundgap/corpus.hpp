#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace groundgap {

struct Role {
  std::string name;
  bool is_expert = false;
};

struct Utterance {
  std::string role;
  std::string text;
  std::size_t index = 0;
  std::map<std::string, std::string> meta;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::string dataset;
  std::string expert_role;
  std::vector<Utterance> turns;

  bool is_expert_turn(std::size_t t) const {
    return t < turns.size() && turns[t].role == expert_role;
  }

  // The two participants, expert first. Requires a validated conversation.
  std::vector<Role> roles() const;

  bool operator==(const Conversation&) const = default;
};

using Corpus = std::vector<Conversation>;

struct CorpusSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> validation_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
};

// Canonical JSONL ingestion. `expected_dataset` may be empty to accept any
// tag; otherwise every conversation must carry that dataset tag.
Corpus load_corpus(const std::filesystem::path& path, const std::string& expected_dataset = {});

// Throws CorpusError on the first violated invariant.
void validate_conversation(const Conversation& conv);

nlohmann::json conversation_to_json(const Conversation& conv);
Conversation conversation_from_json(const nlohmann::json& obj, const std::string& where);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

// Concatenates runs of same-role turns with a single "\n" and renumbers.
Conversation merge_consecutive_turns(const Conversation& conv);
Corpus merge_consecutive_turns(const Corpus& corpus);

// Lower median of per-conversation turn counts.
std::size_t median_message_count(const Corpus& corpus);

// Uniform seeded sample (without replacement) of n conversations among those
// at least median-long, each truncated to exactly the median turn count.
// The result keeps the input order of the chosen conversations.
Corpus sample_and_truncate(const Corpus& corpus, std::size_t n, std::uint64_t seed);

// validation and test receive max(1, round(0.1 * size)) ids each; the rest go
// to train. Ids are sorted, shuffled with the seed, then sliced.
CorpusSplit make_splits(const Corpus& corpus, std::uint64_t seed);

nlohmann::json split_to_json(const CorpusSplit& split);
CorpusSplit split_from_json(const nlohmann::json& obj);

}  // namespace groundgap
