#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace groundgap {

enum class ChatRole { system, user, assistant };

std::string_view to_string(ChatRole role);
ChatRole chat_role_from_string(std::string_view name);

struct ChatMessage {
  ChatRole role = ChatRole::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

inline constexpr double kSimulationTemperature = 0.7;
inline constexpr int kSimulationMaxTokens = 256;
inline constexpr double kClassificationTemperature = 0.0;

struct ChatRequest {
  std::string backend_id;
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = kSimulationTemperature;
  int max_tokens = kSimulationMaxTokens;
  std::string template_version;

  bool operator==(const ChatRequest&) const = default;
};

struct ChatResponse {
  std::string text;
  bool cached = false;
  std::int64_t latency_ms = 0;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate_request(const ChatRequest& req);

// Canonical serialization hashed by cache_key; also stored as the digest in
// cache entries.
std::string canonical_request(const ChatRequest& req);

// Lowercase hex SHA-256 of canonical_request(req).
std::string cache_key(const ChatRequest& req);

std::string sha256_hex(std::string_view data);

nlohmann::json messages_to_json(const std::vector<ChatMessage>& messages);

}  // namespace groundgap
