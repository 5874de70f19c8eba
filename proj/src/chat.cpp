#include "groundgap/chat.hpp"

#include <array>
#include <memory>
#include <stdexcept>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace groundgap {

using nlohmann::json;

std::string_view to_string(ChatRole role) {
  switch (role) {
    case ChatRole::system:
      return "system";
    case ChatRole::user:
      return "user";
    case ChatRole::assistant:
      return "assistant";
  }
  return "user";
}

ChatRole chat_role_from_string(std::string_view name) {
  if (name == "system") return ChatRole::system;
  if (name == "user") return ChatRole::user;
  if (name == "assistant") return ChatRole::assistant;
  throw std::invalid_argument(fmt::format("unknown chat role \"{}\"", name));
}

void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) {
    throw std::invalid_argument("chat request has no messages");
  }
  for (std::size_t i = 0; i < req.messages.size(); ++i) {
    const auto& m = req.messages[i];
    if (m.role == ChatRole::system && i != 0) {
      throw std::invalid_argument("only the first message may be a system message");
    }
    if (m.role != ChatRole::system && m.content.empty()) {
      throw std::invalid_argument(fmt::format("message {} ({}) has empty content", i, to_string(m.role)));
    }
  }
  if (!(req.temperature >= 0.0 && req.temperature <= 2.0)) {
    throw std::invalid_argument(fmt::format("temperature {} outside [0, 2]", req.temperature));
  }
  if (req.max_tokens <= 0) {
    throw std::invalid_argument("max_tokens must be positive");
  }
}

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    out.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  return out;
}

std::string canonical_request(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back(json::array({to_string(m.role), m.content}));
  }
  // Array form fixes field order; dump() escapes deterministically.
  return json::array({req.backend_id, req.model, req.temperature, req.max_tokens, messages,
                      req.template_version})
      .dump();
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string cache_key(const ChatRequest& req) { return sha256_hex(canonical_request(req)); }

}  // namespace groundgap
