#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "groundgap/chat.hpp"

namespace groundgap {

enum class BackendKind { openai_compatible, mock };

struct BackendSpec {
  std::string id;
  BackendKind kind = BackendKind::mock;
  // openai-compatible: full chat-completions URL, e.g.
  // https://api.openai.com/v1/chat/completions
  std::string endpoint;
  // Name of the environment variable holding the bearer token. Never the token.
  std::string auth_env;
  std::string model;
  // mock only: JSONL of {"key", "text"}.
  std::filesystem::path fixture;
  // mock only: when non-empty, keys missing from the fixture answer with
  // responses[hash(key) % size] instead of failing.
  std::vector<std::string> fallback_responses;
  double timeout_seconds = 120.0;
};

class ChatBackend {
public:
  virtual ~ChatBackend() = default;

  // Returns the completion text. Throws BackendError; retryable() marks
  // transport failures and HTTP 429/5xx.
  virtual std::string send(const ChatRequest& req) = 0;

  // Live backends count against the client's in-flight limit.
  virtual bool is_live() const { return false; }
};

// Pure function of cache_key(req): fixture lookup, then optional fallback.
class MockBackend : public ChatBackend {
public:
  MockBackend(std::unordered_map<std::string, std::string> fixture,
              std::vector<std::string> fallback_responses = {});

  static std::unique_ptr<MockBackend> from_spec(const BackendSpec& spec);

  std::string send(const ChatRequest& req) override;

private:
  std::unordered_map<std::string, std::string> fixture_;
  std::vector<std::string> fallback_;
};

std::unordered_map<std::string, std::string> load_mock_fixture(const std::filesystem::path& path);

class OpenAICompatibleBackend : public ChatBackend {
public:
  explicit OpenAICompatibleBackend(BackendSpec spec);

  std::string send(const ChatRequest& req) override;
  bool is_live() const override { return true; }

  // Request body posted to the endpoint.
  static nlohmann::json request_body(const ChatRequest& req);
  // Extracts choices[0].message.content; throws BackendError otherwise.
  static std::string parse_response(const std::string& body);

private:
  BackendSpec spec_;
  std::string scheme_host_port_;
  std::string path_;
};

class FunctionBackend : public ChatBackend {
public:
  using Fn = std::function<std::string(const ChatRequest&)>;

  explicit FunctionBackend(Fn fn, bool live = false) : fn_(std::move(fn)), live_(live) {}

  std::string send(const ChatRequest& req) override { return fn_(req); }
  bool is_live() const override { return live_; }

private:
  Fn fn_;
  bool live_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec);

}  // namespace groundgap
