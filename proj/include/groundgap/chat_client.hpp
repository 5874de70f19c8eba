#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "groundgap/backends.hpp"
#include "groundgap/chat.hpp"
#include "groundgap/response_cache.hpp"

namespace groundgap {

struct RetryPolicy {
  int max_attempts = 5;
  // Delay before retry k (0-based) is base_delay * 2^k.
  std::chrono::milliseconds base_delay{1000};
};

struct ClientOptions {
  std::optional<std::filesystem::path> cache_dir;
  int max_in_flight = 4;
  RetryPolicy retry;
  // Injected so tests can observe backoff without sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct ClientStats {
  std::uint64_t requests = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_calls = 0;
  std::uint64_t retries = 0;
  std::uint64_t cache_write_failures = 0;
};

class ChatClient {
public:
  explicit ChatClient(ClientOptions options = {});

  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  void register_backend(const std::string& id, std::shared_ptr<ChatBackend> backend);
  void register_backend(const BackendSpec& spec);
  bool has_backend(const std::string& id) const { return backends_.contains(id); }

  // Safe to call concurrently. Cache hits return cached=true without
  // touching the backend; misses go through the retry loop and are stored.
  ChatResponse complete(const ChatRequest& req);

  ClientStats stats() const;
  const ResponseCache* cache() const { return cache_ ? &*cache_ : nullptr; }
  int max_in_flight() const { return options_.max_in_flight; }

private:
  std::string call_with_retries(ChatBackend& backend, const ChatRequest& req);

  ClientOptions options_;
  std::optional<ResponseCache> cache_;
  std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
  std::atomic<std::uint64_t> retries_{0};
  std::atomic<std::uint64_t> cache_write_failures_{0};
};

}  // namespace groundgap
