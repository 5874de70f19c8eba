#include "groundgap/chat_client.hpp"

#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "groundgap/error.hpp"

namespace groundgap {

ChatClient::ChatClient(ClientOptions options) : options_(std::move(options)) {
  if (options_.max_in_flight < 1) {
    throw std::invalid_argument("max_in_flight must be at least 1");
  }
  if (options_.retry.max_attempts < 1) {
    throw std::invalid_argument("retry policy needs at least one attempt");
  }
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (options_.cache_dir) {
    cache_.emplace(*options_.cache_dir);
  }
  in_flight_ = std::make_unique<std::counting_semaphore<>>(options_.max_in_flight);
}

void ChatClient::register_backend(const std::string& id, std::shared_ptr<ChatBackend> backend) {
  backends_[id] = std::move(backend);
}

void ChatClient::register_backend(const BackendSpec& spec) {
  register_backend(spec.id, std::shared_ptr<ChatBackend>(make_backend(spec)));
}

std::string ChatClient::call_with_retries(ChatBackend& backend, const ChatRequest& req) {
  for (int attempt = 0;; ++attempt) {
    try {
      backend_calls_.fetch_add(1);
      std::string text;
      if (backend.is_live()) {
        in_flight_->acquire();
        try {
          text = backend.send(req);
        } catch (...) {
          in_flight_->release();
          throw;
        }
        in_flight_->release();
      } else {
        text = backend.send(req);
      }
      return text;
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt + 1 >= options_.retry.max_attempts) {
        throw BackendError(fmt::format("{} (after {} attempt(s))", e.what(), attempt + 1),
                           e.status(), false);
      }
      const auto delay = options_.retry.base_delay * (1LL << attempt);
      spdlog::warn("backend \"{}\" failed ({}); retry {} in {} ms", req.backend_id, e.what(),
                   attempt + 1, delay.count());
      retries_.fetch_add(1);
      options_.sleep(delay);
    }
  }
}

ChatResponse ChatClient::complete(const ChatRequest& req) {
  try {
    validate_request(req);
  } catch (const std::invalid_argument& e) {
    throw BackendError(fmt::format("invalid chat request: {}", e.what()));
  }
  auto it = backends_.find(req.backend_id);
  if (it == backends_.end()) {
    throw BackendError(fmt::format("backend \"{}\" is not registered", req.backend_id));
  }
  requests_.fetch_add(1);

  const auto key = cache_key(req);
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 start)
        .count();
  };

  if (cache_) {
    if (auto hit = cache_->load(key)) {
      cache_hits_.fetch_add(1);
      return ChatResponse{std::move(*hit), true, elapsed_ms()};
    }
  }

  auto text = call_with_retries(*it->second, req);
  if (text.empty()) {
    throw BackendError(fmt::format("backend \"{}\" returned empty text", req.backend_id));
  }
  if (cache_) {
    try {
      cache_->store(key, canonical_request(req), text);
    } catch (const std::exception& e) {
      cache_write_failures_.fetch_add(1);
      spdlog::warn("cache write failed for {}: {}", key, e.what());
    }
  }
  return ChatResponse{std::move(text), false, elapsed_ms()};
}

ClientStats ChatClient::stats() const {
  return ClientStats{requests_.load(), cache_hits_.load(), backend_calls_.load(), retries_.load(),
                     cache_write_failures_.load()};
}

}  // namespace groundgap
