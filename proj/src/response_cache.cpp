#include "groundgap/response_cache.hpp"

#include <chrono>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"

namespace groundgap {

using nlohmann::json;

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<std::string> ResponseCache::load(const std::string& key) const {
  const auto path = entry_path(key);
  if (!std::filesystem::exists(path)) {
    return std::nullopt;
  }
  try {
    const auto entry = io::read_json_file(path);
    if (entry.value("request_digest", std::string{}) != key || !entry.contains("text") ||
        !entry["text"].is_string()) {
      spdlog::warn("ignoring inconsistent cache entry {}", path.string());
      return std::nullopt;
    }
    return entry["text"].get<std::string>();
  } catch (const Error& e) {
    spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& key, const std::string& canonical_request,
                          const std::string& text) const {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const json entry{{"request_digest", key},
                   {"request", canonical_request},
                   {"text", text},
                   {"timestamp", fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", now)}};
  io::write_json_file(entry_path(key), entry);
}

}  // namespace groundgap
