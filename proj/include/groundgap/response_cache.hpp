#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace groundgap {

// One file per key: <dir>/<key>.json holding
// {"request_digest", "request", "text", "timestamp"}. Writes go through a
// temp file and rename, so concurrent writers and interrupted runs never
// leave a torn entry behind.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> load(const std::string& key) const;

  // canonical_request is stored alongside the text for inspection.
  void store(const std::string& key, const std::string& canonical_request,
             const std::string& text) const;

  std::filesystem::path entry_path(const std::string& key) const;
  const std::filesystem::path& dir() const { return dir_; }

private:
  std::filesystem::path dir_;
};

}  // namespace groundgap
