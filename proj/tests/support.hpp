#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "groundgap/corpus.hpp"

namespace testing_support {

inline std::filesystem::path source_dir() { return GROUNDGAP_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return source_dir() / "tests" / "fixtures" / name; }

class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("groundgap-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Conversation from (role, text) pairs with contiguous indices.
inline groundgap::Conversation make_conversation(const std::string& id,
                                                 const std::vector<std::pair<std::string, std::string>>& turns,
                                                 const std::string& expert = "supporter",
                                                 const std::string& dataset = "esconv") {
  groundgap::Conversation c;
  c.id = id;
  c.dataset = dataset;
  c.expert_role = expert;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    c.turns.push_back({turns[i].first, turns[i].second, i, {}});
  }
  return c;
}

// Alternating seeker/supporter conversation of n turns starting with seeker;
// texts are "<id> t<i>".
inline groundgap::Conversation alternating(const std::string& id, std::size_t n) {
  std::vector<std::pair<std::string, std::string>> turns;
  for (std::size_t i = 0; i < n; ++i) {
    turns.emplace_back(i % 2 == 0 ? "seeker" : "supporter", id + " t" + std::to_string(i));
  }
  return make_conversation(id, turns);
}

}  // namespace testing_support
