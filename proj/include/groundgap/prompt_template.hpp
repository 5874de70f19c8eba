#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "groundgap/chat.hpp"

namespace groundgap {

using SlotMap = std::map<std::string, std::string>;

// A versioned chat prompt. File layout:
//
//   ---
//   name: classify-v1
//   version: "1"
//   slots: [context, utterance]
//   ---
//   ### system
//   ...
//   ### user
//   ... {{context}} ... {{utterance}}
//
// Every {{slot}} marker must be declared in the header and every declared
// slot must be used.
class PromptTemplate {
public:
  static PromptTemplate parse(std::string_view text, const std::string& origin);
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  // "name@version", recorded on requests so template edits invalidate caches.
  std::string version_tag() const { return name_ + "@" + version_; }
  const std::vector<std::string>& slots() const { return slots_; }

  std::vector<ChatMessage> render(const SlotMap& values) const;

private:
  struct Section {
    ChatRole role;
    std::string body;
  };

  std::string name_;
  std::string version_;
  std::vector<std::string> slots_;
  std::vector<Section> sections_;
};

// Looks templates up as <dir>/<name>.tmpl and keeps parsed copies. Thread-safe.
class TemplateStore {
public:
  explicit TemplateStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const PromptTemplate& get(const std::string& name);
  const std::filesystem::path& dir() const { return dir_; }

private:
  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, PromptTemplate> loaded_;
};

std::vector<ChatMessage> render_template(TemplateStore& store, const std::string& name,
                                         const SlotMap& values);

}  // namespace groundgap
