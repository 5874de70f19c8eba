#include "groundgap/prompt_template.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"

namespace groundgap {

namespace {

struct Marker {
  std::size_t begin;
  std::size_t end;
  std::string slot;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<Marker> find_markers(std::string_view body, const std::string& origin) {
  std::vector<Marker> out;
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    const auto close = body.find("}}", pos + 2);
    if (close == std::string_view::npos) {
      throw TemplateError(fmt::format("{}: unterminated slot marker", origin));
    }
    auto slot = trim(body.substr(pos + 2, close - pos - 2));
    if (slot.empty()) {
      throw TemplateError(fmt::format("{}: empty slot marker", origin));
    }
    out.push_back({pos, close + 2, std::move(slot)});
    pos = close + 2;
  }
  return out;
}

std::string strip_newlines(std::string s) {
  const auto first = s.find_first_not_of("\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of("\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text, const std::string& origin) {
  std::string normalized(text);
  if (!normalized.starts_with("---\n")) {
    throw TemplateError(fmt::format("{}: template must start with a '---' header", origin));
  }
  const auto header_end = normalized.find("\n---\n", 3);
  if (header_end == std::string::npos) {
    throw TemplateError(fmt::format("{}: unterminated template header", origin));
  }
  const auto header_text = normalized.substr(4, header_end - 4 + 1);
  const auto body = normalized.substr(header_end + 5);

  PromptTemplate tmpl;
  try {
    const auto header = YAML::Load(header_text);
    if (!header.IsMap()) {
      throw TemplateError(fmt::format("{}: template header must be a mapping", origin));
    }
    if (!header["name"] || !header["version"]) {
      throw TemplateError(fmt::format("{}: template header needs name and version", origin));
    }
    tmpl.name_ = header["name"].as<std::string>();
    tmpl.version_ = header["version"].as<std::string>();
    if (const auto slots = header["slots"]) {
      if (!slots.IsSequence()) {
        throw TemplateError(fmt::format("{}: slots must be a list", origin));
      }
      for (const auto& s : slots) {
        tmpl.slots_.push_back(s.as<std::string>());
      }
    }
  } catch (const YAML::Exception& e) {
    throw TemplateError(fmt::format("{}: malformed template header: {}", origin, e.what()));
  }

  std::istringstream lines(body);
  std::string line;
  std::optional<Section> current;
  while (std::getline(lines, line)) {
    if (line.starts_with("### ")) {
      if (current) tmpl.sections_.push_back(std::move(*current));
      const auto role_name = trim(std::string_view(line).substr(4));
      try {
        current = Section{chat_role_from_string(role_name), {}};
      } catch (const std::invalid_argument& e) {
        throw TemplateError(fmt::format("{}: {}", origin, e.what()));
      }
      continue;
    }
    if (!current) {
      if (!trim(line).empty()) {
        throw TemplateError(fmt::format("{}: text before the first '### <role>' section", origin));
      }
      continue;
    }
    current->body += line;
    current->body += '\n';
  }
  if (current) tmpl.sections_.push_back(std::move(*current));
  if (tmpl.sections_.empty()) {
    throw TemplateError(fmt::format("{}: template has no message sections", origin));
  }

  const std::set<std::string> declared(tmpl.slots_.begin(), tmpl.slots_.end());
  if (declared.size() != tmpl.slots_.size()) {
    throw TemplateError(fmt::format("{}: duplicate slot declaration", origin));
  }
  std::set<std::string> used;
  for (auto& section : tmpl.sections_) {
    section.body = strip_newlines(std::move(section.body));
    for (const auto& m : find_markers(section.body, origin)) {
      if (!declared.contains(m.slot)) {
        throw TemplateError(fmt::format("{}: marker {{{{{}}}}} is not declared in slots", origin, m.slot));
      }
      used.insert(m.slot);
    }
  }
  for (const auto& s : declared) {
    if (!used.contains(s)) {
      throw TemplateError(fmt::format("{}: declared slot \"{}\" is never used", origin, s));
    }
  }
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const Error& e) {
    throw TemplateError(e.what());
  }
  return parse(text, path.string());
}

std::vector<ChatMessage> PromptTemplate::render(const SlotMap& values) const {
  for (const auto& slot : slots_) {
    if (!values.contains(slot)) {
      throw TemplateError(fmt::format("template {}: missing slot \"{}\"", version_tag(), slot));
    }
  }
  for (const auto& [slot, _] : values) {
    if (std::find(slots_.begin(), slots_.end(), slot) == slots_.end()) {
      throw TemplateError(fmt::format("template {}: unknown slot \"{}\"", version_tag(), slot));
    }
  }
  std::vector<ChatMessage> out;
  out.reserve(sections_.size());
  for (const auto& section : sections_) {
    std::string rendered;
    std::size_t prev = 0;
    for (const auto& m : find_markers(section.body, name_)) {
      rendered.append(section.body, prev, m.begin - prev);
      rendered += values.at(m.slot);
      prev = m.end;
    }
    rendered.append(section.body, prev);
    if (section.role != ChatRole::system && rendered.empty()) {
      throw TemplateError(fmt::format("template {}: {} message rendered empty", version_tag(),
                                      to_string(section.role)));
    }
    out.push_back({section.role, std::move(rendered)});
  }
  return out;
}

const PromptTemplate& TemplateStore::get(const std::string& name) {
  std::lock_guard lock(mutex_);
  if (auto it = loaded_.find(name); it != loaded_.end()) {
    return it->second;
  }
  const auto path = dir_ / (name + ".tmpl");
  if (!std::filesystem::exists(path)) {
    throw TemplateError(fmt::format("unknown template \"{}\" (looked for {})", name, path.string()));
  }
  auto tmpl = PromptTemplate::load(path);
  return loaded_.emplace(name, std::move(tmpl)).first->second;
}

std::vector<ChatMessage> render_template(TemplateStore& store, const std::string& name,
                                         const SlotMap& values) {
  return store.get(name).render(values);
}

}  // namespace groundgap
