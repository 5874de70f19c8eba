#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace groundgap::io {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Calls fn(object, line_number) for every non-blank line; line numbers are
// 1-based. Malformed JSON raises an error naming the file and line.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

std::string to_jsonl(const std::vector<json>& rows);

json read_json_file(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const json& value);

// Required field accessors that produce readable errors.
std::string require_string(const json& obj, std::string_view field, std::string_view where);
long long require_int(const json& obj, std::string_view field, std::string_view where);

}  // namespace groundgap::io
