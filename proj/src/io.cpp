#include "groundgap/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "groundgap/error.hpp"

namespace groundgap::io {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("io", fmt::format("cannot open {}", path.string()));
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += fmt::format(".tmp{}.{}", std::hash<std::thread::id>{}(std::this_thread::get_id()),
                     counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("io", fmt::format("cannot write {}", tmp.string()));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      throw Error("io", fmt::format("short write to {}", tmp.string()));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("io", fmt::format("cannot rename into {}: {}", path.string(), ec.message()));
  }
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("io", fmt::format("cannot open {}", path.string()));
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) {
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("io", fmt::format("{}:{}: malformed JSON: {}", path.string(), line_no, e.what()));
    }
    if (!obj.is_object()) {
      throw Error("io", fmt::format("{}:{}: expected a JSON object", path.string(), line_no));
    }
    fn(obj, line_no);
  }
}

std::string to_jsonl(const std::vector<json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("io", fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
}

void write_json_file(const std::filesystem::path& path, const json& value) {
  write_file_atomic(path, value.dump(2) + "\n");
}

std::string require_string(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw Error("io", fmt::format("{}: missing required string field \"{}\"", where, field));
  }
  return it->get<std::string>();
}

long long require_int(const json& obj, std::string_view field, std::string_view where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_number_integer()) {
    throw Error("io", fmt::format("{}: missing required integer field \"{}\"", where, field));
  }
  return it->get<long long>();
}

}  // namespace groundgap::io
