#include "groundgap/backends.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>

#include "groundgap/error.hpp"
#include "groundgap/io.hpp"

namespace groundgap {

using nlohmann::json;

std::unordered_map<std::string, std::string> load_mock_fixture(const std::filesystem::path& path) {
  std::unordered_map<std::string, std::string> out;
  try {
    io::for_each_jsonl(path, [&](const json& obj, std::size_t line) {
      const auto where = fmt::format("{}:{}", path.string(), line);
      out[io::require_string(obj, "key", where)] = io::require_string(obj, "text", where);
    });
  } catch (const BackendError&) {
    throw;
  } catch (const Error& e) {
    throw BackendError(fmt::format("mock fixture: {}", e.what()));
  }
  return out;
}

MockBackend::MockBackend(std::unordered_map<std::string, std::string> fixture,
                         std::vector<std::string> fallback_responses)
    : fixture_(std::move(fixture)), fallback_(std::move(fallback_responses)) {}

std::unique_ptr<MockBackend> MockBackend::from_spec(const BackendSpec& spec) {
  std::unordered_map<std::string, std::string> fixture;
  if (!spec.fixture.empty()) {
    fixture = load_mock_fixture(spec.fixture);
  } else if (spec.fallback_responses.empty()) {
    throw BackendError(fmt::format("mock backend \"{}\" needs a fixture path or fallback responses",
                                   spec.id));
  }
  return std::make_unique<MockBackend>(std::move(fixture), spec.fallback_responses);
}

std::string MockBackend::send(const ChatRequest& req) {
  const auto key = cache_key(req);
  if (auto it = fixture_.find(key); it != fixture_.end()) {
    return it->second;
  }
  if (fallback_.empty()) {
    throw BackendError(fmt::format("mock backend \"{}\" has no fixture entry for key {}",
                                   req.backend_id, key));
  }
  // The key is uniformly distributed hex; its first 15 digits pick a response.
  const auto pick = std::stoull(key.substr(0, 15), nullptr, 16);
  return fallback_[pick % fallback_.size()];
}

OpenAICompatibleBackend::OpenAICompatibleBackend(BackendSpec spec) : spec_(std::move(spec)) {
  const auto& url = spec_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError(fmt::format("backend \"{}\": endpoint \"{}\" is not a URL", spec_.id, url));
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_begin);
  path_ = path_begin == std::string::npos ? "/" : url.substr(path_begin);
}

json OpenAICompatibleBackend::request_body(const ChatRequest& req) {
  return json{{"model", req.model},
              {"messages", messages_to_json(req.messages)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
}

std::string OpenAICompatibleBackend::parse_response(const std::string& body) {
  json parsed;
  try {
    parsed = json::parse(body);
  } catch (const json::parse_error& e) {
    throw BackendError(fmt::format("unparseable completion response: {}", e.what()));
  }
  try {
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw BackendError("completion response has no choices[0].message.content");
  }
}

std::string OpenAICompatibleBackend::send(const ChatRequest& req) {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(spec_.timeout_seconds);
  client.set_connection_timeout(30, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  httplib::Headers headers;
  if (!spec_.auth_env.empty()) {
    const char* token = std::getenv(spec_.auth_env.c_str());
    if (token == nullptr || *token == '\0') {
      throw BackendError(fmt::format("backend \"{}\": environment variable {} is not set", spec_.id,
                                     spec_.auth_env));
    }
    headers.emplace("Authorization", fmt::format("Bearer {}", token));
  }

  auto res = client.Post(path_, headers, request_body(req).dump(), "application/json");
  if (!res) {
    throw BackendError(fmt::format("backend \"{}\": transport error: {}", spec_.id,
                                   httplib::to_string(res.error())),
                       0, true);
  }
  if (res->status != 200) {
    const bool retryable = res->status == 429 || res->status >= 500;
    throw BackendError(fmt::format("backend \"{}\": HTTP {}: {}", spec_.id, res->status,
                                   res->body.substr(0, 200)),
                       res->status, retryable);
  }
  return parse_response(res->body);
}

std::unique_ptr<ChatBackend> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendKind::mock:
      return MockBackend::from_spec(spec);
    case BackendKind::openai_compatible:
      if (spec.endpoint.empty()) {
        throw BackendError(fmt::format("backend \"{}\" has no endpoint", spec.id));
      }
      return std::make_unique<OpenAICompatibleBackend>(spec);
  }
  throw BackendError("unknown backend kind");
}

}  // namespace groundgap
