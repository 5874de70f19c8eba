#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "groundgap/backends.hpp"
#include "groundgap/chat.hpp"
#include "groundgap/chat_client.hpp"
#include "groundgap/error.hpp"
#include "groundgap/parallel.hpp"
#include "groundgap/prompt_template.hpp"
#include "groundgap/response_cache.hpp"
#include "support.hpp"

using namespace groundgap;
using namespace testing_support;
using nlohmann::json;

namespace {

ChatRequest simple_request(const std::string& backend = "b", const std::string& text = "hello") {
  ChatRequest req;
  req.backend_id = backend;
  req.model = "m";
  req.messages = {{ChatRole::system, "be brief"}, {ChatRole::user, text}};
  return req;
}

ClientOptions no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
  ClientOptions opts;
  opts.sleep = [delays](std::chrono::milliseconds d) {
    if (delays) delays->push_back(d);
  };
  return opts;
}

}  // namespace

TEST(ChatRequest, ValidationRules) {
  auto req = simple_request();
  EXPECT_NO_THROW(validate_request(req));
  auto empty = req;
  empty.messages.clear();
  EXPECT_THROW(validate_request(empty), std::invalid_argument);
  auto late_system = req;
  late_system.messages.push_back({ChatRole::system, "again"});
  EXPECT_THROW(validate_request(late_system), std::invalid_argument);
  auto blank = req;
  blank.messages[1].content = "";
  EXPECT_THROW(validate_request(blank), std::invalid_argument);
  auto hot = req;
  hot.temperature = 2.5;
  EXPECT_THROW(validate_request(hot), std::invalid_argument);
  auto no_tokens = req;
  no_tokens.max_tokens = 0;
  EXPECT_THROW(validate_request(no_tokens), std::invalid_argument);
}

TEST(ChatRequest, Defaults) {
  ChatRequest req;
  EXPECT_DOUBLE_EQ(req.temperature, 0.7);
  EXPECT_EQ(req.max_tokens, 256);
}

TEST(CacheKey, DeterministicHexDigest) {
  const auto req = simple_request();
  const auto key = cache_key(req);
  EXPECT_EQ(key.size(), 64u);
  EXPECT_TRUE(std::all_of(key.begin(), key.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)) && !std::isupper(static_cast<unsigned char>(c)); }));
  EXPECT_EQ(cache_key(simple_request()), key);
}

TEST(CacheKey, KnownSha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CacheKey, EveryFieldMatters) {
  const auto base = cache_key(simple_request());
  auto a = simple_request("other");
  auto b = simple_request();
  b.model = "m2";
  auto c = simple_request();
  c.temperature = 0.0;
  auto d = simple_request();
  d.max_tokens = 100;
  auto e = simple_request();
  e.template_version = "classify-v1@2";
  auto f = simple_request();
  f.messages[1].role = ChatRole::assistant;
  auto g = simple_request("b", "hello ");
  for (const auto& r : {a, b, c, d, e, f, g}) EXPECT_NE(cache_key(r), base);
}

TEST(CacheKey, NoCollisionsAcrossTenThousandRequests) {
  std::set<std::string> keys;
  for (int i = 0; i < 10000; ++i) {
    auto req = simple_request("b", "message " + std::to_string(i));
    req.max_tokens = 1 + i % 7;
    keys.insert(cache_key(req));
  }
  EXPECT_EQ(keys.size(), 10000u);
}

TEST(ResponseCache, StoreLoadAndCorruption) {
  TempDir dir;
  ResponseCache cache(dir / "cache");
  const auto req = simple_request();
  const auto key = cache_key(req);
  EXPECT_FALSE(cache.load(key));
  cache.store(key, canonical_request(req), "reply");
  EXPECT_EQ(cache.load(key), "reply");
  const auto entry = json::parse(read_text(cache.entry_path(key)));
  EXPECT_EQ(entry.at("text"), "reply");
  EXPECT_TRUE(entry.contains("timestamp"));
  write_text(cache.entry_path(key), "{broken");
  EXPECT_FALSE(cache.load(key));
}

TEST(ChatClient, SecondCallIsServedFromCache) {
  TempDir dir;
  std::atomic<int> calls{0};
  auto opts = no_sleep();
  opts.cache_dir = dir / "cache";
  {
    ChatClient client(opts);
    client.register_backend("b", std::make_shared<FunctionBackend>([&](const ChatRequest&) {
      ++calls;
      return std::string("pong");
    }));
    const auto first = client.complete(simple_request());
    const auto second = client.complete(simple_request());
    EXPECT_FALSE(first.cached);
    EXPECT_TRUE(second.cached);
    EXPECT_EQ(second.text, "pong");
    EXPECT_EQ(calls.load(), 1);
    EXPECT_EQ(client.stats().cache_hits, 1u);
  }
  // A new client over the same directory resumes from the cache.
  ChatClient resumed(opts);
  resumed.register_backend("b", std::make_shared<FunctionBackend>([&](const ChatRequest&) -> std::string {
    throw BackendError("should not be called");
  }));
  EXPECT_EQ(resumed.complete(simple_request()).text, "pong");
}

TEST(ChatClient, RetriesWithExponentialBackoff) {
  std::vector<std::chrono::milliseconds> delays;
  ChatClient client(no_sleep(&delays));
  int calls = 0;
  client.register_backend("b", std::make_shared<FunctionBackend>([&](const ChatRequest&) -> std::string {
    if (++calls < 5) throw BackendError("rate limited", 429, true);
    return "finally";
  }));
  EXPECT_EQ(client.complete(simple_request()).text, "finally");
  EXPECT_EQ(calls, 5);
  using ms = std::chrono::milliseconds;
  EXPECT_EQ(delays, (std::vector<ms>{ms(1000), ms(2000), ms(4000), ms(8000)}));
  EXPECT_EQ(client.stats().retries, 4u);
}

TEST(ChatClient, GivesUpAfterFiveAttempts) {
  ChatClient client(no_sleep());
  int calls = 0;
  client.register_backend("b", std::make_shared<FunctionBackend>([&](const ChatRequest&) -> std::string {
    ++calls;
    throw BackendError("server error", 503, true);
  }));
  try {
    client.complete(simple_request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 503);
    EXPECT_NE(std::string(e.what()).find("5 attempt"), std::string::npos);
  }
  EXPECT_EQ(calls, 5);
}

TEST(ChatClient, AuthFailuresAreNotRetried) {
  ChatClient client(no_sleep());
  int calls = 0;
  client.register_backend("b", std::make_shared<FunctionBackend>([&](const ChatRequest&) -> std::string {
    ++calls;
    throw BackendError("unauthorized", 401, false);
  }));
  EXPECT_THROW(client.complete(simple_request()), BackendError);
  EXPECT_EQ(calls, 1);
}

TEST(ChatClient, RejectsInvalidRequestsAndUnknownBackends) {
  ChatClient client(no_sleep());
  client.register_backend("b", std::make_shared<FunctionBackend>([](const ChatRequest&) { return std::string("x"); }));
  auto bad = simple_request();
  bad.messages.clear();
  EXPECT_THROW(client.complete(bad), BackendError);
  EXPECT_THROW(client.complete(simple_request("missing")), BackendError);
  client.register_backend("empty", std::make_shared<FunctionBackend>([](const ChatRequest&) { return std::string(); }));
  EXPECT_THROW(client.complete(simple_request("empty")), BackendError);
}

TEST(ChatClient, InFlightLimitHoldsForLiveBackends) {
  auto opts = no_sleep();
  opts.max_in_flight = 3;
  ChatClient client(opts);
  std::atomic<int> current{0}, peak{0};
  client.register_backend("live", std::make_shared<FunctionBackend>(
                                      [&](const ChatRequest& req) {
                                        const int now = ++current;
                                        int seen = peak.load();
                                        while (now > seen && !peak.compare_exchange_weak(seen, now)) {
                                        }
                                        std::this_thread::sleep_for(std::chrono::milliseconds(5));
                                        --current;
                                        return req.messages.back().content;
                                      },
                                      true));
  const auto errors = parallel_for(40, 12, [&](std::size_t i) {
    client.complete(simple_request("live", "m" + std::to_string(i)));
  });
  for (const auto& e : errors) EXPECT_FALSE(e);
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
}

TEST(MockBackend, FixtureAndFallback) {
  const auto req = simple_request("mock");
  MockBackend fixed({{cache_key(req), "from fixture"}});
  EXPECT_EQ(fixed.send(req), "from fixture");
  EXPECT_THROW(fixed.send(simple_request("mock", "other")), BackendError);
  MockBackend fallback({}, {"a", "b", "c"});
  const auto r1 = fallback.send(simple_request("mock", "x"));
  EXPECT_EQ(fallback.send(simple_request("mock", "x")), r1);
  std::set<std::string> seen;
  for (int i = 0; i < 50; ++i) seen.insert(fallback.send(simple_request("mock", std::to_string(i))));
  EXPECT_EQ(seen.size(), 3u);
}

TEST(MockBackend, LoadsFixtureFile) {
  TempDir dir;
  const auto req = simple_request("mock");
  write_text(dir / "f.jsonl", json{{"key", cache_key(req)}, {"text", "hi"}}.dump() + "\n");
  BackendSpec spec;
  spec.id = "mock";
  spec.fixture = dir / "f.jsonl";
  EXPECT_EQ(make_backend(spec)->send(req), "hi");
  BackendSpec nothing;
  nothing.id = "mock";
  EXPECT_THROW(make_backend(nothing), BackendError);
}

TEST(OpenAIBackend, ParsesResponses) {
  EXPECT_EQ(OpenAICompatibleBackend::parse_response(R"({"choices":[{"message":{"role":"assistant","content":"hey"}}]})"),
            "hey");
  EXPECT_THROW(OpenAICompatibleBackend::parse_response("{}"), BackendError);
  EXPECT_THROW(OpenAICompatibleBackend::parse_response("not json"), BackendError);
  const auto body = OpenAICompatibleBackend::request_body(simple_request());
  EXPECT_EQ(body.at("model"), "m");
  EXPECT_EQ(body.at("messages").size(), 2u);
  EXPECT_EQ(body.at("messages")[0].at("role"), "system");
  EXPECT_EQ(body.at("max_tokens"), 256);
}

TEST(OpenAIBackend, TalksToLocalServer) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::mutex mu;
  std::string auth_seen;
  json body_seen;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    std::lock_guard lock(mu);
    auth_seen = req.get_header_value("Authorization");
    body_seen = json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"served"}}]})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("GROUNDGAP_TEST_TOKEN", "secret-token", 1);
  BackendSpec spec;
  spec.id = "local";
  spec.kind = BackendKind::openai_compatible;
  spec.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  spec.auth_env = "GROUNDGAP_TEST_TOKEN";
  spec.timeout_seconds = 5;
  ChatClient client(no_sleep());
  client.register_backend(spec);
  const auto res = client.complete(simple_request("local"));
  server.stop();
  th.join();

  EXPECT_EQ(res.text, "served");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(auth_seen, "Bearer secret-token");
  EXPECT_EQ(body_seen.at("messages")[1].at("content"), "hello");
  EXPECT_EQ(client.stats().retries, 1u);
}

TEST(OpenAIBackend, MissingTokenAndBadEndpoint) {
  ::unsetenv("GROUNDGAP_ABSENT_TOKEN");
  BackendSpec spec;
  spec.id = "x";
  spec.kind = BackendKind::openai_compatible;
  spec.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  spec.auth_env = "GROUNDGAP_ABSENT_TOKEN";
  auto backend = make_backend(spec);
  EXPECT_THROW(backend->send(simple_request("x")), BackendError);
  spec.endpoint = "not a url";
  EXPECT_THROW(make_backend(spec), BackendError);
}

namespace {

const char* kTemplate =
    "---\n"
    "name: greet\n"
    "version: \"3\"\n"
    "slots: [name, topic]\n"
    "---\n"
    "### system\n"
    "You talk about {{topic}}.\n"
    "### user\n"
    "Hello {{name}}, tell me about {{ topic }}.\n";

}  // namespace

TEST(PromptTemplate, RendersSections) {
  const auto t = PromptTemplate::parse(kTemplate, "inline");
  EXPECT_EQ(t.version_tag(), "greet@3");
  const auto msgs = t.render({{"name", "Ana"}, {"topic", "tea"}});
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].role, ChatRole::system);
  EXPECT_EQ(msgs[0].content, "You talk about tea.");
  EXPECT_EQ(msgs[1].content, "Hello Ana, tell me about tea.");
}

TEST(PromptTemplate, SlotErrors) {
  const auto t = PromptTemplate::parse(kTemplate, "inline");
  EXPECT_THROW(t.render({{"name", "Ana"}}), TemplateError);
  EXPECT_THROW(t.render({{"name", "Ana"}, {"topic", "tea"}, {"extra", "x"}}), TemplateError);
}

TEST(PromptTemplate, MalformedTemplates) {
  EXPECT_THROW(PromptTemplate::parse("### user\nhi\n", "x"), TemplateError);
  EXPECT_THROW(PromptTemplate::parse("---\nname: a\nversion: 1\nslots: [x]\n---\n### user\n{{y}}\n", "x"),
               TemplateError);
  EXPECT_THROW(PromptTemplate::parse("---\nname: a\nversion: 1\nslots: [x, y]\n---\n### user\n{{x}}\n", "x"),
               TemplateError);
  EXPECT_THROW(PromptTemplate::parse("---\nname: a\nversion: 1\n---\n### wizard\nhi\n", "x"), TemplateError);
}

TEST(PromptTemplate, StoreLoadsBundledTemplates) {
  TemplateStore store(source_dir() / "data" / "templates");
  const auto& few = store.get("classify-v1");
  EXPECT_EQ(few.version_tag(), "classify-v1@1");
  const auto msgs = render_template(store, "classify-zeroshot-v1", {{"context", "seeker: hi"}, {"utterance", "supporter: ok"}});
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_NE(msgs[1].content.find("supporter: ok"), std::string::npos);
  EXPECT_THROW(store.get("missing-template"), TemplateError);
}
