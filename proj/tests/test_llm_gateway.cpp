#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "support.hpp"
#include "taxind/llm/gateway.hpp"
#include "taxind/llm/hashing_embedder.hpp"
#include "taxind/llm/http_backend.hpp"
#include "taxind/parallel.hpp"

using namespace taxind;
using namespace taxind::llm;
using testing_support::ScriptedChat;
using testing_support::ScriptedEmbedder;

namespace {

ChatRequest isa(const std::string& query) {
  ChatRequest r;
  r.model_id = "small";
  r.system_prompt = "judge";
  r.user_prompt = "Is " + query + " an animal?";
  r.schema = ResponseSchema::isa_judgment;
  r.context = json{{"query", query}};
  return r;
}

GatewayOptions opts(LlmMode mode) {
  GatewayOptions o;
  o.mode = mode;
  o.backoff_ms = 1;
  return o;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(Gateway, RecordThenReplayWithoutNetwork) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&, int) { return "{\"answer\":\"yes\"}"; });
  auto transcript = std::make_shared<Transcript>();
  LlmGateway recorder(opts(LlmMode::record), transcript, chat);
  EXPECT_EQ(recorder.chat(isa("dog")), "{\"answer\":\"yes\"}");
  EXPECT_EQ(recorder.chat(isa("dog")), "{\"answer\":\"yes\"}");
  EXPECT_EQ(chat->calls(), 1);  // the second call is served from the transcript

  LlmGateway replay(opts(LlmMode::replay), transcript);
  EXPECT_EQ(replay.chat(isa("dog")), "{\"answer\":\"yes\"}");
  EXPECT_EQ(replay.network_calls(), 0u);
}

TEST(Gateway, ReplayMissNamesDigest) {
  LlmGateway replay(opts(LlmMode::replay), std::make_shared<Transcript>());
  try {
    replay.chat(isa("cat"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingReplayEntry);
    EXPECT_NE(std::string(e.what()).find(digest(isa("cat"))), std::string::npos);
  }
}

TEST(Gateway, LiveModeDoesNotRecord) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&, int) { return "x"; });
  auto transcript = std::make_shared<Transcript>();
  LlmGateway live(opts(LlmMode::live), transcript, chat);
  live.chat(isa("dog"));
  live.chat(isa("dog"));
  EXPECT_EQ(chat->calls(), 2);
  EXPECT_EQ(transcript->size(), 0u);
}

TEST(Gateway, RetriesTransportErrorsWithBackoff) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&, int call) -> std::string {
    if (call < 2) throw Error(ErrorCode::TransportError, "flaky");
    return "ok";
  });
  LlmGateway gw(opts(LlmMode::live), nullptr, chat);
  EXPECT_EQ(gw.chat(isa("dog")), "ok");
  EXPECT_EQ(chat->calls(), 3);
}

TEST(Gateway, GivesUpAfterMaxRetries) {
  auto chat = std::make_shared<ScriptedChat>(
      [](const ChatRequest&, int) -> std::string { throw Error(ErrorCode::TransportError, "down"); });
  auto o = opts(LlmMode::live);
  o.max_retries = 2;
  LlmGateway gw(o, nullptr, chat);
  EXPECT_EQ(code_of([&] { gw.chat(isa("dog")); }), ErrorCode::TransportError);
  EXPECT_EQ(chat->calls(), 3);
}

TEST(Gateway, AuthErrorsAreNotRetried) {
  auto chat = std::make_shared<ScriptedChat>(
      [](const ChatRequest&, int) -> std::string { throw Error(ErrorCode::AuthError, "bad key"); });
  LlmGateway gw(opts(LlmMode::live), nullptr, chat);
  EXPECT_EQ(code_of([&] { gw.chat(isa("dog")); }), ErrorCode::AuthError);
  EXPECT_EQ(chat->calls(), 1);
}

TEST(Gateway, ReprompsOnceOnBadOutput) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest& r, int) -> std::string {
    bool reminded = r.user_prompt.ends_with(kJsonReminder);
    return reminded ? "{\"answer\": \"no\"}" : "I think so";
  });
  LlmGateway gw(opts(LlmMode::record), nullptr, chat);
  EXPECT_FALSE(std::get<bool>(gw.chat_structured(isa("dog"), {})));
  EXPECT_EQ(chat->calls(), 2);
  EXPECT_EQ(gw.transcript().size(), 2u);
}

TEST(Gateway, SecondBadOutputIsHardErrorWithRawText) {
  auto chat = std::make_shared<ScriptedChat>([](const ChatRequest&, int) { return "still not json"; });
  LlmGateway gw(opts(LlmMode::live), nullptr, chat);
  try {
    gw.chat_structured(isa("dog"), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("still not json"), std::string::npos);
  }
  EXPECT_EQ(chat->calls(), 2);
}

TEST(Gateway, BoundsInFlightCalls) {
  std::atomic<int> current{0};
  std::atomic<int> peak{0};
  auto chat = std::make_shared<ScriptedChat>([&](const ChatRequest&, int) {
    int now = ++current;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --current;
    return std::string("{\"answer\":\"yes\"}");
  });
  auto o = opts(LlmMode::live);
  o.max_in_flight = 2;
  LlmGateway gw(o, nullptr, chat);
  parallel_for(24, 8, [&](std::size_t i) { gw.chat(isa("t" + std::to_string(i))); });
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(chat->calls(), 24);
}

TEST(GatewayEmbed, UnitNormInInputOrder) {
  auto embedder = std::make_shared<ScriptedEmbedder>([](const std::string& t) {
    return t == "a" ? std::vector<double>{3.0, 4.0} : std::vector<double>{0.0, 10.0};
  });
  LlmGateway gw(opts(LlmMode::record), nullptr, nullptr, embedder);
  auto v = gw.embed({"a", "b"});
  ASSERT_EQ(v.size(), 2u);
  EXPECT_NEAR(v[0][0], 0.6, 1e-12);
  EXPECT_NEAR(v[1][1], 1.0, 1e-12);
  for (const auto& x : v) EXPECT_NEAR(l2_norm(x), 1.0, 1e-6);
  EXPECT_EQ(gw.embed({"a"}), std::vector<std::vector<double>>{v[0]});
  EXPECT_EQ(embedder->batches(), 1);
}

TEST(GatewayEmbed, BatchesAndReplays) {
  auto embedder = std::make_shared<HashingEmbedder>();
  auto o = opts(LlmMode::record);
  o.embedding_batch = 3;
  auto transcript = std::make_shared<Transcript>();
  LlmGateway gw(o, transcript, nullptr, embedder);
  std::vector<std::string> texts{"dog: a pet", "cat: a pet", "eagle: a bird", "oak: a tree", "fir: a tree"};
  auto recorded = gw.embed(texts);
  EXPECT_EQ(gw.network_calls(), 2u);
  LlmGateway replay(opts(LlmMode::replay), transcript);
  EXPECT_EQ(replay.embed(texts), recorded);
  EXPECT_EQ(replay.network_calls(), 0u);
}

TEST(GatewayEmbed, InconsistentDimensions) {
  auto embedder = std::make_shared<ScriptedEmbedder>([](const std::string& t) {
    return t == "a" ? std::vector<double>{1.0, 0.0} : std::vector<double>{1.0, 0.0, 0.0};
  });
  LlmGateway gw(opts(LlmMode::live), nullptr, nullptr, embedder);
  EXPECT_EQ(code_of([&] { gw.embed({"a", "b"}); }), ErrorCode::DimensionMismatch);
}

TEST(GatewayEmbed, RejectsEmptyInput) {
  LlmGateway gw(opts(LlmMode::live), nullptr);
  EXPECT_THROW(gw.embed({}), Error);
  EXPECT_THROW(gw.embed({""}), Error);
}

TEST(TranscriptFile, SortedJsonlRoundTrip) {
  testing_support::TempDir dir;
  Transcript t;
  t.insert("bbb", json{{"kind", "chat"}}, "two");
  t.insert("aaa", json{{"kind", "chat"}}, "one");
  t.save(dir / "t.jsonl");
  auto text = testing_support::slurp(dir.path() / "t.jsonl");
  EXPECT_LT(text.find("aaa"), text.find("bbb"));
  auto loaded = Transcript::load(dir / "t.jsonl");
  EXPECT_EQ(loaded.find("aaa"), "one");
  EXPECT_EQ(loaded.content_digest(), t.content_digest());
}

TEST(TranscriptFile, BadLineIsParseError) {
  testing_support::TempDir dir;
  testing_support::write_file(dir.path() / "t.jsonl", "{\"digest\": 1}\n");
  EXPECT_EQ(code_of([&] { Transcript::load(dir / "t.jsonl"); }), ErrorCode::ParseError);
}

// ---------------------------------------------------------------------------
// HTTP backends against a local server

class HttpBackendTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = json::parse(req.body);
      if (status_ != 200) {
        res.status = status_;
        return;
      }
      json reply{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", "{\"answer\":\"yes\"}"}}}}})}};
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      auto body = json::parse(req.body);
      json data = json::array();
      int n = static_cast<int>(body["input"].size());
      // Returned out of order; the client must sort by index.
      for (int i = n - 1; i >= 0; --i) data.push_back(json{{"index", i}, {"embedding", {double(i + 1), 0.0}}});
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int status_ = 200;
  std::string last_auth_;
  json last_body_;
};

TEST_F(HttpBackendTest, ChatCompletion) {
  HttpChatBackend chat(base(), "secret", 5);
  auto r = isa("dog");
  r.seed = 3;
  EXPECT_EQ(chat.complete(r), "{\"answer\":\"yes\"}");
  EXPECT_EQ(last_auth_, "Bearer secret");
  EXPECT_EQ(last_body_["model"], "small");
  EXPECT_EQ(last_body_["temperature"], 0.0);
  EXPECT_EQ(last_body_["messages"][1]["content"], r.user_prompt);
}

TEST_F(HttpBackendTest, StatusCodesMapToErrors) {
  HttpChatBackend chat(base(), "secret", 5);
  status_ = 429;
  EXPECT_EQ(code_of([&] { chat.complete(isa("dog")); }), ErrorCode::TransportError);
  status_ = 401;
  EXPECT_EQ(code_of([&] { chat.complete(isa("dog")); }), ErrorCode::AuthError);
  status_ = 400;
  EXPECT_EQ(code_of([&] { chat.complete(isa("dog")); }), ErrorCode::ConfigError);
}

TEST_F(HttpBackendTest, GatewayRetriesServerErrors) {
  std::atomic<int> hits{0};
  server_.Post("/v1/flaky/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (hits++ < 1) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"content":"{\"answer\":\"no\"}"}}]})", "application/json");
  });
  auto backend = std::make_shared<HttpChatBackend>(base() + "/flaky", "k", 5);
  LlmGateway gw(opts(LlmMode::live), nullptr, backend);
  EXPECT_FALSE(std::get<bool>(gw.chat_structured(isa("dog"), {})));
  EXPECT_EQ(hits.load(), 2);
}

TEST_F(HttpBackendTest, EmbeddingsInIndexOrder) {
  HttpEmbeddingBackend embed(base(), "secret", 5);
  auto v = embed.embed({"a", "b", "c"}, "mpnet");
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v[0][0], 1.0);
  EXPECT_EQ(v[2][0], 3.0);
}

TEST(HttpBackend, ConnectionRefusedIsTransportError) {
  httplib::Server probe;
  int port = probe.bind_to_any_port("127.0.0.1");
  probe.stop();
  HttpChatBackend chat("http://127.0.0.1:" + std::to_string(port) + "/v1", "k", 1);
  EXPECT_EQ(code_of([&] { chat.complete(isa("dog")); }), ErrorCode::TransportError);
}
