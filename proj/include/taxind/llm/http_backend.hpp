#pragma once

#include <cstdlib>
#include <memory>
#include <string>
#include <vector>

#include "httplib.h"
#include "taxind/llm/gateway.hpp"

namespace taxind::llm {

/// "https://host[:port]/prefix" -> {"https://host[:port]", "/prefix"}.
struct BaseUrl {
  std::string origin;
  std::string path;
};

inline BaseUrl split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigError, "endpoint needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  auto path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

/// Maps an HTTP outcome onto gateway error codes: 401/403 are auth failures,
/// 408/429/5xx and connection failures are transient.
inline void check_http_result(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::TransportError, what + ": " + httplib::to_string(res.error()));
  }
  int status = res->status;
  if (status == 401 || status == 403) {
    throw Error(ErrorCode::AuthError, what + ": HTTP " + std::to_string(status));
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw Error(ErrorCode::TransportError, what + ": HTTP " + std::to_string(status));
  }
  if (status < 200 || status >= 300) {
    throw Error(ErrorCode::ConfigError, what + ": HTTP " + std::to_string(status) + " " + res->body);
  }
}

inline std::unique_ptr<httplib::Client> make_client(const BaseUrl& base, int timeout_s) {
  auto client = std::make_unique<httplib::Client>(base.origin);
  client->set_connection_timeout(timeout_s, 0);
  client->set_read_timeout(timeout_s, 0);
  client->set_write_timeout(timeout_s, 0);
  return client;
}

inline std::string api_key_from_env(const std::string& var) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  return v ? std::string(v) : std::string();
}

/// Chat-completions compatible endpoint (POST {base}/chat/completions).
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::string base_url, std::string api_key, int timeout_s = 60)
      : base_(split_base_url(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

  std::string complete(const ChatRequest& request) override {
    json body{{"model", request.model_id},
              {"messages",
               json::array({json{{"role", "system"}, {"content", request.system_prompt}},
                            json{{"role", "user"}, {"content", request.user_prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens},
              {"seed", request.seed}};
    auto client = make_client(base_, timeout_s_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client->Post(base_.path + "/chat/completions", headers, body.dump(), "application/json");
    check_http_result(res, "chat completion");
    auto reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty()) {
      throw Error(ErrorCode::TransportError, "malformed chat completion body");
    }
    const auto& message = reply["choices"][0]["message"];
    if (!message.contains("content") || !message["content"].is_string()) {
      throw Error(ErrorCode::TransportError, "chat completion has no text content");
    }
    return message["content"].get<std::string>();
  }

 private:
  BaseUrl base_;
  std::string api_key_;
  int timeout_s_;
};

/// Embeddings endpoint (POST {base}/embeddings).
class HttpEmbeddingBackend : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(std::string base_url, std::string api_key, int timeout_s = 60)
      : base_(split_base_url(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const std::string& model) override {
    json body{{"model", model}, {"input", texts}};
    auto client = make_client(base_, timeout_s_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto res = client->Post(base_.path + "/embeddings", headers, body.dump(), "application/json");
    check_http_result(res, "embedding");
    auto reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("data") || !reply["data"].is_array()) {
      throw Error(ErrorCode::TransportError, "malformed embedding body");
    }
    std::vector<std::vector<double>> out(texts.size());
    std::size_t pos = 0;
    for (const auto& item : reply["data"]) {
      std::size_t index = item.value("index", pos);
      if (index >= out.size()) throw Error(ErrorCode::DimensionMismatch, "embedding index out of range");
      out[index] = item.at("embedding").get<std::vector<double>>();
      ++pos;
    }
    for (const auto& v : out) {
      if (v.empty()) throw Error(ErrorCode::DimensionMismatch, "provider omitted an embedding");
    }
    return out;
  }

 private:
  BaseUrl base_;
  std::string api_key_;
  int timeout_s_;
};

}  // namespace taxind::llm
