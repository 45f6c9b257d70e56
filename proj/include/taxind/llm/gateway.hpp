#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#include "taxind/llm/protocol.hpp"
#include "taxind/llm/transcript.hpp"

namespace taxind::llm {

/// Chat-completion provider. Implementations throw Error with TransportError
/// (retryable) or AuthError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Embedding provider; returns one raw (not necessarily normalized) vector per text.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                                 const std::string& model) = 0;
};

struct GatewayOptions {
  LlmMode mode = LlmMode::replay;
  int max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 500;
  std::string embedding_model = "all-mpnet-base-v2";
  int embedding_batch = 64;
};

inline constexpr const char* kJsonReminder = "\n\nReturn only valid JSON.";

inline std::vector<double> unit_normalize(std::vector<double> v) {
  double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw Error(ErrorCode::DimensionMismatch, "embedding has zero or non-finite norm");
  }
  for (auto& x : v) x /= n;
  return v;
}

/// Single access point for chat and embedding calls: digesting, record/replay,
/// bounded concurrency, retries and structured-output reprompting.
class LlmGateway {
 public:
  LlmGateway(GatewayOptions options, std::shared_ptr<Transcript> transcript,
             std::shared_ptr<ChatBackend> chat_backend = nullptr,
             std::shared_ptr<EmbeddingBackend> embedding_backend = nullptr)
      : options_(std::move(options)),
        transcript_(transcript ? std::move(transcript) : std::make_shared<Transcript>()),
        chat_backend_(std::move(chat_backend)),
        embedding_backend_(std::move(embedding_backend)),
        in_flight_(std::max(1, options_.max_in_flight)) {}

  const GatewayOptions& options() const { return options_; }
  Transcript& transcript() { return *transcript_; }
  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t chat_calls() const { return chat_calls_.load(); }

  std::string chat(const ChatRequest& request) {
    ++chat_calls_;
    auto normalized = to_json(request);
    auto key = digest(normalized);
    if (options_.mode != LlmMode::live) {
      if (auto hit = transcript_->find(key)) return *hit;
      if (options_.mode == LlmMode::replay) {
        throw Error(ErrorCode::MissingReplayEntry,
                    "no transcript entry for digest " + key + " (" + to_string(request.schema) + " " +
                        request.context.dump() + ")");
      }
    }
    if (!chat_backend_) throw Error(ErrorCode::TransportError, "no chat backend configured");
    auto text = with_retries([&] { return chat_backend_->complete(request); });
    if (options_.mode == LlmMode::record) transcript_->insert(key, normalized, text);
    return text;
  }

  /// Chat plus structured parsing. A parse/schema/vocabulary failure triggers
  /// one reprompt with a JSON reminder; a second failure is rethrown with the
  /// raw text attached.
  StructuredValue chat_structured(const ChatRequest& request, const ParseOptions& parse) {
    auto raw = chat(request);
    try {
      return parse_structured(raw, request.schema, parse);
    } catch (const Error& first) {
      if (!is_output_error(first.code())) throw;
    }
    ChatRequest retry = request;
    retry.user_prompt += kJsonReminder;
    raw = chat(retry);
    try {
      return parse_structured(raw, request.schema, parse);
    } catch (const Error& second) {
      if (!is_output_error(second.code())) throw;
      throw Error(second.code(), std::string(second.what()) + "; raw response: " + raw);
    }
  }

  /// Unit-normalized embeddings in input order.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) {
    if (texts.empty()) throw Error(ErrorCode::ConfigError, "embed() needs at least one text");
    for (const auto& t : texts) {
      if (t.empty()) throw Error(ErrorCode::ConfigError, "embed() text must be non-empty");
    }
    std::vector<std::optional<std::vector<double>>> raw(texts.size());
    std::vector<std::string> keys(texts.size());
    std::vector<std::size_t> missing;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      keys[i] = digest(embedding_request_json(options_.embedding_model, texts[i]));
      if (options_.mode != LlmMode::live) {
        if (auto hit = transcript_->find(keys[i])) {
          raw[i] = json::parse(*hit).get<std::vector<double>>();
          continue;
        }
        if (options_.mode == LlmMode::replay) {
          throw Error(ErrorCode::MissingReplayEntry,
                      "no transcript entry for digest " + keys[i] + " (embedding of \"" + texts[i] + "\")");
        }
      }
      missing.push_back(i);
    }
    if (!missing.empty() && !embedding_backend_) {
      throw Error(ErrorCode::TransportError, "no embedding backend configured");
    }
    const std::size_t batch = static_cast<std::size_t>(std::max(1, options_.embedding_batch));
    for (std::size_t start = 0; start < missing.size(); start += batch) {
      std::vector<std::string> chunk;
      for (std::size_t j = start; j < std::min(missing.size(), start + batch); ++j) {
        chunk.push_back(texts[missing[j]]);
      }
      auto vectors = with_retries([&] { return embedding_backend_->embed(chunk, options_.embedding_model); });
      if (vectors.size() != chunk.size()) {
        throw Error(ErrorCode::DimensionMismatch, "provider returned " + std::to_string(vectors.size()) +
                                                      " vectors for " + std::to_string(chunk.size()) + " texts");
      }
      for (std::size_t j = 0; j < chunk.size(); ++j) {
        std::size_t i = missing[start + j];
        if (options_.mode == LlmMode::record) {
          transcript_->insert(keys[i], embedding_request_json(options_.embedding_model, texts[i]),
                              json(vectors[j]).dump());
        }
        raw[i] = std::move(vectors[j]);
      }
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (auto& v : raw) {
      if (!out.empty() && v->size() != out.front().size()) {
        throw Error(ErrorCode::DimensionMismatch, "inconsistent embedding dimensions " +
                                                      std::to_string(out.front().size()) + " vs " +
                                                      std::to_string(v->size()));
      }
      out.push_back(unit_normalize(std::move(*v)));
    }
    return out;
  }

 private:
  template <class Fn>
  auto with_retries(Fn&& fn) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
      in_flight_.acquire();
      try {
        ++network_calls_;
        auto result = fn();
        in_flight_.release();
        return result;
      } catch (const Error& e) {
        in_flight_.release();
        if (e.code() != ErrorCode::TransportError || attempt >= options_.max_retries) {
          if (e.code() == ErrorCode::TransportError && attempt > 0) {
            throw Error(ErrorCode::TransportError,
                        std::string(e.what()) + " (after " + std::to_string(attempt + 1) + " attempts)");
          }
          throw;
        }
      } catch (...) {
        in_flight_.release();
        throw;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(options_.backoff_ms) << attempt));
    }
  }

  GatewayOptions options_;
  std::shared_ptr<Transcript> transcript_;
  std::shared_ptr<ChatBackend> chat_backend_;
  std::shared_ptr<EmbeddingBackend> embedding_backend_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> chat_calls_{0};
};

}  // namespace taxind::llm
