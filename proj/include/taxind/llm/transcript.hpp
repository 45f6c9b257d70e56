#pragma once

#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>

#include "taxind/llm/protocol.hpp"

namespace taxind::llm {

enum class LlmMode { live, record, replay };

inline std::string to_string(LlmMode m) {
  switch (m) {
    case LlmMode::live: return "live";
    case LlmMode::record: return "record";
    case LlmMode::replay: return "replay";
  }
  return "unknown";
}

inline LlmMode parse_llm_mode(const std::string& s) {
  if (s == "live") return LlmMode::live;
  if (s == "record") return LlmMode::record;
  if (s == "replay") return LlmMode::replay;
  throw Error(ErrorCode::ConfigError, "unknown --llm-mode '" + s + "'");
}

/// Request digest -> stored response. Concurrent lookups are allowed; inserts
/// are serialized. Saved files list entries in digest order.
class Transcript {
 public:
  struct Entry {
    json request;
    std::string response;
  };

  Transcript() = default;
  Transcript(Transcript&& other) noexcept : entries_(std::move(other.entries_)) {}
  Transcript& operator=(Transcript&& other) noexcept {
    std::unique_lock lock(mutex_);
    entries_ = std::move(other.entries_);
    return *this;
  }

  static Transcript load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open transcript '" + path + "'");
    Transcript t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("digest") || !j.contains("response") ||
          !j["digest"].is_string() || !j["response"].is_string()) {
        throw Error(ErrorCode::ParseError, path + ":" + std::to_string(lineno) + ": bad transcript line");
      }
      t.entries_[j["digest"].get<std::string>()] =
          Entry{j.value("request", json::object()), j["response"].get<std::string>()};
    }
    return t;
  }

  std::optional<std::string> find(const std::string& digest) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second.response;
  }

  void insert(const std::string& digest, json request, std::string response) {
    std::unique_lock lock(mutex_);
    entries_[digest] = Entry{std::move(request), std::move(response)};
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

  std::string serialize() const {
    std::shared_lock lock(mutex_);
    std::ostringstream out;
    for (const auto& [d, e] : entries_) {
      out << json{{"digest", d}, {"request", e.request}, {"response", e.response}}.dump() << '\n';
    }
    return out.str();
  }

  /// Digest of the serialized form; identifies the transcript in run manifests.
  std::string content_digest() const { return sha256_hex(serialize()); }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::ConfigError, "cannot write transcript '" + path + "'");
    out << serialize();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, Entry> entries_;
};

}  // namespace taxind::llm
