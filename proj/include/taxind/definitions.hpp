#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "taxind/config.hpp"
#include "taxind/llm/gateway.hpp"

namespace taxind {

// ---------------------------------------------------------------------------
// Sources

enum class DefinitionMode { live, snapshot, skip };

struct DefinitionSource {
  DefinitionMode kind = DefinitionMode::skip;
  std::optional<std::string> cache_path;  // snapshot file for DefinitionMode::snapshot
};

/// Parses the --definitions flag: live | snapshot:<path> | skip.
inline DefinitionSource parse_definition_source(const std::string& flag) {
  if (flag == "live") return {DefinitionMode::live, std::nullopt};
  if (flag == "skip") return {DefinitionMode::skip, std::nullopt};
  if (flag.rfind("snapshot:", 0) == 0) {
    auto path = flag.substr(9);
    if (path.empty() || !std::filesystem::exists(path)) {
      throw Error(ErrorCode::ConfigError, "definition snapshot '" + path + "' does not exist");
    }
    return {DefinitionMode::snapshot, path};
  }
  throw Error(ErrorCode::ConfigError, "--definitions must be live, snapshot:<path> or skip");
}

inline std::string to_string(const DefinitionSource& s) {
  switch (s.kind) {
    case DefinitionMode::live: return "live";
    case DefinitionMode::snapshot: return "snapshot";
    case DefinitionMode::skip: return "skip";
  }
  return "unknown";
}

struct Article {
  std::string title;
  std::string extract;
  bool disambiguation = false;
};

/// Encyclopedia lookups used for lexical matching.
class EncyclopediaClient {
 public:
  virtual ~EncyclopediaClient() = default;
  /// Lead summary of the page titled exactly `title`, if any.
  virtual std::optional<Article> summary(const std::string& title) = 0;
  /// Same lookup ignoring letter case.
  virtual std::optional<Article> summary_ignore_case(const std::string& title) = 0;
  /// Title of the best search hit for `query`, if the source supports search.
  virtual std::optional<std::string> top_search_hit(const std::string& query) = 0;
};

/// Offline snapshot: a JSON object title -> lead text, or null for pages known
/// to be disambiguation pages.
class SnapshotEncyclopedia : public EncyclopediaClient {
 public:
  explicit SnapshotEncyclopedia(const std::string& path) {
    auto j = read_json_file(path);
    if (!j.is_object()) throw Error(ErrorCode::ParseError, "snapshot '" + path + "' must be a JSON object");
    for (const auto& [title, text] : j.items()) {
      if (text.is_null()) {
        pages_[normalize_term(title)] = std::nullopt;
      } else if (text.is_string()) {
        pages_[normalize_term(title)] = text.get<std::string>();
      } else {
        throw Error(ErrorCode::ParseError, "snapshot entry '" + title + "' must be a string or null");
      }
    }
  }

  std::optional<Article> summary(const std::string& title) override {
    auto it = pages_.find(title);
    if (it == pages_.end()) return std::nullopt;
    return to_article(it->first, it->second);
  }

  std::optional<Article> summary_ignore_case(const std::string& title) override {
    auto wanted = ascii_lower(title);
    for (const auto& [t, text] : pages_) {
      if (ascii_lower(t) == wanted) return to_article(t, text);
    }
    return std::nullopt;
  }

  std::optional<std::string> top_search_hit(const std::string&) override { return std::nullopt; }

 private:
  static Article to_article(const std::string& title, const std::optional<std::string>& text) {
    return text ? Article{title, *text, false} : Article{title, "", true};
  }

  std::map<std::string, std::optional<std::string>> pages_;
};

/// Retrieves raw definitions by lexical matching (exact title, then
/// case-insensitive title, then top search hit). Disambiguation pages count as
/// absent. Results are cached per term.
class DefinitionRetriever {
 public:
  explicit DefinitionRetriever(std::shared_ptr<EncyclopediaClient> client) : client_(std::move(client)) {}

  std::optional<std::string> retrieve(const std::string& term) {
    {
      std::shared_lock lock(mutex_);
      if (auto it = cache_.find(term); it != cache_.end()) return it->second;
    }
    ++lookups_;
    std::optional<std::string> found;
    if (client_) {
      auto article = client_->summary(term);
      if (!article) article = client_->summary_ignore_case(term);
      if (!article) {
        if (auto hit = client_->top_search_hit(term)) article = client_->summary(*hit);
      }
      if (article && !article->disambiguation && !trim(article->extract).empty()) {
        found = single_paragraph(article->extract);
      }
    }
    std::unique_lock lock(mutex_);
    cache_.emplace(term, found);
    return found;
  }

  void seed(const std::string& term, std::optional<std::string> raw) {
    std::unique_lock lock(mutex_);
    cache_[term] = std::move(raw);
  }

  /// Lookups that missed the cache.
  std::size_t lookups() const { return lookups_.load(); }

 private:
  std::shared_ptr<EncyclopediaClient> client_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::optional<std::string>> cache_;
  std::atomic<std::size_t> lookups_{0};
};

// ---------------------------------------------------------------------------
// Cache file: term -> {"raw": str|null, "refined": str}

struct DefinitionEntry {
  std::optional<std::string> raw;
  std::string refined;
  bool operator==(const DefinitionEntry&) const = default;
};

using DefinitionCache = std::map<std::string, DefinitionEntry>;

inline json to_json(const DefinitionCache& cache) {
  json out = json::object();
  for (const auto& [term, e] : cache) {
    out[term] = json{{"raw", e.raw ? json(*e.raw) : json(nullptr)}, {"refined", e.refined}};
  }
  return out;
}

inline DefinitionCache definition_cache_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "definition cache must be a JSON object");
  DefinitionCache cache;
  for (const auto& [term, e] : j.items()) {
    if (!e.is_object() || !e.contains("refined") || !e["refined"].is_string()) {
      throw Error(ErrorCode::ParseError, "definition cache entry '" + term + "' needs string \"refined\"");
    }
    DefinitionEntry entry;
    if (e.contains("raw") && e["raw"].is_string()) entry.raw = e["raw"].get<std::string>();
    entry.refined = e["refined"].get<std::string>();
    cache[term] = std::move(entry);
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Refinement

inline llm::ChatRequest refine_definition_request(const std::string& term, const std::optional<std::string>& raw,
                                                  const std::string& root, const std::string& root_definition,
                                                  const PipelineConfig& config) {
  if (root.empty()) throw Error(ErrorCode::ConfigError, "refine_definition needs a root topic");
  llm::ChatRequest req;
  req.model_id = config.provider.large_model;
  req.schema = llm::ResponseSchema::refine_definition;
  req.seed = config.seed;
  req.max_output_tokens = 256;
  req.system_prompt =
      "You are a lexicographer. You write precise definitions of terms as they are used within a given "
      "root topic.";
  req.user_prompt = "Root topic: " + root + "\nRoot definition: " + root_definition + "\nTarget term: " + term +
                    "\nCurrent definition: " + raw.value_or("") +
                    "\n\nRewrite the definition of the target term so that it describes the sense of the term "
                    "that belongs to the root topic. The current definition may be missing, ambiguous, too "
                    "verbose or too brief; fix these problems. Write one paragraph of at most " +
                    std::to_string(config.definition_max_words) +
                    " words.\nRespond with a JSON object of the form {\"definition\": \"...\"} and nothing else.";
  req.context = json{{"stage", "definitions"}, {"term", term}, {"root", root}};
  return req;
}

/// Refined, single-paragraph definition of `term` within the root topic.
inline std::string refine_definition(const std::string& term, const std::optional<std::string>& raw,
                                     const std::string& root, const std::string& root_definition,
                                     llm::LlmGateway& gateway, const PipelineConfig& config) {
  auto req = refine_definition_request(term, raw, root, root_definition, config);
  llm::ParseOptions parse;
  parse.definition_hard_cap_words = static_cast<std::size_t>(config.definition_hard_cap_words);
  return std::get<std::string>(gateway.chat_structured(req, parse));
}

}  // namespace taxind
