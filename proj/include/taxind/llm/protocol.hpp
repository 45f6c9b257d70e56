#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "taxind/core.hpp"

namespace taxind::llm {

enum class ResponseSchema { refine_definition, isa_judgment, rank_and_score, penalty };

inline std::string to_string(ResponseSchema s) {
  switch (s) {
    case ResponseSchema::refine_definition: return "refine_definition";
    case ResponseSchema::isa_judgment: return "isa_judgment";
    case ResponseSchema::rank_and_score: return "rank_and_score";
    case ResponseSchema::penalty: return "penalty";
  }
  return "unknown";
}

inline ResponseSchema parse_schema(const std::string& s) {
  if (s == "refine_definition") return ResponseSchema::refine_definition;
  if (s == "isa_judgment") return ResponseSchema::isa_judgment;
  if (s == "rank_and_score") return ResponseSchema::rank_and_score;
  if (s == "penalty") return ResponseSchema::penalty;
  throw Error(ErrorCode::SchemaError, "unknown response schema '" + s + "'");
}

/// One chat-completion call. `context` carries structured metadata about the
/// call (child, anchor, candidates, ...); it is part of the digest and lets
/// offline responders answer without parsing prompt text.
struct ChatRequest {
  std::string model_id;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_output_tokens = 512;
  ResponseSchema schema = ResponseSchema::isa_judgment;
  json context = json::object();
  std::uint64_t seed = 0;
};

inline json to_json(const ChatRequest& r) {
  return json{{"kind", "chat"},
              {"model_id", r.model_id},
              {"system_prompt", r.system_prompt},
              {"user_prompt", r.user_prompt},
              {"temperature", r.temperature},
              {"max_output_tokens", r.max_output_tokens},
              {"response_schema", to_string(r.schema)},
              {"context", r.context},
              {"seed", r.seed}};
}

inline ChatRequest chat_request_from_json(const json& j) {
  ChatRequest r;
  r.model_id = j.at("model_id").get<std::string>();
  r.system_prompt = j.at("system_prompt").get<std::string>();
  r.user_prompt = j.at("user_prompt").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.max_output_tokens = j.at("max_output_tokens").get<int>();
  r.schema = parse_schema(j.at("response_schema").get<std::string>());
  r.context = j.value("context", json::object());
  r.seed = j.value("seed", std::uint64_t{0});
  return r;
}

/// Stable digest: SHA-256 of the canonical (key-sorted, compact) JSON form.
inline std::string digest(const json& normalized_request) { return sha256_hex(normalized_request.dump()); }

inline std::string digest(const ChatRequest& r) { return digest(to_json(r)); }

inline json embedding_request_json(const std::string& model, const std::string& text) {
  return json{{"kind", "embedding"}, {"model", model}, {"text", text}};
}

// ---------------------------------------------------------------------------
// Structured output parsing

/// Finds the first balanced, parseable JSON object in `raw`. Surrounding prose
/// and markdown fences are ignored.
inline json extract_json_object(std::string_view raw) {
  for (std::size_t start = raw.find('{'); start != std::string_view::npos;
       start = raw.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto parsed = json::parse(raw.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object()) return parsed;
          break;
        }
      }
    }
  }
  throw Error(ErrorCode::ParseError, "no JSON object in response: " + std::string(raw.substr(0, 200)));
}

/// Legal score range for ranking confidences: the open interval (0,1).
inline constexpr double kScoreEpsilon = 1e-6;
inline constexpr double kMaxPenalty = 0.5;

inline double clamp_confidence(double s) { return std::clamp(s, kScoreEpsilon, 1.0 - kScoreEpsilon); }
inline double clamp_penalty(double p) { return std::clamp(p, 0.0, kMaxPenalty); }

struct ScoredParent {
  std::string parent;
  double score = 0.0;
  bool operator==(const ScoredParent&) const = default;
};

using Vocabulary = std::set<std::string>;

namespace detail {

inline void require_keys(const json& obj, std::initializer_list<const char*> keys, const char* what) {
  for (const char* k : keys) {
    if (!obj.contains(k)) throw Error(ErrorCode::SchemaError, std::string(what) + ": missing field '" + k + "'");
  }
  for (const auto& [k, _] : obj.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
      throw Error(ErrorCode::SchemaError, std::string(what) + ": unexpected field '" + k + "'");
    }
  }
}

inline double require_number(const json& v, const char* what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      double d = std::stod(v.get<std::string>(), &used);
      if (used == v.get<std::string>().size()) return d;
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::SchemaError, std::string(what) + " must be a number, got " + v.dump());
}

inline std::string require_term(const json& v, const Vocabulary& vocab, const char* what) {
  if (!v.is_string()) throw Error(ErrorCode::SchemaError, std::string(what) + " must be a string");
  auto name = normalize_term(v.get<std::string>());
  if (!vocab.count(name)) throw Error(ErrorCode::VocabularyError, "unknown term \"" + name + "\"");
  return name;
}

}  // namespace detail

/// {"definition": str} -> single-paragraph text truncated to `hard_cap_words`.
inline std::string parse_definition(std::string_view raw, std::size_t hard_cap_words) {
  auto obj = extract_json_object(raw);
  detail::require_keys(obj, {"definition"}, "refine_definition");
  if (!obj["definition"].is_string()) throw Error(ErrorCode::SchemaError, "definition must be a string");
  auto text = truncate_words(obj["definition"].get<std::string>(), hard_cap_words);
  if (text.empty()) throw Error(ErrorCode::SchemaError, "definition is empty");
  return text;
}

/// {"answer": "yes"|"no"} (booleans accepted) -> judgment.
inline bool parse_judgment(std::string_view raw) {
  auto obj = extract_json_object(raw);
  detail::require_keys(obj, {"answer"}, "isa_judgment");
  const auto& a = obj["answer"];
  if (a.is_boolean()) return a.get<bool>();
  if (a.is_string()) {
    auto s = ascii_lower(trim(a.get<std::string>()));
    if (s == "yes" || s == "true") return true;
    if (s == "no" || s == "false") return false;
  }
  throw Error(ErrorCode::SchemaError, "answer must be yes or no, got " + a.dump());
}

/// {"parents": [{"parent": str, "score": num}]} -> clamped confidences, in
/// response order. Names outside `vocab` raise VocabularyError.
inline std::vector<ScoredParent> parse_ranking(std::string_view raw, const Vocabulary& vocab) {
  auto obj = extract_json_object(raw);
  detail::require_keys(obj, {"parents"}, "rank_and_score");
  if (!obj["parents"].is_array()) throw Error(ErrorCode::SchemaError, "parents must be an array");
  std::vector<ScoredParent> out;
  for (const auto& item : obj["parents"]) {
    if (!item.is_object()) throw Error(ErrorCode::SchemaError, "parents entries must be objects");
    detail::require_keys(item, {"parent", "score"}, "rank_and_score entry");
    auto name = detail::require_term(item["parent"], vocab, "parent");
    out.push_back({name, clamp_confidence(detail::require_number(item["score"], "score"))});
  }
  return out;
}

/// {"penalties": [{"parent": str, "penalty": num}]} -> parent -> penalty in [0, 0.5].
inline std::map<std::string, double> parse_penalties(std::string_view raw, const Vocabulary& vocab) {
  auto obj = extract_json_object(raw);
  detail::require_keys(obj, {"penalties"}, "penalty");
  if (!obj["penalties"].is_array()) throw Error(ErrorCode::SchemaError, "penalties must be an array");
  std::map<std::string, double> out;
  for (const auto& item : obj["penalties"]) {
    if (!item.is_object()) throw Error(ErrorCode::SchemaError, "penalties entries must be objects");
    detail::require_keys(item, {"parent", "penalty"}, "penalty entry");
    auto name = detail::require_term(item["parent"], vocab, "parent");
    out[name] = clamp_penalty(detail::require_number(item["penalty"], "penalty"));
  }
  return out;
}

using StructuredValue =
    std::variant<std::string, bool, std::vector<ScoredParent>, std::map<std::string, double>>;

struct ParseOptions {
  Vocabulary vocabulary;
  std::size_t definition_hard_cap_words = 100;
};

inline StructuredValue parse_structured(std::string_view raw, ResponseSchema schema, const ParseOptions& opts) {
  switch (schema) {
    case ResponseSchema::refine_definition: return parse_definition(raw, opts.definition_hard_cap_words);
    case ResponseSchema::isa_judgment: return parse_judgment(raw);
    case ResponseSchema::rank_and_score: return parse_ranking(raw, opts.vocabulary);
    case ResponseSchema::penalty: return parse_penalties(raw, opts.vocabulary);
  }
  throw Error(ErrorCode::SchemaError, "unhandled schema");
}

}  // namespace taxind::llm
