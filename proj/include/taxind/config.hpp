#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "taxind/core.hpp"

namespace taxind {

enum class MutualityMode { reciprocal_prune, off };

inline std::string to_string(MutualityMode m) {
  return m == MutualityMode::off ? "off" : "reciprocal-prune";
}

inline MutualityMode parse_mutuality(const std::string& s) {
  if (s == "reciprocal-prune") return MutualityMode::reciprocal_prune;
  if (s == "off") return MutualityMode::off;
  throw Error(ErrorCode::ConfigError, "unknown mutuality mode '" + s + "'");
}

/// Is-a templates; `<query>` is the child slot, `<anchor>` the candidate parent.
inline std::vector<std::string> default_templates() {
  return {
      "<query> is a/an <anchor>",
      "<query> is a kind of <anchor>",
      "<query> is a type of <anchor>",
      "<query> is an example of <anchor>",
      "<anchor> such as <query>",
  };
}

struct ProviderConfig {
  std::string chat_endpoint = "https://api.openai.com/v1";
  std::string embedding_endpoint = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string large_model = "gpt-4o";
  std::string small_model = "qwen3-4b";
  std::string embedding_model = "all-mpnet-base-v2";
  int max_in_flight = 4;
  int max_retries = 3;
  int backoff_ms = 500;
  int timeout_s = 60;
  int embedding_batch = 64;
  std::string encyclopedia_endpoint = "https://en.wikipedia.org";
};

/// All pipeline tunables. Defaults follow the reference setup (k_isa = 10,
/// k_def = 5, k2 = 3).
struct PipelineConfig {
  int k_isa = 10;
  int k_def = 5;
  int k1 = 15;
  int k2 = 3;
  double delta = 0.05;
  double tau_m = 0.05;
  std::vector<std::string> templates = default_templates();
  bool enable_hpcs = true;
  bool enable_lscsf = true;
  MutualityMode mutuality = MutualityMode::reciprocal_prune;
  int definition_max_words = 60;
  int definition_hard_cap_words = 100;
  std::uint64_t seed = 0;
  ProviderConfig provider;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (k_isa <= 0 || k_def <= 0 || k1 <= 0 || k2 <= 0) fail("k_isa, k_def, k1, k2 must be positive");
    if (k2 > k1) fail("k2 must not exceed k1");
    if (templates.empty()) fail("template set is empty");
    if (!std::isfinite(delta) || delta < 0.0) fail("delta must be finite and >= 0");
    if (!std::isfinite(tau_m) || tau_m < 0.0) fail("tau_m must be finite and >= 0");
    if (definition_max_words <= 0 || definition_hard_cap_words < definition_max_words) {
      fail("definition word limits must satisfy 0 < max <= hard cap");
    }
    if (provider.max_in_flight <= 0) fail("max_in_flight must be positive");
    if (provider.max_retries < 0 || provider.backoff_ms < 0) fail("retry settings must be >= 0");
    if (provider.embedding_batch <= 0) fail("embedding_batch must be positive");
  }
};

inline json to_json(const ProviderConfig& p) {
  return json{{"chat_endpoint", p.chat_endpoint},
              {"embedding_endpoint", p.embedding_endpoint},
              {"api_key_env", p.api_key_env},
              {"large_model", p.large_model},
              {"small_model", p.small_model},
              {"embedding_model", p.embedding_model},
              {"max_in_flight", p.max_in_flight},
              {"max_retries", p.max_retries},
              {"backoff_ms", p.backoff_ms},
              {"timeout_s", p.timeout_s},
              {"embedding_batch", p.embedding_batch},
              {"encyclopedia_endpoint", p.encyclopedia_endpoint}};
}

inline json to_json(const PipelineConfig& c) {
  return json{{"k_isa", c.k_isa},
              {"k_def", c.k_def},
              {"k1", c.k1},
              {"k2", c.k2},
              {"delta", c.delta},
              {"tau_m", c.tau_m},
              {"templates", c.templates},
              {"enable_hpcs", c.enable_hpcs},
              {"enable_lscsf", c.enable_lscsf},
              {"mutuality", to_string(c.mutuality)},
              {"definition_max_words", c.definition_max_words},
              {"definition_hard_cap_words", c.definition_hard_cap_words},
              {"seed", c.seed},
              {"provider", to_json(c.provider)}};
}

namespace detail {
template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config field '") + key + "': " + e.what());
  }
}
}  // namespace detail

/// Reads a config object; absent fields keep their defaults. When k1 is absent
/// it follows k_isa + k_def.
inline PipelineConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
  PipelineConfig c;
  detail::read_field(j, "k_isa", c.k_isa);
  detail::read_field(j, "k_def", c.k_def);
  c.k1 = c.k_isa + c.k_def;
  detail::read_field(j, "k1", c.k1);
  detail::read_field(j, "k2", c.k2);
  detail::read_field(j, "delta", c.delta);
  detail::read_field(j, "tau_m", c.tau_m);
  detail::read_field(j, "templates", c.templates);
  detail::read_field(j, "enable_hpcs", c.enable_hpcs);
  detail::read_field(j, "enable_lscsf", c.enable_lscsf);
  if (j.contains("mutuality")) c.mutuality = parse_mutuality(j["mutuality"].get<std::string>());
  detail::read_field(j, "definition_max_words", c.definition_max_words);
  detail::read_field(j, "definition_hard_cap_words", c.definition_hard_cap_words);
  detail::read_field(j, "seed", c.seed);
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    auto& o = c.provider;
    detail::read_field(p, "chat_endpoint", o.chat_endpoint);
    detail::read_field(p, "embedding_endpoint", o.embedding_endpoint);
    detail::read_field(p, "api_key_env", o.api_key_env);
    detail::read_field(p, "large_model", o.large_model);
    detail::read_field(p, "small_model", o.small_model);
    detail::read_field(p, "embedding_model", o.embedding_model);
    detail::read_field(p, "max_in_flight", o.max_in_flight);
    detail::read_field(p, "max_retries", o.max_retries);
    detail::read_field(p, "backoff_ms", o.backoff_ms);
    detail::read_field(p, "timeout_s", o.timeout_s);
    detail::read_field(p, "embedding_batch", o.embedding_batch);
    detail::read_field(p, "encyclopedia_endpoint", o.encyclopedia_endpoint);
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, "'" + path + "': " + e.what());
  }
}

inline PipelineConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

}  // namespace taxind
