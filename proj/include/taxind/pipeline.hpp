#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "taxind/arborescence.hpp"
#include "taxind/calibration.hpp"
#include "taxind/candidates.hpp"
#include "taxind/dataset.hpp"
#include "taxind/definitions.hpp"
#include "taxind/evaluation.hpp"
#include "taxind/ranking.hpp"

namespace taxind {

inline constexpr const char* kVersion = "0.1.0";

namespace artifact {
inline constexpr const char* definitions = "definitions.json";
inline constexpr const char* candidates = "candidates.jsonl";
inline constexpr const char* ranked = "ranked.jsonl";
inline constexpr const char* calibrated = "calibrated.jsonl";
inline constexpr const char* taxonomy = "taxonomy.json";
inline constexpr const char* metrics = "metrics.json";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* timing = "timing.json";
}  // namespace artifact

enum class Stage { definitions, candidates, ranking, calibration, arborescence };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::definitions: return "definitions";
    case Stage::candidates: return "candidates";
    case Stage::ranking: return "ranking";
    case Stage::calibration: return "calibration";
    case Stage::arborescence: return "arborescence";
  }
  return "unknown";
}

inline Stage parse_stage(const std::string& s) {
  for (auto st : {Stage::definitions, Stage::candidates, Stage::ranking, Stage::calibration, Stage::arborescence}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::ConfigError, "unknown stage '" + s + "'");
}

struct RunOptions {
  std::string out_dir;
  DefinitionSource definitions;
  bool resume = false;
  Stage stop_after = Stage::arborescence;
  std::string task_name = "task";
  /// Definition cache file; defaults to <out_dir>/definitions.json.
  std::optional<std::string> definition_cache;
  bool echo_warnings = false;
};

struct PipelineResult {
  bool completed = false;
  DefinitionCache definitions;
  std::vector<CandidateList> candidates;
  std::vector<RankedParentSet> ranked;
  std::vector<CalibratedEdge> calibrated;
  std::optional<PredictedTaxonomy> taxonomy;
  std::optional<EvaluationCounts> counts;
  std::optional<MetricsReport> metrics;
  std::size_t retrieval_calls = 0;
  std::vector<std::string> warnings;
  json manifest;
};

/// Gateway settings taken from the provider section of a config.
inline llm::GatewayOptions gateway_options(const PipelineConfig& c, llm::LlmMode mode) {
  llm::GatewayOptions o;
  o.mode = mode;
  o.max_in_flight = c.provider.max_in_flight;
  o.max_retries = c.provider.max_retries;
  o.backoff_ms = c.provider.backoff_ms;
  o.embedding_model = c.provider.embedding_model;
  o.embedding_batch = c.provider.embedding_batch;
  return o;
}

inline std::string ablation_label(const PipelineConfig& c) {
  if (c.enable_hpcs && c.enable_lscsf) return "full";
  if (!c.enable_hpcs && !c.enable_lscsf) return "w/o HPCS, w/o LSC-SF";
  return c.enable_hpcs ? "w/o LSC-SF" : "w/o HPCS";
}

namespace detail {

template <class T>
std::string jsonl(const std::vector<T>& items) {
  std::ostringstream out;
  for (const auto& item : items) out << to_json(item).dump() << '\n';
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path.string() + "'");
  out << text;
}

inline std::optional<std::string> read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T, class Parse>
std::vector<T> parse_jsonl(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(parse(json::parse(line)));
  }
  return out;
}

/// Wraps errors from a stage so the message names the stage.
template <class Fn>
auto in_stage(Stage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    std::string what = e.what();
    if (what.find("stage '") != std::string::npos) throw;
    throw Error(e.code(), "stage '" + to_string(stage) + "': " + what);
  }
}

}  // namespace detail

/// Full induction run: definitions -> candidate selection -> ranking ->
/// calibration -> attachability repair -> maximum arborescence -> scoring.
/// Every stage writes its artifact under `options.out_dir`; with `resume`, a
/// stage whose digest matches the previous manifest is loaded from disk.
inline PipelineResult run_pipeline(const Task& task, const PipelineConfig& config, const RunOptions& options,
                                   llm::LlmGateway& gateway,
                                   std::shared_ptr<EncyclopediaClient> encyclopedia = nullptr) {
  namespace fs = std::filesystem;
  using Clock = std::chrono::steady_clock;
  config.validate();
  const fs::path out_dir(options.out_dir);
  fs::create_directories(out_dir);
  Diagnostics diag(options.echo_warnings);
  PipelineResult result;
  json timing = json::object();
  const auto run_start = Clock::now();

  std::map<std::string, std::string> previous_digests;
  if (options.resume) {
    if (auto text = detail::read_text(out_dir / artifact::manifest)) {
      auto prev = json::parse(*text, nullptr, false);
      if (!prev.is_discarded() && prev.contains("stages")) {
        for (const auto& s : prev["stages"]) previous_digests[s.at("name")] = s.at("digest");
      }
    }
  }
  json stages = json::array();
  auto can_resume = [&](Stage stage, const std::string& digest, const char* file) -> std::optional<std::string> {
    if (!options.resume) return std::nullopt;
    auto it = previous_digests.find(to_string(stage));
    if (it == previous_digests.end() || it->second != digest) return std::nullopt;
    return detail::read_text(out_dir / file);
  };
  auto record_stage = [&](Stage stage, const std::string& digest, const char* file, bool resumed,
                          Clock::time_point start) {
    stages.push_back(json{{"name", to_string(stage)}, {"digest", digest}, {"artifact", file}, {"resumed", resumed}});
    timing[to_string(stage)] =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  };

  const json task_json = to_json(task);
  const json config_json = to_json(config);
  const std::string root = task.root;
  std::vector<std::string> names;
  for (const auto& n : task.node_names()) names.push_back(n);
  llm::Vocabulary vocabulary(names.begin(), names.end());

  auto write_manifest = [&] {
    json m{{"tool", "taxind"},
           {"version", kVersion},
           {"task", json{{"name", options.task_name},
                         {"root", root},
                         {"nodes", names.size()},
                         {"digest", sha256_hex(task_json.dump())}}},
           {"config", config_json},
           {"seed", config.seed},
           {"llm_mode", to_string(gateway.options().mode)},
           {"definitions", to_string(options.definitions)},
           {"ablation", json{{"hpcs", config.enable_hpcs}, {"lscsf", config.enable_lscsf},
                             {"label", ablation_label(config)}}},
           {"transcript_digest", gateway.transcript().content_digest()},
           {"stages", stages},
           {"completed", result.completed},
           {"warnings", result.warnings},
           {"timing_file", artifact::timing},
           {"metrics", result.metrics ? to_percent_json(*result.metrics) : json(nullptr)}};
    result.manifest = m;
    save_json((out_dir / artifact::manifest).string(), m);
    timing["total"] = std::chrono::duration<double, std::milli>(Clock::now() - run_start).count();
    save_json((out_dir / artifact::timing).string(), json{{"unit", "ms"}, {"stages", timing}});
  };
  auto finish = [&](bool completed) {
    result.completed = completed;
    result.warnings = diag.messages();
    write_manifest();
    return result;
  };

  // --- definitions -------------------------------------------------------
  auto stage_start = Clock::now();
  const std::string def_digest =
      sha256_hex(json{{"stage", "definitions"}, {"task", task_json}, {"config", config_json},
                      {"definitions", to_string(options.definitions)}}
                     .dump());
  std::map<std::string, std::string> refined;
  detail::in_stage(Stage::definitions, [&] {
    const auto cache_path = options.definition_cache.value_or((out_dir / artifact::definitions).string());
    DefinitionCache cache;
    if (options.definitions.kind != DefinitionMode::skip) {
      if (auto text = detail::read_text(cache_path)) cache = definition_cache_from_json(json::parse(*text));
    }
    std::map<std::string, std::optional<std::string>> task_defs{{root, task.root_definition}};
    for (const auto& t : task.terms) task_defs[t.name] = t.definition;

    if (options.definitions.kind == DefinitionMode::skip) {
      for (const auto& n : names) {
        auto def = task_defs[n];
        std::string text = def && !trim(*def).empty() ? single_paragraph(*def) : n;
        if (!def || trim(*def).empty()) diag.warn("no definition for \"" + n + "\"; using the term itself");
        cache[n] = {def, text};
      }
    } else {
      std::shared_ptr<EncyclopediaClient> client = encyclopedia;
      if (!client && options.definitions.kind == DefinitionMode::snapshot) {
        client = std::make_shared<SnapshotEncyclopedia>(*options.definitions.cache_path);
      }
      DefinitionRetriever retriever(client);
      auto define = [&](const std::string& term, const std::string& root_definition) {
        std::optional<std::string> raw = retriever.retrieve(term);
        if (!raw) raw = task_defs[term];
        try {
          return DefinitionEntry{raw, refine_definition(term, raw, root, root_definition, gateway, config)};
        } catch (const Error& e) {
          throw Error(e.code(), "stage 'definitions' term '" + term + "': " + e.what());
        }
      };
      if (!cache.count(root)) cache[root] = define(root, task_defs[root].value_or(""));
      const std::string root_definition = cache[root].refined;
      std::vector<std::string> todo;
      for (const auto& n : names) {
        if (!cache.count(n)) todo.push_back(n);
      }
      std::vector<DefinitionEntry> entries(todo.size());
      parallel_for(todo.size(), config.provider.max_in_flight,
                   [&](std::size_t i) { entries[i] = define(todo[i], root_definition); });
      for (std::size_t i = 0; i < todo.size(); ++i) cache[todo[i]] = entries[i];
      result.retrieval_calls = retriever.lookups();
      save_json(cache_path, to_json(cache));
    }
    for (const auto& n : names) {
      refined[n] = cache.at(n).refined;
      result.definitions[n] = cache.at(n);
    }
  });
  if (options.definitions.kind == DefinitionMode::skip) {
    save_json((out_dir / artifact::definitions).string(), to_json(result.definitions));
  }
  record_stage(Stage::definitions, def_digest, artifact::definitions, false, stage_start);
  if (options.stop_after == Stage::definitions) return finish(false);

  // --- candidate selection -----------------------------------------------
  stage_start = Clock::now();
  json refined_json(refined);
  const std::string cand_digest = sha256_hex(
      json{{"stage", "candidates"}, {"prev", def_digest}, {"definitions", refined_json}}.dump());
  bool resumed = false;
  if (auto text = can_resume(Stage::candidates, cand_digest, artifact::candidates)) {
    result.candidates = detail::parse_jsonl<CandidateList>(*text, candidate_list_from_json);
    resumed = true;
  } else {
    result.candidates = detail::in_stage(Stage::candidates, [&] {
      std::vector<TermRecord> records;
      for (const auto& n : names) records.push_back({n, refined.at(n), std::nullopt});
      return select_candidates(records, root, gateway, config, &diag);
    });
    detail::write_text(out_dir / artifact::candidates, detail::jsonl(result.candidates));
  }
  record_stage(Stage::candidates, cand_digest, artifact::candidates, resumed, stage_start);
  if (options.stop_after == Stage::candidates) return finish(false);

  // --- ranking -----------------------------------------------------------
  stage_start = Clock::now();
  const std::string rank_digest = sha256_hex(
      json{{"stage", "ranking"}, {"prev", cand_digest}, {"input", sha256_hex(detail::jsonl(result.candidates))}}
          .dump());
  resumed = false;
  if (auto text = can_resume(Stage::ranking, rank_digest, artifact::ranked)) {
    result.ranked = detail::parse_jsonl<RankedParentSet>(*text, ranked_from_json);
    resumed = true;
  } else {
    result.ranked = detail::in_stage(Stage::ranking, [&] {
      return rank_all(result.candidates, refined, root, refined.at(root), gateway, config, &diag);
    });
    detail::write_text(out_dir / artifact::ranked, detail::jsonl(result.ranked));
  }
  record_stage(Stage::ranking, rank_digest, artifact::ranked, resumed, stage_start);
  if (options.stop_after == Stage::ranking) return finish(false);

  // --- calibration -------------------------------------------------------
  stage_start = Clock::now();
  const std::string cal_digest = sha256_hex(
      json{{"stage", "calibration"}, {"prev", rank_digest}, {"input", sha256_hex(detail::jsonl(result.ranked))}}
          .dump());
  std::vector<CandidateEdge> edges;
  for (const auto& r : result.ranked) {
    for (const auto& p : r.parents) edges.push_back({r.child, p.parent, p.score, EdgeStage::ranked});
  }
  if (!config.enable_lscsf) fs::remove(out_dir / artifact::calibrated);
  resumed = false;
  if (auto text = config.enable_lscsf ? can_resume(Stage::calibration, cal_digest, artifact::calibrated)
                                      : std::nullopt) {
    result.calibrated = detail::parse_jsonl<CalibratedEdge>(*text, calibrated_from_json);
    resumed = true;
  } else {
    result.calibrated = detail::in_stage(Stage::calibration, [&] {
      auto penalties = gateway_penalties(root, refined.at(root), vocabulary, gateway, config, &diag);
      return calibrate(edges, root, config, penalties);
    });
  }
  if (config.enable_lscsf) {
    detail::write_text(out_dir / artifact::calibrated, detail::jsonl(result.calibrated));
    record_stage(Stage::calibration, cal_digest, artifact::calibrated, resumed, stage_start);
  }
  if (options.stop_after == Stage::calibration) return finish(false);

  // --- arborescence ------------------------------------------------------
  stage_start = Clock::now();
  result.taxonomy = detail::in_stage(Stage::arborescence, [&] {
    WeightedDigraph graph;
    graph.nodes.insert(names.begin(), names.end());
    for (const auto& e : result.calibrated) graph.add_arc(e.child, e.parent, e.final_score);
    const std::size_t scored_arcs = graph.arcs.size();
    auto repaired = ensure_attachable(std::move(graph), root);
    for (std::size_t i = scored_arcs; i < repaired.arcs.size(); ++i) {
      diag.warn("\"" + repaired.arcs[i].child + "\" attached to the root by repair");
    }
    auto tree = max_arborescence(repaired, root);
    auto violations = validate_taxonomy(tree.taxonomy);
    if (!violations.empty()) {
      throw Error(ErrorCode::Infeasible, violations.front().rule + " (" + violations.front().subject + ")");
    }
    return tree;
  });
  save_json((out_dir / artifact::taxonomy).string(), to_json(*result.taxonomy));
  const std::string tree_digest = sha256_hex(
      json{{"stage", "arborescence"}, {"prev", cal_digest}, {"lscsf", config.enable_lscsf}}.dump());
  record_stage(Stage::arborescence, tree_digest, artifact::taxonomy, false, stage_start);

  if (task.gold) {
    result.counts = evaluation_counts(result.taxonomy->taxonomy, *task.gold);
    result.metrics = report_from_counts(*result.counts);
    save_json((out_dir / artifact::metrics).string(), metrics_report_json({{options.task_name, *result.counts}}));
  }
  return finish(true);
}

}  // namespace taxind
