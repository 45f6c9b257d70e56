#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "taxind/candidates.hpp"

namespace taxind {

/// Confidence assigned to the child -> root edge when ranking yields no usable
/// parent.
inline constexpr double kFallbackConfidence = 0.05;

/// P(t) with confidences s(t,p), confidence descending.
struct RankedParentSet {
  std::string child;
  std::vector<llm::ScoredParent> parents;
  bool fallback = false;
};

inline json to_json(const RankedParentSet& r) {
  json ranked = json::array();
  for (const auto& p : r.parents) ranked.push_back(json{{"parent", p.parent}, {"score", p.score}});
  return json{{"child", r.child}, {"ranked", ranked}};
}

inline RankedParentSet ranked_from_json(const json& j) {
  RankedParentSet r;
  r.child = j.at("child").get<std::string>();
  for (const auto& p : j.at("ranked")) r.parents.push_back({p.at("parent").get<std::string>(), p.at("score").get<double>()});
  return r;
}

struct RankingInput {
  std::string child;
  std::string child_definition;
  std::vector<std::pair<std::string, std::string>> candidates;  // (name, definition), fused order
  std::string root;
  std::string root_definition;
};

inline std::size_t ranking_selection_size(std::size_t candidates, int k2) {
  return std::min(candidates, static_cast<std::size_t>(std::max(0, k2)));
}

inline llm::ChatRequest ranking_request(const RankingInput& in, int k2, const PipelineConfig& config) {
  auto select = ranking_selection_size(in.candidates.size(), k2);
  llm::ChatRequest req;
  req.model_id = config.provider.large_model;
  req.schema = llm::ResponseSchema::rank_and_score;
  req.seed = config.seed;
  req.max_output_tokens = 512;
  req.system_prompt =
      "You are an expert taxonomist. You identify the direct parent (hypernym) of a term within a taxonomy.";
  std::string listing;
  json names = json::array();
  for (std::size_t i = 0; i < in.candidates.size(); ++i) {
    listing += std::to_string(i + 1) + ". " + in.candidates[i].first + ": " + in.candidates[i].second + "\n";
    names.push_back(in.candidates[i].first);
  }
  req.user_prompt = "Root topic: " + in.root + "\nRoot definition: " + in.root_definition + "\nChild term: " +
                    in.child + "\nChild definition: " + in.child_definition + "\nCandidate parents:\n" + listing +
                    "\nWithin the semantic scope of the root topic, compare all candidate parents jointly and "
                    "select exactly the " +
                    std::to_string(select) +
                    " most likely direct parents of the child term. Give each selected candidate a confidence "
                    "score strictly between 0 and 1. Use candidate names exactly as listed.\n"
                    "Respond with a JSON object {\"parents\": [{\"parent\": \"...\", \"score\": 0.0}]} and nothing "
                    "else.";
  req.context = json{{"stage", "ranking"}, {"child", in.child}, {"candidates", names}, {"select", select}};
  return req;
}

/// Post-processes a parsed ranking: keeps candidates only (first mention
/// wins), sorts by confidence desc with name tie-break, keeps min(k2, n).
/// Returns the child -> root fallback when nothing survives.
inline RankedParentSet select_ranked(const std::string& child, const std::vector<std::string>& candidates,
                                     const std::vector<llm::ScoredParent>& parsed, int k2, const std::string& root) {
  std::set<std::string> allowed(candidates.begin(), candidates.end());
  allowed.erase(child);
  std::vector<ScoredTerm> kept;
  std::set<std::string> seen;
  for (const auto& p : parsed) {
    if (!allowed.count(p.parent) || !seen.insert(p.parent).second) continue;
    kept.push_back({p.parent, llm::clamp_confidence(p.score)});
  }
  kept = canonical_order(std::move(kept));
  kept.resize(std::min(kept.size(), ranking_selection_size(candidates.size(), k2)));
  RankedParentSet out{child, {}, false};
  for (const auto& k : kept) out.parents.push_back({k.name, k.score});
  if (out.parents.empty()) {
    out.parents.push_back({root, kFallbackConfidence});
    out.fallback = true;
  }
  return out;
}

inline RankedParentSet rank_and_score(const RankingInput& in, int k2, llm::LlmGateway& gateway,
                                      const PipelineConfig& config, const llm::Vocabulary& vocabulary) {
  if (in.candidates.empty()) {
    throw Error(ErrorCode::ConfigError, "rank_and_score: no candidates for \"" + in.child + "\"");
  }
  llm::ParseOptions parse;
  parse.vocabulary = vocabulary;
  auto parsed = std::get<std::vector<llm::ScoredParent>>(gateway.chat_structured(ranking_request(in, k2, config), parse));
  std::vector<std::string> names;
  for (const auto& c : in.candidates) names.push_back(c.first);
  return select_ranked(in.child, names, parsed, k2, in.root);
}

/// Ranks every child's fused candidates concurrently; output keeps input order.
inline std::vector<RankedParentSet> rank_all(const std::vector<CandidateList>& lists,
                                             const std::map<std::string, std::string>& definitions,
                                             const std::string& root, const std::string& root_definition,
                                             llm::LlmGateway& gateway, const PipelineConfig& config,
                                             Diagnostics* diag = nullptr) {
  llm::Vocabulary vocabulary;
  for (const auto& [name, _] : definitions) vocabulary.insert(name);
  auto def_of = [&](const std::string& name) {
    auto it = definitions.find(name);
    return it == definitions.end() ? std::string() : it->second;
  };
  std::vector<RankedParentSet> out(lists.size());
  parallel_for(lists.size(), config.provider.max_in_flight, [&](std::size_t i) {
    const auto& list = lists[i];
    if (list.candidates.empty()) {
      out[i] = {list.child, {{root, kFallbackConfidence}}, true};
    } else {
      RankingInput in{list.child, def_of(list.child), {}, root, root_definition};
      for (const auto& c : list.candidates) in.candidates.emplace_back(c.parent, def_of(c.parent));
      try {
        out[i] = rank_and_score(in, config.k2, gateway, config, vocabulary);
      } catch (const Error& e) {
        throw Error(e.code(), "stage 'ranking' term '" + list.child + "': " + e.what());
      }
    }
    if (out[i].fallback && diag) diag->warn("ranking for \"" + list.child + "\" fell back to the root");
  });
  return out;
}

}  // namespace taxind
