#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taxind/config.hpp"
#include "taxind/diagnostics.hpp"
#include "taxind/llm/gateway.hpp"
#include "taxind/parallel.hpp"

namespace taxind {

inline constexpr std::string_view kQuerySlot = "<query>";
inline constexpr std::string_view kAnchorSlot = "<anchor>";

/// Ordered is-a sentence patterns. Each contains `<query>` and `<anchor>`
/// exactly once.
class TemplateSet {
 public:
  explicit TemplateSet(std::vector<std::string> patterns = default_templates()) : patterns_(std::move(patterns)) {
    if (patterns_.empty()) throw Error(ErrorCode::ConfigError, "template set is empty");
    for (const auto& p : patterns_) {
      if (count(p, kQuerySlot) != 1 || count(p, kAnchorSlot) != 1) {
        throw Error(ErrorCode::ConfigError, "template \"" + p + "\" must contain <query> and <anchor> exactly once");
      }
    }
  }

  std::size_t size() const { return patterns_.size(); }
  const std::vector<std::string>& patterns() const { return patterns_; }

  std::string instantiate(std::size_t m, const std::string& query, const std::string& anchor) const {
    std::string s = patterns_.at(m);
    replace(s, kQuerySlot, query);
    replace(s, kAnchorSlot, anchor);
    return s;
  }

 private:
  static std::size_t count(const std::string& s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + needle.size())) ++n;
    return n;
  }

  static void replace(std::string& s, std::string_view slot, const std::string& value) {
    auto pos = s.find(slot);
    s.replace(pos, slot.size(), value);
  }

  std::vector<std::string> patterns_;
};

/// Per-template judgments f_m(q,a) and their sum Score(q,a|M).
struct IsaVote {
  std::string query;
  std::string anchor;
  std::vector<bool> per_template;
  int score = 0;
};

inline IsaVote make_vote(std::string query, std::string anchor, std::vector<bool> judgments) {
  int score = static_cast<int>(std::count(judgments.begin(), judgments.end(), true));
  return {std::move(query), std::move(anchor), std::move(judgments), score};
}

inline llm::ChatRequest isa_request(const TemplateSet& templates, std::size_t m, const std::string& query,
                                    const std::string& anchor, const PipelineConfig& config) {
  llm::ChatRequest req;
  req.model_id = config.provider.small_model;
  req.schema = llm::ResponseSchema::isa_judgment;
  req.seed = config.seed;
  req.max_output_tokens = 16;
  req.system_prompt = "You judge whether is-a (hypernymy) statements are true.";
  req.user_prompt = "Statement: \"" + templates.instantiate(m, query, anchor) + "\"\nHere \"" + query +
                    "\" is the specific term and \"" + anchor +
                    "\" is the candidate general term. Is the statement true?\n"
                    "Respond with a JSON object {\"answer\": \"yes\"} or {\"answer\": \"no\"} and nothing else.";
  req.context = json{{"stage", "isa"}, {"query", query}, {"anchor", anchor}, {"template", templates.patterns()[m]}};
  return req;
}

/// Asks the lightweight model once per template. A template whose answer
/// stays unparseable after the reprompt counts as 0.
inline IsaVote isa_vote(const std::string& q, const std::string& a, const TemplateSet& templates,
                        llm::LlmGateway& gateway, const PipelineConfig& config, Diagnostics* diag = nullptr) {
  if (q == a) throw Error(ErrorCode::ConfigError, "isa_vote: query and anchor are both \"" + q + "\"");
  std::vector<bool> judgments(templates.size(), false);
  for (std::size_t m = 0; m < templates.size(); ++m) {
    try {
      judgments[m] = std::get<bool>(gateway.chat_structured(isa_request(templates, m, q, a, config), {}));
    } catch (const Error& e) {
      if (!is_output_error(e.code())) throw;
      if (diag) diag->warn("is-a judgment (" + q + ", " + a + ", template " + std::to_string(m) + ") counted as 0: " +
                           e.what());
    }
  }
  return make_vote(q, a, std::move(judgments));
}

/// Score lookup Score(x, y | M); 0 for pairs that were not voted.
using IsaScoreFn = std::function<int(const std::string& query, const std::string& anchor)>;

/// Top-k_isa anchors by (score desc, name). Zero-score anchors never appear.
/// Under reciprocal pruning an anchor a is dropped when Score(a,q) > Score(q,a).
inline std::vector<std::string> isa_candidates(const std::string& q, const std::vector<std::string>& anchors,
                                               const IsaScoreFn& score, int k_isa,
                                               MutualityMode mutuality = MutualityMode::reciprocal_prune) {
  std::vector<ScoredTerm> ranked;
  for (const auto& a : anchors) {
    if (a == q) continue;
    int s = score(q, a);
    if (s <= 0) continue;
    if (mutuality == MutualityMode::reciprocal_prune && score(a, q) > s) continue;
    ranked.push_back({a, static_cast<double>(s)});
  }
  ranked = canonical_order(std::move(ranked));
  std::vector<std::string> out;
  for (const auto& r : ranked) {
    if (out.size() >= static_cast<std::size_t>(k_isa)) break;
    out.push_back(r.name);
  }
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "embedding dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct SimilarTerm {
  std::string name;
  double similarity = 0.0;
};

/// Anchors ranked by cosine similarity of unit embeddings, top k_def.
inline std::vector<SimilarTerm> definition_candidates(const std::string& q, const std::vector<std::string>& anchors,
                                                      const std::map<std::string, std::vector<double>>& embeddings,
                                                      int k_def) {
  auto lookup = [&](const std::string& name) -> const std::vector<double>& {
    auto it = embeddings.find(name);
    if (it == embeddings.end()) throw Error(ErrorCode::MissingEmbedding, "no embedding for \"" + name + "\"");
    return it->second;
  };
  const auto& eq = lookup(q);
  std::vector<ScoredTerm> ranked;
  for (const auto& a : anchors) {
    if (a == q) continue;
    ranked.push_back({a, dot(eq, lookup(a))});
  }
  ranked = canonical_order(std::move(ranked));
  std::vector<SimilarTerm> out;
  for (const auto& r : ranked) {
    if (out.size() >= static_cast<std::size_t>(k_def)) break;
    out.push_back({r.name, r.score});
  }
  return out;
}

/// Order-preserving union: is-a list first, then definition matches; first
/// occurrence wins; truncated to k1.
inline std::vector<std::string> fuse_candidates(const std::vector<std::string>& isa,
                                                const std::vector<std::string>& defs, int k1) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto* list : {&isa, &defs}) {
    for (const auto& name : *list) {
      if (out.size() >= static_cast<std::size_t>(k1)) return out;
      if (seen.insert(name).second) out.push_back(name);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stage

struct CandidateInfo {
  std::string parent;
  std::optional<int> isa_score;
  std::optional<double> def_sim;
  bool operator==(const CandidateInfo&) const = default;
};

struct CandidateList {
  std::string child;
  std::vector<CandidateInfo> candidates;
  bool operator==(const CandidateList&) const = default;

  std::vector<std::string> parents() const {
    std::vector<std::string> out;
    for (const auto& c : candidates) out.push_back(c.parent);
    return out;
  }
};

inline json to_json(const CandidateList& list) {
  json cands = json::array();
  for (const auto& c : list.candidates) {
    cands.push_back(json{{"parent", c.parent},
                         {"isa_score", c.isa_score ? json(*c.isa_score) : json(nullptr)},
                         {"def_sim", c.def_sim ? json(*c.def_sim) : json(nullptr)}});
  }
  return json{{"child", list.child}, {"candidates", cands}};
}

inline CandidateList candidate_list_from_json(const json& j) {
  CandidateList out;
  out.child = j.at("child").get<std::string>();
  for (const auto& c : j.at("candidates")) {
    CandidateInfo info;
    info.parent = c.at("parent").get<std::string>();
    if (c.contains("isa_score") && !c["isa_score"].is_null()) info.isa_score = c["isa_score"].get<int>();
    if (c.contains("def_sim") && !c["def_sim"].is_null()) info.def_sim = c["def_sim"].get<double>();
    out.candidates.push_back(std::move(info));
  }
  return out;
}

/// Candidate parents for every non-root term. `terms` holds all nodes (root
/// included) with refined definitions. Output follows canonical child order.
inline std::vector<CandidateList> select_candidates(const std::vector<TermRecord>& terms, const std::string& root,
                                                    llm::LlmGateway& gateway, const PipelineConfig& config,
                                                    Diagnostics* diag = nullptr) {
  std::vector<std::string> names;
  for (const auto& t : terms) names.push_back(t.name);
  names = canonical_order(std::move(names));
  std::vector<std::string> children;
  for (const auto& n : names) {
    if (n != root) children.push_back(n);
  }

  std::vector<CandidateList> out(children.size());
  if (!config.enable_hpcs) {
    for (std::size_t i = 0; i < children.size(); ++i) {
      out[i].child = children[i];
      for (const auto& n : names) {
        if (n != children[i]) out[i].candidates.push_back({n, std::nullopt, std::nullopt});
      }
    }
    return out;
  }

  TemplateSet templates(config.templates);

  // Is-a votes for every (child, anchor) pair.
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& q : children) {
    for (const auto& a : names) {
      if (a != q) pairs.emplace_back(q, a);
    }
  }
  std::vector<int> pair_scores(pairs.size(), 0);
  parallel_for(pairs.size(), config.provider.max_in_flight, [&](std::size_t i) {
    try {
      pair_scores[i] = isa_vote(pairs[i].first, pairs[i].second, templates, gateway, config, diag).score;
    } catch (const Error& e) {
      throw Error(e.code(), "stage 'candidates' term '" + pairs[i].first + "': " + e.what());
    }
  });
  std::map<std::pair<std::string, std::string>, int> score_table;
  for (std::size_t i = 0; i < pairs.size(); ++i) score_table[pairs[i]] = pair_scores[i];
  IsaScoreFn score = [&](const std::string& q, const std::string& a) {
    auto it = score_table.find({q, a});
    return it == score_table.end() ? 0 : it->second;
  };

  // Definition matching over x_q = name + ": " + definition.
  std::vector<std::string> texts;
  std::vector<std::string> embedded_names;
  for (const auto& n : names) {
    auto it = std::find_if(terms.begin(), terms.end(), [&](const TermRecord& t) { return t.name == n; });
    texts.push_back(it->embedding_text());
    embedded_names.push_back(n);
  }
  auto vectors = gateway.embed(texts);
  std::map<std::string, std::vector<double>> embeddings;
  for (std::size_t i = 0; i < embedded_names.size(); ++i) embeddings[embedded_names[i]] = std::move(vectors[i]);

  for (std::size_t i = 0; i < children.size(); ++i) {
    const auto& q = children[i];
    auto isa = isa_candidates(q, names, score, config.k_isa, config.mutuality);
    auto defs = definition_candidates(q, names, embeddings, config.k_def);
    std::vector<std::string> def_names;
    for (const auto& d : defs) def_names.push_back(d.name);
    auto fused = fuse_candidates(isa, def_names, config.k1);
    out[i].child = q;
    for (const auto& p : fused) {
      CandidateInfo info{p, std::nullopt, std::nullopt};
      if (std::find(isa.begin(), isa.end(), p) != isa.end()) info.isa_score = score(q, p);
      for (const auto& d : defs) {
        if (d.name == p) info.def_sim = d.similarity;
      }
      out[i].candidates.push_back(std::move(info));
    }
  }
  return out;
}

}  // namespace taxind
