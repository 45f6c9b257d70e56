#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "taxind/config.hpp"
#include "taxind/diagnostics.hpp"
#include "taxind/llm/gateway.hpp"
#include "taxind/parallel.hpp"

namespace taxind {

/// Per-edge structural evidence fed to the penalty model.
struct StructuralFeatures {
  double margin = 0.0;            // [-1, 1]
  double popularity = 0.0;        // [0, 1]
  double pullback = 0.0;          // [0, 1]
  double skip_support = 0.0;      // [0, 1]
  double sibling_cohesion = 0.0;  // [0, 1]
  double depth_penalty = 0.0;     // [0, 0.5]

  bool operator==(const StructuralFeatures&) const = default;

  bool in_range() const {
    auto within = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
    return within(margin, -1.0, 1.0) && within(popularity, 0.0, 1.0) && within(pullback, 0.0, 1.0) &&
           within(skip_support, 0.0, 1.0) && within(sibling_cohesion, 0.0, 1.0) && within(depth_penalty, 0.0, 0.5);
  }
};

inline json to_json(const StructuralFeatures& f) {
  return json{{"margin", f.margin},
              {"popularity", f.popularity},
              {"pullback", f.pullback},
              {"skip_support", f.skip_support},
              {"sibling_cohesion", f.sibling_cohesion},
              {"depth_penalty", f.depth_penalty}};
}

inline StructuralFeatures features_from_json(const json& j) {
  return {j.at("margin").get<double>(),       j.at("popularity").get<double>(),
          j.at("pullback").get<double>(),     j.at("skip_support").get<double>(),
          j.at("sibling_cohesion").get<double>(), j.at("depth_penalty").get<double>()};
}

struct CalibratedEdge {
  std::string child;
  std::string parent;
  double base_score = 0.0;
  double penalty = 0.0;
  double final_score = 0.0;
  std::optional<StructuralFeatures> features;

  Edge edge() const { return {child, parent}; }
};

inline json to_json(const CalibratedEdge& e) {
  return json{{"child", e.child},
              {"parent", e.parent},
              {"base_score", e.base_score},
              {"features", e.features ? to_json(*e.features) : json(nullptr)},
              {"penalty", e.penalty},
              {"final_score", e.final_score}};
}

inline CalibratedEdge calibrated_from_json(const json& j) {
  CalibratedEdge e;
  e.child = j.at("child").get<std::string>();
  e.parent = j.at("parent").get<std::string>();
  e.base_score = j.at("base_score").get<double>();
  if (j.contains("features") && !j["features"].is_null()) e.features = features_from_json(j["features"]);
  e.penalty = j.at("penalty").get<double>();
  e.final_score = j.at("final_score").get<double>();
  return e;
}

namespace detail {
inline std::vector<CandidateEdge> canonical_edges(std::vector<CandidateEdge> edges) {
  std::stable_sort(edges.begin(), edges.end(), [](const CandidateEdge& a, const CandidateEdge& b) {
    return std::tie(a.child, a.parent) < std::tie(b.child, b.parent);
  });
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const CandidateEdge& a, const CandidateEdge& b) {
                            return a.child == b.child && a.parent == b.parent;
                          }),
              edges.end());
  return edges;
}
}  // namespace detail

/// Mutual pairs {t,p}: both directions dropped when their scores differ by at
/// most tau_m, otherwise only the lower direction is dropped. Output is in
/// (child, parent) order.
inline std::vector<CandidateEdge> filter_mutual_edges(std::vector<CandidateEdge> edges, double tau_m) {
  edges = detail::canonical_edges(std::move(edges));
  std::map<Edge, double> score;
  for (const auto& e : edges) score[e.edge()] = e.score;
  std::vector<CandidateEdge> out;
  for (const auto& e : edges) {
    auto rev = score.find({e.parent, e.child});
    if (rev == score.end()) {
      out.push_back(e);
    } else if (std::abs(e.score - rev->second) > tau_m && e.score > rev->second) {
      out.push_back(e);
    }
  }
  return out;
}

/// Global min-max normalization; a degenerate range maps every score to 1.
inline std::vector<CandidateEdge> normalize_scores(std::vector<CandidateEdge> edges) {
  if (edges.empty()) return edges;
  auto [lo, hi] = std::minmax_element(edges.begin(), edges.end(),
                                      [](const CandidateEdge& a, const CandidateEdge& b) { return a.score < b.score; });
  double min = lo->score;
  double max = hi->score;
  for (auto& e : edges) e.score = (max > min) ? (e.score - min) / (max - min) : 1.0;
  return edges;
}

/// Structural features for every edge of a (filtered, normalized) candidate
/// set. P(t) are the parents of t; S(p) = Child(p) the children of p.
inline std::map<Edge, StructuralFeatures> compute_features(const std::vector<CandidateEdge>& edges,
                                                           const std::string& root, double delta) {
  std::map<Edge, double> s;
  std::map<std::string, std::set<std::string>> parents;   // P(t)
  std::map<std::string, std::set<std::string>> children;  // S(p)
  for (const auto& e : edges) {
    s[e.edge()] = e.score;
    parents[e.child].insert(e.parent);
    children[e.parent].insert(e.child);
  }
  const double child_count = static_cast<double>(parents.size());  // |C|
  auto score = [&](const std::string& c, const std::string& p) -> std::optional<double> {
    auto it = s.find({c, p});
    if (it == s.end()) return std::nullopt;
    return it->second;
  };

  // BFS depth over parent -> child arcs.
  std::map<std::string, int> depth{{root, 0}};
  std::queue<std::string> frontier;
  frontier.push(root);
  int max_depth = 0;
  while (!frontier.empty()) {
    auto v = frontier.front();
    frontier.pop();
    if (auto it = children.find(v); it != children.end()) {
      for (const auto& c : it->second) {
        if (depth.emplace(c, depth[v] + 1).second) {
          max_depth = std::max(max_depth, depth[c]);
          frontier.push(c);
        }
      }
    }
  }
  auto depth_penalty = [&](const std::string& p) {
    auto it = depth.find(p);
    if (it == depth.end()) return 0.25;
    if (max_depth == 0) return 0.5;
    return 0.5 * (1.0 - static_cast<double>(it->second) / max_depth);
  };

  auto jaccard = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  };

  std::map<Edge, StructuralFeatures> out;
  for (const auto& e : edges) {
    const auto& t = e.child;
    const auto& p = e.parent;
    const double stp = e.score;
    const auto& pt = parents[t];
    StructuralFeatures f;

    if (pt.size() > 1) {
      double best_other = -std::numeric_limits<double>::infinity();
      for (const auto& q : pt) {
        if (q != p) best_other = std::max(best_other, *score(t, q));
      }
      f.margin = stp - best_other;
    }

    f.popularity = child_count > 0 ? static_cast<double>(children[p].size()) / child_count : 0.0;

    if (pt.size() > 1) {
      int n = 0;
      for (const auto& fp : pt) {
        if (fp == p) continue;
        auto sfp = score(fp, p);
        if (sfp && std::min(*sfp, *score(t, fp)) < stp) ++n;
      }
      f.pullback = static_cast<double>(n) / static_cast<double>(pt.size() - 1);
    }

    double skip = 0.0;
    for (const auto& m : pt) {
      if (m == p) continue;
      double stm = *score(t, m);
      auto smp = score(m, p);
      if (smp && stm >= stp - delta) skip = std::max(skip, std::min(stm, *smp));
    }
    f.skip_support = skip;

    const auto& siblings = children[p];
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& other : siblings) {
      if (other == t) continue;
      sum += jaccard(pt, parents[other]);
      ++count;
    }
    f.sibling_cohesion = count ? sum / static_cast<double>(count) : 0.0;

    f.depth_penalty = depth_penalty(p);
    out[e.edge()] = f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Penalties

struct PenaltyCandidate {
  std::string parent;
  double score = 0.0;
  StructuralFeatures features;
};

/// Returns parent -> penalty for one child. Missing parents are treated as 0.
using PenaltyFn =
    std::function<std::map<std::string, double>(const std::string& child, const std::vector<PenaltyCandidate>&)>;

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

inline llm::ChatRequest penalty_request(const std::string& child, const std::vector<PenaltyCandidate>& parents,
                                        const std::string& root, const std::string& root_definition,
                                        const PipelineConfig& config) {
  llm::ChatRequest req;
  req.model_id = config.provider.large_model;
  req.schema = llm::ResponseSchema::penalty;
  req.seed = config.seed;
  req.max_output_tokens = 512;
  req.system_prompt =
      "You are an expert taxonomist. You calibrate candidate parent scores using structural evidence from a "
      "taxonomy under construction.";
  std::string listing;
  json names = json::array();
  for (const auto& c : parents) {
    const auto& f = c.features;
    listing += "- " + c.parent + ": score=" + fixed4(c.score) + ", margin=" + fixed4(f.margin) +
               ", popularity=" + fixed4(f.popularity) + ", skip_support=" + fixed4(f.skip_support) +
               ", sibling_cohesion=" + fixed4(f.sibling_cohesion) + ", pullback=" + fixed4(f.pullback) +
               ", depth_penalty=" + fixed4(f.depth_penalty) + "\n";
    names.push_back(c.parent);
  }
  req.user_prompt =
      "Root topic: " + root + "\nRoot definition: " + root_definition + "\nChild term: " + child +
      "\nCandidate parents with current scores and structural features:\n" + listing +
      "\nFeature meanings:\n"
      "- margin: score advantage over the strongest competing candidate.\n"
      "- popularity: share of child terms that list the candidate as a parent; high values suggest an overly "
      "general concept.\n"
      "- skip_support: evidence that the candidate is an ancestor reached through another candidate rather than "
      "the direct parent.\n"
      "- sibling_cohesion: how consistent the candidate parent sets of the candidate's other children are.\n"
      "- pullback: share of the other candidates that themselves take this candidate as a parent.\n"
      "- depth_penalty: shallowness of the candidate in the current candidate graph (0.5 at the root).\n"
      "\nJudge the is-a relation strictly within the semantic scope of the root topic. Compare all candidate "
      "parents and estimate how suitable each one is as the direct parent of the child term. Give every candidate "
      "a penalty between 0 and 0.5; a larger penalty means the candidate is overly general, is more likely an "
      "ancestor than the direct parent, or is otherwise unsuitable.\n"
      "Respond with a JSON object {\"penalties\": [{\"parent\": \"...\", \"penalty\": 0.0}]} and nothing else.";
  req.context = json{{"stage", "calibration"}, {"child", child}, {"parents", names}};
  return req;
}

/// One penalty prompt for a child. Output-format failures after the reprompt
/// degrade to zero penalties for that child.
inline std::map<std::string, double> llm_penalties(const std::string& child, const std::vector<PenaltyCandidate>& parents,
                                                   const std::string& root, const std::string& root_definition,
                                                   const llm::Vocabulary& vocabulary, llm::LlmGateway& gateway,
                                                   const PipelineConfig& config, Diagnostics* diag = nullptr) {
  if (parents.empty()) throw Error(ErrorCode::ConfigError, "llm_penalties: no parents for \"" + child + "\"");
  std::map<std::string, double> out;
  for (const auto& c : parents) out[c.parent] = 0.0;
  llm::ParseOptions parse;
  parse.vocabulary = vocabulary;
  try {
    auto parsed = std::get<std::map<std::string, double>>(
        gateway.chat_structured(penalty_request(child, parents, root, root_definition, config), parse));
    for (const auto& [parent, penalty] : parsed) {
      if (out.count(parent)) out[parent] = llm::clamp_penalty(penalty);
    }
  } catch (const Error& e) {
    if (!is_output_error(e.code())) throw;
    if (diag) diag->warn("penalties for \"" + child + "\" set to 0: " + e.what());
  }
  return out;
}

inline PenaltyFn gateway_penalties(const std::string& root, const std::string& root_definition,
                                   llm::Vocabulary vocabulary, llm::LlmGateway& gateway, const PipelineConfig& config,
                                   Diagnostics* diag = nullptr) {
  return [=, &gateway, &config](const std::string& child, const std::vector<PenaltyCandidate>& parents) {
    return llm_penalties(child, parents, root, root_definition, vocabulary, gateway, config, diag);
  };
}

// ---------------------------------------------------------------------------
// Calibration

/// Filter mutual edges, normalize, compute features, query penalties per child
/// and rescale s' = s * (1 - penalty). With enable_lscsf off the normalized
/// filtered edges are returned with zero penalties and no features.
inline std::vector<CalibratedEdge> calibrate(const std::vector<CandidateEdge>& edges, const std::string& root,
                                             const PipelineConfig& config, const PenaltyFn& penalties) {
  auto filtered = normalize_scores(filter_mutual_edges(edges, config.tau_m));
  std::vector<CalibratedEdge> out;
  out.reserve(filtered.size());
  if (!config.enable_lscsf) {
    for (const auto& e : filtered) out.push_back({e.child, e.parent, e.score, 0.0, e.score, std::nullopt});
    return out;
  }
  auto features = compute_features(filtered, root, config.delta);

  std::vector<std::string> children;
  std::map<std::string, std::vector<PenaltyCandidate>> by_child;
  for (const auto& e : filtered) {
    if (!by_child.count(e.child)) children.push_back(e.child);
    by_child[e.child].push_back({e.parent, e.score, features.at(e.edge())});
  }
  std::vector<std::map<std::string, double>> results(children.size());
  parallel_for(children.size(), config.provider.max_in_flight, [&](std::size_t i) {
    try {
      results[i] = penalties(children[i], by_child[children[i]]);
    } catch (const Error& e) {
      throw Error(e.code(), "stage 'calibration' term '" + children[i] + "': " + e.what());
    }
  });
  std::map<Edge, double> penalty;
  for (std::size_t i = 0; i < children.size(); ++i) {
    for (const auto& [parent, p] : results[i]) penalty[{children[i], parent}] = llm::clamp_penalty(p);
  }
  for (const auto& e : filtered) {
    double p = penalty.count(e.edge()) ? penalty[e.edge()] : 0.0;
    out.push_back({e.child, e.parent, e.score, p, e.score * (1.0 - p), features.at(e.edge())});
  }
  return out;
}

}  // namespace taxind
