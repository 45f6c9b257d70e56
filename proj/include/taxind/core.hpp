#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "taxind/error.hpp"
#include "taxind/text.hpp"

namespace taxind {

using json = nlohmann::json;

/// A term, its (refined) definition and its unit-norm embedding.
struct TermRecord {
  std::string name;
  std::string definition;
  std::optional<std::vector<double>> embedding;

  /// Text fed to the embedding model.
  std::string embedding_text() const { return name + ": " + definition; }
};

inline double l2_norm(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

inline bool is_unit(const std::vector<double>& v, double tol = 1e-6) {
  return std::abs(l2_norm(v) - 1.0) <= tol;
}

/// Directed child -> parent pair. Ordered by (child, parent).
struct Edge {
  std::string child;
  std::string parent;

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;

  /// "child|parent", the key form used in output files.
  std::string key() const { return child + "|" + parent; }
};

/// Rooted taxonomy. Gold and predicted forms share this type; a final predicted
/// taxonomy must additionally be a spanning arborescence.
struct Taxonomy {
  std::string root;
  std::set<std::string> nodes;
  std::set<Edge> edges;

  bool operator==(const Taxonomy&) const = default;

  /// child -> parent. Only meaningful for trees.
  std::map<std::string, std::string> parent_of() const {
    std::map<std::string, std::string> out;
    for (const auto& e : edges) out.emplace(e.child, e.parent);
    return out;
  }

  std::map<std::string, std::vector<std::string>> children_of() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& e : edges) out[e.parent].push_back(e.child);
    return out;
  }
};

enum class EdgeStage { selected, ranked, calibrated };

inline std::string to_string(EdgeStage s) {
  switch (s) {
    case EdgeStage::selected: return "selected";
    case EdgeStage::ranked: return "ranked";
    case EdgeStage::calibrated: return "calibrated";
  }
  return "unknown";
}

/// Scored child -> parent hypothesis, s(t,p).
struct CandidateEdge {
  std::string child;
  std::string parent;
  double score = 0.0;
  EdgeStage stage = EdgeStage::ranked;

  Edge edge() const { return {child, parent}; }
};

// ---------------------------------------------------------------------------
// Deterministic ordering

struct ScoredTerm {
  std::string name;
  double score = 0.0;
};

/// Score descending, then byte-lexicographic name.
inline bool canonical_less(const ScoredTerm& a, const ScoredTerm& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.name < b.name;
}

namespace detail {
template <class Range, class NameOf>
void require_unique(const Range& items, NameOf name_of) {
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (!seen.insert(name_of(item)).second) {
      throw Error(ErrorCode::DuplicateTerm, "duplicate term \"" + name_of(item) + "\"");
    }
  }
}
}  // namespace detail

inline std::vector<std::string> canonical_order(std::vector<std::string> terms) {
  detail::require_unique(terms, [](const std::string& s) { return s; });
  std::stable_sort(terms.begin(), terms.end());
  return terms;
}

inline std::vector<ScoredTerm> canonical_order(std::vector<ScoredTerm> terms) {
  detail::require_unique(terms, [](const ScoredTerm& t) { return t.name; });
  std::stable_sort(terms.begin(), terms.end(), canonical_less);
  return terms;
}

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string rule;     // missing_root, unknown_node, self_loop, root_has_parent,
                        // multiple_parents, cycle, disconnected
  std::string subject;  // offending node or edge

  bool operator==(const Violation&) const = default;
};

inline std::vector<Violation> validate_taxonomy(const Taxonomy& t) {
  std::vector<Violation> out;
  if (t.root.empty() || !t.nodes.count(t.root)) {
    out.push_back({"missing_root", t.root});
  }

  std::map<std::string, std::vector<std::string>> parents;
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& e : t.edges) {
    if (!t.nodes.count(e.child) || !t.nodes.count(e.parent)) {
      out.push_back({"unknown_node", e.key()});
      continue;
    }
    if (e.child == e.parent) {
      out.push_back({"self_loop", e.key()});
      continue;
    }
    parents[e.child].push_back(e.parent);
    children[e.parent].push_back(e.child);
  }
  if (parents.count(t.root)) out.push_back({"root_has_parent", t.root});
  for (const auto& [child, ps] : parents) {
    if (ps.size() > 1) out.push_back({"multiple_parents", child});
  }

  // Cycles along child -> parent arcs; each distinct node set reported once.
  enum class Color { white, grey, black };
  std::map<std::string, Color> color;
  std::vector<std::string> stack;
  std::set<std::set<std::string>> reported;
  std::function<void(const std::string&)> visit = [&](const std::string& v) {
    color[v] = Color::grey;
    stack.push_back(v);
    for (const auto& p : parents[v]) {
      if (color[p] == Color::grey) {
        auto it = std::find(stack.begin(), stack.end(), p);
        std::set<std::string> members(it, stack.end());
        if (reported.insert(members).second) {
          std::string path;
          for (auto jt = it; jt != stack.end(); ++jt) path += *jt + " -> ";
          out.push_back({"cycle", path + p});
        }
      } else if (color[p] == Color::white) {
        visit(p);
      }
    }
    stack.pop_back();
    color[v] = Color::black;
  };
  for (const auto& n : t.nodes) color[n] = Color::white;
  for (const auto& n : t.nodes) {
    if (color[n] == Color::white) visit(n);
  }

  if (t.nodes.count(t.root)) {
    std::set<std::string> seen{t.root};
    std::queue<std::string> frontier;
    frontier.push(t.root);
    while (!frontier.empty()) {
      auto v = frontier.front();
      frontier.pop();
      for (const auto& c : children[v]) {
        if (seen.insert(c).second) frontier.push(c);
      }
    }
    for (const auto& n : t.nodes) {
      if (!seen.count(n)) out.push_back({"disconnected", n});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

/// Precision/recall/F1 for ancestor pairs (_a) and edges (_e), in [0,1].
struct MetricsReport {
  double ancestor_precision = 0.0;
  double ancestor_recall = 0.0;
  double ancestor_f1 = 0.0;
  double edge_precision = 0.0;
  double edge_recall = 0.0;
  double edge_f1 = 0.0;
};

/// Harmonic mean, 0 when p + r = 0.
inline double f1_score(double precision, double recall) {
  double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Predicted-taxonomy JSON

struct PredictedTaxonomy {
  Taxonomy taxonomy;
  std::map<Edge, double> edge_scores;
};

inline json to_json(const PredictedTaxonomy& p) {
  json edges = json::array();
  json scores = json::object();
  for (const auto& e : p.taxonomy.edges) {
    edges.push_back({e.child, e.parent});
    if (auto it = p.edge_scores.find(e); it != p.edge_scores.end()) {
      scores[e.key()] = it->second;
    }
  }
  return json{{"root", p.taxonomy.root}, {"edges", edges}, {"edge_scores", scores}};
}

/// Parses {"root", "edges", "edge_scores"?}. Nodes are the root plus all edge
/// endpoints; an optional "nodes" array adds isolated nodes.
inline PredictedTaxonomy predicted_from_json(const json& j) {
  if (!j.is_object() || !j.contains("root") || !j["root"].is_string() || !j.contains("edges") ||
      !j["edges"].is_array()) {
    throw Error(ErrorCode::ParseError, "taxonomy JSON needs string \"root\" and array \"edges\"");
  }
  PredictedTaxonomy out;
  out.taxonomy.root = normalize_term(j["root"].get<std::string>());
  out.taxonomy.nodes.insert(out.taxonomy.root);
  if (j.contains("nodes") && j["nodes"].is_array()) {
    for (const auto& n : j["nodes"]) out.taxonomy.nodes.insert(normalize_term(n.get<std::string>()));
  }
  for (const auto& e : j["edges"]) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      throw Error(ErrorCode::ParseError, "edge must be [child, parent]: " + e.dump());
    }
    Edge edge{normalize_term(e[0].get<std::string>()), normalize_term(e[1].get<std::string>())};
    out.taxonomy.nodes.insert(edge.child);
    out.taxonomy.nodes.insert(edge.parent);
    out.taxonomy.edges.insert(edge);
  }
  if (j.contains("edge_scores") && j["edge_scores"].is_object()) {
    for (const auto& [key, value] : j["edge_scores"].items()) {
      auto bar = key.find('|');
      if (bar == std::string::npos || !value.is_number()) {
        throw Error(ErrorCode::ParseError, "bad edge_scores entry \"" + key + "\"");
      }
      out.edge_scores[{key.substr(0, bar), key.substr(bar + 1)}] = value.get<double>();
    }
  }
  return out;
}

}  // namespace taxind
