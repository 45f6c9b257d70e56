#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "taxind/core.hpp"

namespace taxind {

using AncestorPair = std::pair<std::string, std::string>;  // (ancestor, descendant)

/// Strict ancestor relation of a valid tree: (a, d) iff a lies on the path
/// from the root to d and a != d.
inline std::set<AncestorPair> ancestor_closure(const Taxonomy& t) {
  auto violations = validate_taxonomy(t);
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidTaxonomy, violations.front().rule + ": " + violations.front().subject);
  }
  auto parent = t.parent_of();
  std::set<AncestorPair> out;
  for (const auto& node : t.nodes) {
    for (auto it = parent.find(node); it != parent.end(); it = parent.find(it->second)) {
      out.emplace(it->second, node);
    }
  }
  return out;
}

/// Matched / predicted / gold counts for one relation type.
struct PrfCounts {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const { return predicted ? static_cast<double>(matched) / predicted : 0.0; }
  double recall() const { return gold ? static_cast<double>(matched) / gold : 0.0; }

  PrfCounts& operator+=(const PrfCounts& o) {
    matched += o.matched;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  bool operator==(const PrfCounts&) const = default;
};

struct EvaluationCounts {
  PrfCounts ancestor;
  PrfCounts edge;
};

template <class T>
PrfCounts count_overlap(const std::set<T>& predicted, const std::set<T>& gold) {
  PrfCounts c{0, predicted.size(), gold.size()};
  for (const auto& x : predicted) c.matched += gold.count(x);
  return c;
}

inline MetricsReport report_from_counts(const EvaluationCounts& c) {
  MetricsReport r;
  r.ancestor_precision = c.ancestor.precision();
  r.ancestor_recall = c.ancestor.recall();
  r.ancestor_f1 = f1_score(r.ancestor_precision, r.ancestor_recall);
  r.edge_precision = c.edge.precision();
  r.edge_recall = c.edge.recall();
  r.edge_f1 = f1_score(r.edge_precision, r.edge_recall);
  return r;
}

inline EvaluationCounts evaluation_counts(const Taxonomy& pred, const Taxonomy& gold) {
  if (pred.nodes != gold.nodes || pred.root != gold.root) {
    std::string detail = pred.root != gold.root ? "roots differ (\"" + pred.root + "\" vs \"" + gold.root + "\")"
                                                : "node sets differ";
    for (const auto& n : gold.nodes) {
      if (!pred.nodes.count(n)) {
        detail += "; missing \"" + n + "\"";
        break;
      }
    }
    for (const auto& n : pred.nodes) {
      if (!gold.nodes.count(n)) {
        detail += "; unexpected \"" + n + "\"";
        break;
      }
    }
    throw Error(ErrorCode::NodeSetMismatch, detail);
  }
  return {count_overlap(ancestor_closure(pred), ancestor_closure(gold)), count_overlap(pred.edges, gold.edges)};
}

/// Ancestor- and edge-level precision, recall and F1.
inline MetricsReport score(const Taxonomy& pred, const Taxonomy& gold) {
  return report_from_counts(evaluation_counts(pred, gold));
}

/// Pools counts across taxonomies before computing P/R/F1.
inline MetricsReport micro_average(const std::vector<EvaluationCounts>& reports) {
  if (reports.empty()) throw Error(ErrorCode::ConfigError, "micro_average needs at least one report");
  EvaluationCounts total;
  for (const auto& r : reports) {
    total.ancestor += r.ancestor;
    total.edge += r.edge;
  }
  return report_from_counts(total);
}

/// Percentage with two decimals, e.g. 0.8 -> 80.0 (printed as 80.00).
inline double as_percent(double fraction) { return std::round(fraction * 10000.0) / 100.0; }

inline json to_percent_json(const MetricsReport& r) {
  return json{{"P_a", as_percent(r.ancestor_precision)}, {"R_a", as_percent(r.ancestor_recall)},
              {"F1_a", as_percent(r.ancestor_f1)},       {"P_e", as_percent(r.edge_precision)},
              {"R_e", as_percent(r.edge_recall)},        {"F1_e", as_percent(r.edge_f1)}};
}

inline json to_json(const PrfCounts& c) {
  return json{{"matched", c.matched}, {"predicted", c.predicted}, {"gold", c.gold}};
}

inline json to_json(const EvaluationCounts& c) {
  return json{{"ancestor", to_json(c.ancestor)}, {"edge", to_json(c.edge)}};
}

/// Metrics report file: one entry per taxonomy plus the micro average.
inline json metrics_report_json(const std::vector<std::pair<std::string, EvaluationCounts>>& per_taxonomy) {
  json items = json::array();
  std::vector<EvaluationCounts> all;
  for (const auto& [name, counts] : per_taxonomy) {
    items.push_back(json{{"name", name}, {"metrics", to_percent_json(report_from_counts(counts))},
                         {"counts", to_json(counts)}});
    all.push_back(counts);
  }
  return json{{"averaging", "micro"},
              {"unit", "percent"},
              {"taxonomies", items},
              {"micro_average", to_percent_json(micro_average(all))}};
}

}  // namespace taxind
