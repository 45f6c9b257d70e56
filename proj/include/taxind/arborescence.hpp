#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "taxind/core.hpp"

namespace taxind {

/// Weight of repair arcs root -> v added for unreachable nodes. Lies below any
/// scored evidence that survives calibration.
inline constexpr double kFallbackArcWeight = 1e-4;

/// An arc parent -> child of weight w, stored as the child -> parent
/// hypothesis it came from.
struct WeightedArc {
  std::string child;
  std::string parent;
  double weight = 0.0;
  bool operator==(const WeightedArc&) const = default;
};

struct WeightedDigraph {
  std::set<std::string> nodes;
  std::vector<WeightedArc> arcs;

  void add_arc(std::string child, std::string parent, double weight) {
    if (child == parent) throw Error(ErrorCode::InvalidTaxonomy, "self-loop on \"" + child + "\"");
    if (!std::isfinite(weight)) throw Error(ErrorCode::InvalidTaxonomy, "non-finite weight on " + child + "|" + parent);
    nodes.insert(child);
    nodes.insert(parent);
    arcs.push_back({std::move(child), std::move(parent), weight});
  }
};

/// Adds a root -> v fallback arc for every node that cannot be reached from
/// the root. Graphs in which every node is reachable are returned unchanged.
inline WeightedDigraph ensure_attachable(WeightedDigraph graph, const std::string& root) {
  graph.nodes.insert(root);
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& a : graph.arcs) children[a.parent].push_back(a.child);
  std::set<std::string> reached{root};
  std::queue<std::string> frontier;
  frontier.push(root);
  while (!frontier.empty()) {
    auto v = frontier.front();
    frontier.pop();
    for (const auto& c : children[v]) {
      if (reached.insert(c).second) frontier.push(c);
    }
  }
  for (const auto& n : graph.nodes) {
    if (!reached.count(n)) graph.arcs.push_back({n, root, kFallbackArcWeight});
  }
  return graph;
}

namespace detail {

struct IndexedArc {
  int from;  // parent
  int to;    // child
  double weight;
  int id;    // canonical rank; smaller wins ties
};

/// Chu-Liu/Edmonds with cycle contraction. Returns indices into `arcs`.
inline std::vector<int> edmonds(int n, int root, const std::vector<IndexedArc>& arcs) {
  std::vector<int> best(n, -1);
  for (int i = 0; i < static_cast<int>(arcs.size()); ++i) {
    const auto& a = arcs[i];
    if (a.to == root || a.from == a.to) continue;
    int& b = best[a.to];
    if (b < 0 || a.weight > arcs[b].weight || (a.weight == arcs[b].weight && a.id < arcs[b].id)) b = i;
  }
  for (int v = 0; v < n; ++v) {
    if (v != root && best[v] < 0) throw Error(ErrorCode::Infeasible, "node without incoming arc");
  }

  // Find a cycle among the chosen arcs.
  std::vector<int> color(n, 0);  // 0 unvisited, otherwise walk number
  std::vector<int> cycle;
  for (int start = 0; start < n && cycle.empty(); ++start) {
    int v = start;
    while (v != root && color[v] == 0) {
      color[v] = start + 1;
      v = arcs[best[v]].from;
    }
    if (v != root && color[v] == start + 1) {
      int u = v;
      do {
        cycle.push_back(u);
        u = arcs[best[u]].from;
      } while (u != v);
    }
  }
  if (cycle.empty()) {
    std::vector<int> out;
    for (int v = 0; v < n; ++v) {
      if (v != root) out.push_back(best[v]);
    }
    return out;
  }

  std::vector<char> in_cycle(n, 0);
  for (int v : cycle) in_cycle[v] = 1;
  std::vector<int> remap(n, -1);
  int next = 0;
  for (int v = 0; v < n; ++v) {
    if (!in_cycle[v]) remap[v] = next++;
  }
  const int super = next++;
  for (int v : cycle) remap[v] = super;

  std::vector<IndexedArc> contracted;
  std::vector<int> origin;
  for (int i = 0; i < static_cast<int>(arcs.size()); ++i) {
    const auto& a = arcs[i];
    int u = remap[a.from];
    int v = remap[a.to];
    if (u == v || a.to == root) continue;
    double w = in_cycle[a.to] ? a.weight - arcs[best[a.to]].weight : a.weight;
    contracted.push_back({u, v, w, a.id});
    origin.push_back(i);
  }
  auto chosen = edmonds(next, remap[root], contracted);

  std::vector<int> out;
  int entered = -1;
  for (int c : chosen) {
    int i = origin[c];
    out.push_back(i);
    if (remap[arcs[i].to] == super) entered = arcs[i].to;
  }
  for (int v : cycle) {
    if (v != entered) out.push_back(best[v]);
  }
  return out;
}

}  // namespace detail

/// Maximum-weight spanning arborescence rooted at `root` (arcs run parent ->
/// child). Parallel arcs keep their maximum weight; ties prefer the arc whose
/// (parent, child) pair sorts first, so input order never matters.
inline PredictedTaxonomy max_arborescence(const WeightedDigraph& graph, const std::string& root) {
  std::vector<std::string> names(graph.nodes.begin(), graph.nodes.end());
  if (!graph.nodes.count(root)) names.insert(std::lower_bound(names.begin(), names.end(), root), root);
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(names.size()); ++i) index[names[i]] = i;

  std::map<std::pair<std::string, std::string>, double> best_arc;  // (parent, child) -> weight
  for (const auto& a : graph.arcs) {
    if (a.child == a.parent) throw Error(ErrorCode::InvalidTaxonomy, "self-loop on \"" + a.child + "\"");
    if (!index.count(a.child) || !index.count(a.parent)) {
      throw Error(ErrorCode::InvalidTaxonomy, "arc references unknown node: " + a.child + "|" + a.parent);
    }
    auto key = std::make_pair(a.parent, a.child);
    auto it = best_arc.find(key);
    if (it == best_arc.end() || a.weight > it->second) best_arc[key] = a.weight;
  }
  std::vector<detail::IndexedArc> arcs;
  std::vector<std::pair<std::string, std::string>> keys;
  for (const auto& [key, w] : best_arc) {
    arcs.push_back({index[key.first], index[key.second], w, static_cast<int>(arcs.size())});
    keys.push_back(key);
  }

  std::vector<int> chosen;
  try {
    chosen = detail::edmonds(static_cast<int>(names.size()), index[root], arcs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    throw Error(ErrorCode::Infeasible, "no spanning arborescence rooted at \"" + root + "\"");
  }

  PredictedTaxonomy out;
  out.taxonomy.root = root;
  out.taxonomy.nodes.insert(names.begin(), names.end());
  for (int i : chosen) {
    Edge e{keys[i].second, keys[i].first};
    out.taxonomy.edges.insert(e);
    out.edge_scores[e] = arcs[i].weight;
  }
  return out;
}

/// Sum of the weights of the chosen edges, accumulated in edge order.
inline double total_weight(const PredictedTaxonomy& t) {
  double sum = 0.0;
  for (const auto& e : t.taxonomy.edges) sum += t.edge_scores.at(e);
  return sum;
}

}  // namespace taxind
