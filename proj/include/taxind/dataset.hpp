#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taxind/config.hpp"

namespace taxind {

struct TaskTerm {
  std::string name;
  std::optional<std::string> definition;
  bool operator==(const TaskTerm&) const = default;
};

/// Induction task: a root concept, the terms to organize and an optional gold
/// tree over root + terms. `terms` never contains the root.
struct Task {
  std::string root;
  std::optional<std::string> root_definition;
  std::vector<TaskTerm> terms;
  std::optional<Taxonomy> gold;

  bool operator==(const Task&) const = default;

  std::set<std::string> node_names() const {
    std::set<std::string> out{root};
    for (const auto& t : terms) out.insert(t.name);
    return out;
  }
};

inline json to_json(const Task& task) {
  json terms = json::array();
  for (const auto& t : task.terms) {
    terms.push_back(json{{"name", t.name}, {"definition", t.definition ? json(*t.definition) : json(nullptr)}});
  }
  json gold = nullptr;
  if (task.gold) {
    gold = json::array();
    for (const auto& e : task.gold->edges) gold.push_back({e.child, e.parent});
  }
  return json{{"root", task.root},
              {"root_definition", task.root_definition ? json(*task.root_definition) : json(nullptr)},
              {"terms", terms},
              {"gold_edges", gold}};
}

namespace detail {
inline std::optional<std::string> optional_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw Error(ErrorCode::ParseError, where + ": \"" + key + "\" must be a string or null");
  return j[key].get<std::string>();
}
}  // namespace detail

/// Builds and validates a task from its JSON form. A term equal to the root is
/// folded into the root (its definition fills a missing root_definition).
inline Task task_from_json(const json& j) {
  if (!j.is_object() || !j.contains("root") || !j["root"].is_string() || !j.contains("terms") ||
      !j["terms"].is_array()) {
    throw Error(ErrorCode::ParseError, "task needs string \"root\" and array \"terms\"");
  }
  Task task;
  task.root = normalize_term(j["root"].get<std::string>());
  if (task.root.empty()) throw Error(ErrorCode::ParseError, "task root is empty");
  task.root_definition = detail::optional_string(j, "root_definition", "task");

  std::set<std::string> seen{task.root};
  bool root_listed = false;
  for (const auto& item : j["terms"]) {
    TaskTerm term;
    if (item.is_string()) {
      term.name = normalize_term(item.get<std::string>());
    } else if (item.is_object() && item.contains("name") && item["name"].is_string()) {
      term.name = normalize_term(item["name"].get<std::string>());
      term.definition = detail::optional_string(item, "definition", "term '" + term.name + "'");
    } else {
      throw Error(ErrorCode::ParseError, "term entries need a string \"name\": " + item.dump());
    }
    if (term.name.empty()) throw Error(ErrorCode::ParseError, "term name is empty");
    if (term.name == task.root && !root_listed) {
      root_listed = true;
      if (!task.root_definition) task.root_definition = term.definition;
      continue;
    }
    if (!seen.insert(term.name).second) {
      throw Error(ErrorCode::DuplicateTerm, "duplicate term \"" + term.name + "\"");
    }
    task.terms.push_back(std::move(term));
  }

  if (j.contains("gold_edges") && !j["gold_edges"].is_null()) {
    if (!j["gold_edges"].is_array()) throw Error(ErrorCode::ParseError, "gold_edges must be an array or null");
    Taxonomy gold;
    gold.root = task.root;
    gold.nodes = task.node_names();
    for (const auto& e : j["gold_edges"]) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
        throw Error(ErrorCode::ParseError, "gold edge must be [child, parent]: " + e.dump());
      }
      Edge edge{normalize_term(e[0].get<std::string>()), normalize_term(e[1].get<std::string>())};
      for (const auto* n : {&edge.child, &edge.parent}) {
        if (!gold.nodes.count(*n)) throw Error(ErrorCode::TermMismatch, "gold edge names unknown term \"" + *n + "\"");
      }
      gold.edges.insert(edge);
    }
    auto violations = validate_taxonomy(gold);
    if (!violations.empty()) {
      const auto& v = violations.front();
      throw Error(v.rule == "disconnected" ? ErrorCode::TermMismatch : ErrorCode::GoldInvalid,
                  "gold taxonomy: " + v.rule + " (" + v.subject + ")");
    }
    task.gold = std::move(gold);
  }
  return task;
}

inline Task load_task(const std::string& path) {
  auto j = read_json_file(path);
  try {
    return task_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), "'" + path + "': " + e.what());
  }
}

inline void save_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// External formats

enum class ExternalFormat {
  edge_list,      // "child<TAB>parent" per line
  term_relation,  // term file ("term[<TAB>definition]") + edge-list relation file
};

inline ExternalFormat parse_external_format(const std::string& s) {
  if (s == "edge-list") return ExternalFormat::edge_list;
  if (s == "term-relation") return ExternalFormat::term_relation;
  throw Error(ErrorCode::ConfigError, "unknown format '" + s + "' (expected edge-list or term-relation)");
}

namespace detail {

inline std::vector<std::vector<std::string>> read_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (auto tab = line.find('\t'); tab != std::string::npos; tab = line.find('\t', start)) {
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline std::set<Edge> read_edge_list(const std::string& path) {
  std::set<Edge> edges;
  std::size_t row = 0;
  for (const auto& fields : read_tsv(path)) {
    ++row;
    if (fields.size() != 2) {
      throw Error(ErrorCode::ParseError, path + ": row " + std::to_string(row) + " must be child<TAB>parent");
    }
    Edge e{normalize_term(fields[0]), normalize_term(fields[1])};
    if (e.child.empty() || e.parent.empty()) {
      throw Error(ErrorCode::ParseError, path + ": row " + std::to_string(row) + " has an empty term");
    }
    edges.insert(e);
  }
  return edges;
}

}  // namespace detail

/// Converts a benchmark edge list (optionally with a term file) into a task.
/// The root is the unique node without a parent.
inline Task convert_external(ExternalFormat format, const std::string& relation_path,
                             const std::optional<std::string>& terms_path = std::nullopt) {
  auto edges = detail::read_edge_list(relation_path);
  std::set<std::string> nodes;
  std::map<std::string, std::optional<std::string>> definitions;
  for (const auto& e : edges) {
    nodes.insert(e.child);
    nodes.insert(e.parent);
  }
  if (format == ExternalFormat::term_relation) {
    if (!terms_path) throw Error(ErrorCode::ConfigError, "term-relation format needs a term file");
    std::set<std::string> listed;
    for (const auto& fields : detail::read_tsv(*terms_path)) {
      auto name = normalize_term(fields[0]);
      if (name.empty()) continue;
      if (!listed.insert(name).second) throw Error(ErrorCode::DuplicateTerm, "duplicate term \"" + name + "\"");
      if (fields.size() > 1 && !trim(fields[1]).empty()) definitions[name] = trim(fields[1]);
    }
    for (const auto& n : nodes) {
      if (!listed.count(n)) throw Error(ErrorCode::TermMismatch, "relation names unlisted term \"" + n + "\"");
    }
    nodes.insert(listed.begin(), listed.end());
  }

  std::set<std::string> children;
  for (const auto& e : edges) children.insert(e.child);
  std::vector<std::string> roots;
  for (const auto& n : nodes) {
    if (!children.count(n)) roots.push_back(n);
  }
  if (roots.size() > 1) {
    throw Error(ErrorCode::MultipleRoots, "parentless nodes \"" + roots[0] + "\" and \"" + roots[1] + "\"");
  }
  if (roots.empty()) throw Error(ErrorCode::CycleInGold, "no parentless node; the relation is cyclic");

  Task task;
  task.root = roots.front();
  if (auto it = definitions.find(task.root); it != definitions.end()) task.root_definition = it->second;
  for (const auto& n : nodes) {
    if (n == task.root) continue;
    auto it = definitions.find(n);
    task.terms.push_back({n, it == definitions.end() ? std::nullopt : it->second});
  }
  Taxonomy gold{task.root, nodes, edges};
  for (const auto& v : validate_taxonomy(gold)) {
    if (v.rule == "cycle") throw Error(ErrorCode::CycleInGold, "cycle " + v.subject);
  }
  auto violations = validate_taxonomy(gold);
  if (!violations.empty()) {
    throw Error(ErrorCode::GoldInvalid, violations.front().rule + " (" + violations.front().subject + ")");
  }
  task.gold = std::move(gold);
  return task;
}

}  // namespace taxind
