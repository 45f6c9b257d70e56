#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "taxind/dataset.hpp"
#include "taxind/llm/gateway.hpp"

namespace taxind::llm {

/// Offline chat responder that answers from a gold taxonomy: is-a holds for
/// gold ancestors, ranking gives the gold parent 0.95 and every other
/// candidate at most 0.5, penalties are 0. Used to build replay fixtures.
class GoldOracleChat : public ChatBackend {
 public:
  static constexpr double kParentScore = 0.95;
  static constexpr double kAncestorScore = 0.5;
  static constexpr double kOtherScore = 0.2;

  explicit GoldOracleChat(const Task& task) {
    if (!task.gold) throw Error(ErrorCode::ConfigError, "gold oracle needs a task with gold edges");
    parent_ = task.gold->parent_of();
    root_ = task.root;
    definitions_[task.root] = task.root_definition.value_or(task.root + " is the root topic of this taxonomy.");
    for (const auto& t : task.terms) {
      definitions_[t.name] = t.definition.value_or(t.name + " is a kind of " + parent_.at(t.name) + ".");
    }
  }

  bool is_ancestor(const std::string& anchor, const std::string& query) const {
    for (auto it = parent_.find(query); it != parent_.end(); it = parent_.find(it->second)) {
      if (it->second == anchor) return true;
    }
    return false;
  }

  std::string complete(const ChatRequest& request) override {
    const auto& ctx = request.context;
    switch (request.schema) {
      case ResponseSchema::refine_definition: {
        auto term = ctx.at("term").get<std::string>();
        auto it = definitions_.find(term);
        return json{{"definition", it == definitions_.end() ? term : it->second}}.dump();
      }
      case ResponseSchema::isa_judgment: {
        bool yes = is_ancestor(ctx.at("anchor").get<std::string>(), ctx.at("query").get<std::string>());
        return json{{"answer", yes ? "yes" : "no"}}.dump();
      }
      case ResponseSchema::rank_and_score: {
        auto child = ctx.at("child").get<std::string>();
        std::vector<ScoredTerm> scored;
        for (const auto& c : ctx.at("candidates")) {
          auto name = c.get<std::string>();
          double s = kOtherScore;
          if (parent_.count(child) && parent_.at(child) == name) {
            s = kParentScore;
          } else if (is_ancestor(name, child)) {
            s = kAncestorScore;
          }
          scored.push_back({name, s});
        }
        std::stable_sort(scored.begin(), scored.end(), canonical_less);
        scored.resize(std::min(scored.size(), ctx.at("select").get<std::size_t>()));
        json parents = json::array();
        for (const auto& s : scored) parents.push_back(json{{"parent", s.name}, {"score", s.score}});
        return "```json\n" + json{{"parents", parents}}.dump() + "\n```";
      }
      case ResponseSchema::penalty: {
        json penalties = json::array();
        for (const auto& p : ctx.at("parents")) penalties.push_back(json{{"parent", p}, {"penalty", 0.0}});
        return json{{"penalties", penalties}}.dump();
      }
    }
    throw Error(ErrorCode::SchemaError, "unhandled schema");
  }

 private:
  std::string root_;
  std::map<std::string, std::string> parent_;
  std::map<std::string, std::string> definitions_;
};

}  // namespace taxind::llm
