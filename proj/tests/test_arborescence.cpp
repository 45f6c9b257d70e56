#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles/brute_arborescence.hpp"
#include "oracles/random_instances.hpp"
#include "taxind/arborescence.hpp"

using namespace taxind;

namespace {

WeightedDigraph graph(std::initializer_list<WeightedArc> arcs) {
  WeightedDigraph g;
  for (const auto& a : arcs) g.add_arc(a.child, a.parent, a.weight);
  return g;
}

std::set<Edge> edges(std::initializer_list<Edge> e) { return e; }

}  // namespace

TEST(Arborescence, StarIsReturnedWithSummedWeight) {
  auto g = graph({{"a", "r", 0.3}, {"b", "r", 0.2}, {"c", "r", 0.1}});
  auto t = max_arborescence(g, "r");
  EXPECT_EQ(t.taxonomy.edges, edges({{"a", "r"}, {"b", "r"}, {"c", "r"}}));
  EXPECT_NEAR(total_weight(t), 0.6, 1e-12);
}

TEST(Arborescence, ThreeNodeContraction) {
  auto g = graph({{"a", "r", 0.5}, {"b", "r", 0.4}, {"b", "a", 0.9}, {"a", "b", 0.9}});
  auto t = max_arborescence(g, "r");
  EXPECT_EQ(t.taxonomy.edges, edges({{"a", "r"}, {"b", "a"}}));
  EXPECT_NEAR(total_weight(t), 1.4, 1e-12);
}

TEST(Arborescence, BreaksCycleThroughCheapestEntry) {
  // a <-> b <-> c cycle of heavy arcs, entered from r.
  auto g = graph({{"a", "r", 0.1}, {"b", "r", 0.2}, {"c", "r", 0.05}, {"b", "a", 0.9}, {"c", "b", 0.9},
                  {"a", "c", 0.9}});
  auto t = max_arborescence(g, "r");
  EXPECT_TRUE(validate_taxonomy(t.taxonomy).empty());
  EXPECT_EQ(t.taxonomy.edges, edges({{"b", "r"}, {"c", "b"}, {"a", "c"}}));
}

TEST(Arborescence, ArcsIntoRootAreIgnored) {
  auto g = graph({{"a", "r", 0.5}, {"r", "a", 5.0}});
  auto t = max_arborescence(g, "r");
  EXPECT_EQ(t.taxonomy.edges, edges({{"a", "r"}}));
}

TEST(Arborescence, ParallelArcsKeepTheHeaviest) {
  auto g = graph({{"a", "r", 0.2}, {"a", "r", 0.7}});
  auto t = max_arborescence(g, "r");
  EXPECT_DOUBLE_EQ(t.edge_scores.at({"a", "r"}), 0.7);
}

TEST(Arborescence, TiesGoToCanonicallyFirstArc) {
  auto g = graph({{"c", "a", 0.5}, {"c", "b", 0.5}, {"a", "r", 1.0}, {"b", "r", 1.0}});
  auto t = max_arborescence(g, "r");
  EXPECT_TRUE(t.taxonomy.edges.count({"c", "a"}));
}

TEST(Arborescence, UnreachableNodeIsInfeasible) {
  auto g = graph({{"a", "r", 0.5}});
  g.nodes.insert("x");
  try {
    max_arborescence(g, "r");
    FAIL() << "expected Infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(Arborescence, SingleNodeGraph) {
  WeightedDigraph g;
  g.nodes.insert("r");
  auto t = max_arborescence(g, "r");
  EXPECT_TRUE(t.taxonomy.edges.empty());
  EXPECT_EQ(t.taxonomy.nodes, std::set<std::string>{"r"});
}

TEST(Arborescence, RejectsSelfLoopsAndNonFiniteWeights) {
  WeightedDigraph g;
  EXPECT_THROW(g.add_arc("a", "a", 1.0), Error);
  EXPECT_THROW(g.add_arc("a", "b", std::numeric_limits<double>::quiet_NaN()), Error);
}

TEST(EnsureAttachable, AttachableGraphUnchanged) {
  auto g = graph({{"a", "r", 0.5}, {"b", "a", 0.4}});
  auto repaired = ensure_attachable(g, "r");
  EXPECT_EQ(repaired.arcs, g.arcs);
}

TEST(EnsureAttachable, IsolatedNodeGetsFallbackArc) {
  auto g = graph({{"a", "r", 0.5}});
  g.nodes.insert("x");
  auto repaired = ensure_attachable(g, "r");
  ASSERT_EQ(repaired.arcs.size(), 2u);
  EXPECT_EQ(repaired.arcs.back(), (WeightedArc{"x", "r", kFallbackArcWeight}));
  auto t = max_arborescence(repaired, "r");
  EXPECT_TRUE(validate_taxonomy(t.taxonomy).empty());
}

TEST(EnsureAttachable, NodesOnlyInAMutualPairAreRepaired) {
  // After mutual filtering a and b only point at each other.
  auto g = graph({{"a", "b", 0.6}, {"b", "a", 0.6}});
  g.nodes.insert("r");
  auto repaired = ensure_attachable(g, "r");
  EXPECT_EQ(repaired.arcs.size(), 4u);
  auto t = max_arborescence(repaired, "r");
  EXPECT_EQ(t.taxonomy.edges.size(), 2u);
  EXPECT_TRUE(validate_taxonomy(t.taxonomy).empty());
}

TEST(ArborescenceProperty, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(20240611);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = oracle::random_digraph(rng, 6);
    auto brute = oracle::brute_max_arborescence(inst.n, 0, inst.arcs);
    auto g = oracle::to_digraph(inst);
    if (!brute) {
      EXPECT_THROW(max_arborescence(g, oracle::node_name(0)), Error) << "trial " << trial;
      continue;
    }
    auto t = max_arborescence(g, oracle::node_name(0));
    EXPECT_EQ(total_weight(t), brute->weight) << "trial " << trial;
    EXPECT_EQ(t.taxonomy.edges.size(), static_cast<std::size_t>(inst.n - 1));
    EXPECT_TRUE(validate_taxonomy(t.taxonomy).empty());
  }
}

TEST(ArborescenceProperty, ArcOrderDoesNotMatter) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = oracle::random_digraph(rng, 7, 0.7);
    // Coarse weights so ties are common.
    for (auto& a : inst.arcs) a.weight = std::round(a.weight * 4.0) / 4.0;
    auto g = ensure_attachable(oracle::to_digraph(inst), oracle::node_name(0));
    auto reference = max_arborescence(g, oracle::node_name(0));
    for (int k = 0; k < 5; ++k) {
      std::shuffle(g.arcs.begin(), g.arcs.end(), rng);
      auto again = max_arborescence(g, oracle::node_name(0));
      EXPECT_EQ(again.taxonomy.edges, reference.taxonomy.edges) << "trial " << trial;
    }
  }
}
