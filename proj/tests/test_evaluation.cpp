#include <gtest/gtest.h>

#include <random>

#include "oracles/brute_metrics.hpp"
#include "oracles/random_instances.hpp"
#include "taxind/evaluation.hpp"

using namespace taxind;

namespace {

Taxonomy tree(const std::string& root, std::set<std::string> nodes, std::set<Edge> edges) {
  return Taxonomy{root, std::move(nodes), std::move(edges)};
}

}  // namespace

TEST(AncestorClosure, Chain) {
  auto c = ancestor_closure(tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "a"}}));
  EXPECT_EQ(c, (std::set<AncestorPair>{{"r", "a"}, {"r", "b"}, {"a", "b"}}));
}

TEST(AncestorClosure, Star) {
  auto c = ancestor_closure(tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "r"}}));
  EXPECT_EQ(c, (std::set<AncestorPair>{{"r", "a"}, {"r", "b"}}));
}

TEST(AncestorClosure, SingleNodeIsEmpty) { EXPECT_TRUE(ancestor_closure(tree("r", {"r"}, {})).empty()); }

TEST(AncestorClosure, InvalidTreeThrows) {
  try {
    ancestor_closure(tree("r", {"r", "a", "b"}, {{"a", "b"}, {"b", "a"}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidTaxonomy);
  }
}

TEST(Score, IdentityIsPerfect) {
  auto t = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "a"}});
  auto m = score(t, t);
  for (double v : {m.ancestor_precision, m.ancestor_recall, m.ancestor_f1, m.edge_precision, m.edge_recall,
                   m.edge_f1}) {
    EXPECT_EQ(v, 1.0);
  }
}

TEST(Score, ThreeNodeHandCase) {
  auto pred = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "r"}});
  auto gold = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "a"}});
  auto m = score(pred, gold);
  EXPECT_DOUBLE_EQ(m.edge_precision, 0.5);
  EXPECT_DOUBLE_EQ(m.edge_recall, 0.5);
  EXPECT_DOUBLE_EQ(m.edge_f1, 0.5);
  EXPECT_DOUBLE_EQ(m.ancestor_precision, 1.0);
  EXPECT_NEAR(m.ancestor_recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.ancestor_f1, 0.8, 1e-15);
  EXPECT_EQ(as_percent(m.ancestor_f1), 80.0);
  EXPECT_EQ(as_percent(m.edge_f1), 50.0);
}

TEST(Score, NodeSetMismatch) {
  auto a = tree("r", {"r", "a"}, {{"a", "r"}});
  auto b = tree("r", {"r", "b"}, {{"b", "r"}});
  try {
    score(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NodeSetMismatch);
  }
  auto c = tree("a", {"r", "a"}, {{"r", "a"}});
  EXPECT_THROW(score(a, c), Error);
}

TEST(Score, SingleNodeGivesZeros) {
  auto t = tree("r", {"r"}, {});
  auto m = score(t, t);
  EXPECT_EQ(m.ancestor_f1, 0.0);
  EXPECT_EQ(m.edge_f1, 0.0);
}

TEST(F1, ZeroWhenPrecisionAndRecallAreZero) { EXPECT_EQ(f1_score(0.0, 0.0), 0.0); }

TEST(MicroAverage, PoolsCounts) {
  EvaluationCounts a{{1, 2, 4}, {1, 2, 4}};
  EvaluationCounts b{{3, 3, 3}, {3, 3, 3}};
  auto m = micro_average({a, b});
  EXPECT_DOUBLE_EQ(m.ancestor_precision, 4.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.ancestor_recall, 4.0 / 7.0);
  EXPECT_DOUBLE_EQ(m.edge_precision, 4.0 / 5.0);
}

TEST(MicroAverage, SingletonAndDuplicateInvariance) {
  auto pred = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "r"}});
  auto gold = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "a"}});
  auto c = evaluation_counts(pred, gold);
  auto own = report_from_counts(c);
  auto one = micro_average({c});
  auto two = micro_average({c, c});
  EXPECT_EQ(one.ancestor_f1, own.ancestor_f1);
  EXPECT_EQ(two.ancestor_f1, own.ancestor_f1);
  EXPECT_EQ(two.edge_recall, own.edge_recall);
}

TEST(MetricsReportJson, PercentagesWithTwoDecimals) {
  auto pred = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "r"}});
  auto gold = tree("r", {"r", "a", "b"}, {{"a", "r"}, {"b", "a"}});
  auto j = metrics_report_json({{"case", evaluation_counts(pred, gold)}});
  EXPECT_EQ(j["averaging"], "micro");
  EXPECT_EQ(j["micro_average"]["R_a"].get<double>(), 66.67);
  EXPECT_EQ(j["micro_average"]["F1_a"].get<double>(), 80.0);
  EXPECT_EQ(j["taxonomies"][0]["name"], "case");
}

TEST(EvaluationProperty, MatchesBruteForceClosure) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    int n = std::uniform_int_distribution<int>(1, 20)(rng);
    auto gold = oracle::random_tree(rng, n);
    auto pred = oracle::perturb_tree(rng, gold, 0.4);
    auto expected = oracle::brute_metrics(pred, gold);
    auto m = score(oracle::to_taxonomy(pred), oracle::to_taxonomy(gold));
    EXPECT_NEAR(m.ancestor_precision, expected.p_a, 1e-9);
    EXPECT_NEAR(m.ancestor_recall, expected.r_a, 1e-9);
    EXPECT_NEAR(m.ancestor_f1, expected.f1_a, 1e-9);
    EXPECT_NEAR(m.edge_precision, expected.p_e, 1e-9);
    EXPECT_NEAR(m.edge_recall, expected.r_e, 1e-9);
    EXPECT_NEAR(m.edge_f1, expected.f1_e, 1e-9);
  }
}

TEST(EvaluationProperty, SelfScoreIsPerfectAndF1IsHarmonicMean) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    int n = std::uniform_int_distribution<int>(2, 20)(rng);
    auto gold = oracle::to_taxonomy(oracle::random_tree(rng, n));
    auto self = score(gold, gold);
    EXPECT_EQ(self.ancestor_f1, 1.0);
    EXPECT_EQ(self.edge_f1, 1.0);
    auto pred = oracle::to_taxonomy(oracle::perturb_tree(rng, oracle::random_tree(rng, n), 0.5));
    auto m = score(pred, gold);
    EXPECT_NEAR(m.ancestor_f1, f1_score(m.ancestor_precision, m.ancestor_recall), 1e-9);
    EXPECT_NEAR(m.edge_f1, f1_score(m.edge_precision, m.edge_recall), 1e-9);
  }
}
