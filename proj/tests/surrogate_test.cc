// Copyright 2026 The ISAR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "isar/surrogate.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "isar/error.h"
#include "test_util.h"

namespace isar::surrogate {
namespace {

struct Planted {
  Rows x;
  std::vector<int> y;
};

// y = 1{f1 > 0.4 AND f2 <= 0.6} over four uniform features.
Planted PlantedRule(uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  Planted p;
  for (int i = 0; i < n; ++i) {
    p.x.push_back(testing::RandomInstance(rng, 4));
    p.y.push_back(p.x.back()[1] > 0.4 && p.x.back()[2] <= 0.6);
  }
  return p;
}

double Jaccard(const std::vector<bool>& a, const std::vector<bool>& b) {
  int inter = 0, uni = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

TEST(Cart, FourPointHandCheck) {
  const Rows x = {{0}, {0}, {1}, {1}};
  const std::vector<int> y = {0, 0, 1, 1};
  const CartModel m = FitCart(x, y, {"f"}, CartConfig{});
  ASSERT_EQ(m.tree.nodes.size(), 3u);
  EXPECT_EQ(m.tree.nodes[0].feature, 0);
  EXPECT_EQ(m.tree.nodes[0].threshold, 0.5);
  EXPECT_EQ(m.tree.nodes[1].value, 0.0);
  EXPECT_EQ(m.tree.nodes[2].value, 1.0);
  EXPECT_EQ(m.impurity[0], 0.5);
  EXPECT_EQ(m.impurity[1], 0.0);
  EXPECT_EQ(m.impurity[2], 0.0);
}

TEST(Cart, PicksLowerImpurityFeature) {
  // Feature 0 splits into two 1:1 halves (Gini 0.5); feature 1 is pure.
  const Rows x = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  const std::vector<int> y = {0, 0, 1, 1};
  const CartModel m = FitCart(x, y, {"a", "b"}, CartConfig{});
  EXPECT_EQ(m.tree.nodes[0].feature, 1);
  EXPECT_EQ(m.tree.nodes[0].threshold, 0.5);
}

TEST(Cart, PureAndSingleClassGiveOneLeaf) {
  const Rows x = {{0}, {1}, {2}, {3}};
  const CartModel m = FitCart(x, std::vector<int>{1, 1, 1, 1}, {"f"}, CartConfig{});
  EXPECT_EQ(m.tree.nodes.size(), 1u);
  EXPECT_EQ(m.Predict(std::vector<double>{5}), 1);
  CartConfig shallow;
  shallow.max_depth = 0;
  const CartModel root = FitCart(x, std::vector<int>{0, 1, 0, 1}, {"f"}, shallow);
  const DecisionPath path = DecisionPathOf(root, std::vector<double>{1.0});
  EXPECT_TRUE(path.steps.empty());
  EXPECT_EQ(path.leaf_counts, (std::array<int, 2>{2, 2}));
}

TEST(Cart, InvariantsOnSynthData) {
  const data::Dataset d = testing::PreparedSynth(5, 150);
  const std::vector<std::string> top = {"concentration_mg_l", "tem_size_nm",
                                        "zeta_potential_mv"};
  const data::Dataset sub = d.SelectFeatures(top);
  const CartModel m = FitCart(sub.rows, sub.Labels(), top, CartConfig{});
  EXPECT_NO_THROW(m.tree.Validate(3));
  EXPECT_LE(m.tree.Depth(), 4);
  for (size_t id = 0; id < m.tree.nodes.size(); ++id) {
    const TreeNode& n = m.tree.nodes[id];
    EXPECT_EQ(m.counts[id][0] + m.counts[id][1], n.cover);
    if (n.is_leaf()) {
      EXPECT_GE(n.cover, 2.0);
      continue;
    }
    const double children =
        (m.tree.nodes[n.left].cover * m.impurity[n.left] +
         m.tree.nodes[n.right].cover * m.impurity[n.right]) /
        n.cover;
    EXPECT_LT(children, m.impurity[id]);
  }
  // Leaf counts match the rows that reach each leaf.
  std::vector<std::array<int, 2>> reached(m.tree.nodes.size(), {0, 0});
  for (size_t i = 0; i < sub.num_rows(); ++i) {
    ++reached[m.tree.LeafIndex(sub.rows[i])][sub.Labels()[i]];
  }
  for (size_t id = 0; id < m.tree.nodes.size(); ++id) {
    if (m.tree.nodes[id].is_leaf()) EXPECT_EQ(reached[id], m.counts[id]);
  }
}

TEST(DecisionPath, AgreesWithPredictOnRandomInstances) {
  const data::Dataset d = testing::PreparedSynth(6, 150);
  const std::vector<std::string> top = {"concentration_mg_l", "tem_size_nm",
                                        "zeta_potential_mv"};
  const data::Dataset sub = d.SelectFeatures(top);
  const CartModel m = FitCart(sub.rows, sub.Labels(), top, CartConfig{});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> conc(0, 250), size(0, 130), zeta(-50, 30);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> x = {conc(rng), size(rng), zeta(rng)};
    const DecisionPath path = DecisionPathOf(m, x);
    EXPECT_EQ(path.predicted_class, m.Predict(x));
    EXPECT_EQ(path.score, m.Score(x));
    int node = 0;
    for (const PathStep& step : path.steps) {
      EXPECT_EQ(step.node, node);
      EXPECT_EQ(step.satisfied, x[step.condition.feature] <= step.condition.threshold);
      node = step.satisfied ? m.tree.nodes[node].left : m.tree.nodes[node].right;
    }
    EXPECT_EQ(node, path.leaf);
  }
}

TEST(DecisionPath, NamedInstanceNeedsEveryFeature) {
  const CartModel m = FitCart({{0}, {0}, {1}, {1}}, std::vector<int>{0, 0, 1, 1},
                              {"zeta"}, CartConfig{});
  const DecisionPath p = DecisionPathOf(m, std::map<std::string, double>{{"zeta", 0.2}});
  ASSERT_EQ(p.steps.size(), 1u);
  EXPECT_TRUE(p.steps[0].satisfied);
  EXPECT_EQ(p.steps[0].condition.ToString(), "zeta <= 0.5");
  try {
    DecisionPathOf(m, std::map<std::string, double>{{"other", 1.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.field(), "zeta");
  }
}

Tree FullTree(int depth, int feature_count, double cover) {
  testing::RandomTreeOptions opt;
  opt.num_features = feature_count;
  opt.max_depth = depth;
  opt.split_probability = 2.0;
  std::mt19937_64 rng(depth * 7 + feature_count);
  Tree t;
  testing::BuildRandomNode(t, rng, opt, 0, cover);
  return t;
}

TEST(ExtractRules, StumpGivesComplementaryPair) {
  TreeEnsemble e;
  e.trees.push_back(FullTree(1, 1, 50));
  std::mt19937_64 rng(2);
  Rows x;
  for (int i = 0; i < 40; ++i) x.push_back(testing::RandomInstance(rng, 1));
  const std::vector<std::string> names = {"f"};
  const auto rules = ExtractRules(e, x, names);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_FALSE(rules[0].conditions[0].greater);
  EXPECT_TRUE(rules[1].conditions[0].greater);
  EXPECT_DOUBLE_EQ(rules[0].support + rules[1].support, 1.0);
  e.trees.push_back(e.trees[0]);
  EXPECT_EQ(ExtractRules(e, x, names).size(), 2u);
}

TEST(ExtractRules, DepthTwoTreeGivesSixRulesThatPartitionSupport) {
  TreeEnsemble e;
  e.trees.push_back(FullTree(2, 3, 200));
  ASSERT_EQ(e.trees[0].NumLeaves(), 4);
  std::mt19937_64 rng(3);
  Rows x;
  for (int i = 0; i < 100; ++i) x.push_back(testing::RandomInstance(rng, 3));
  const std::vector<std::string> names = {"a", "b", "c"};
  const auto rules = ExtractRules(e, x, names);
  ASSERT_EQ(rules.size(), 6u);
  // First-seen order is depth-first, left before right.
  EXPECT_EQ(rules[0].conditions.size(), 1u);
  EXPECT_EQ(rules[1].conditions.size(), 2u);
  EXPECT_EQ(rules[2].conditions.size(), 2u);
  EXPECT_NEAR(rules[0].support, rules[1].support + rules[2].support, 1e-15);
  EXPECT_NEAR(rules[3].support, rules[4].support + rules[5].support, 1e-15);
}

TEST(RuleImportance, Arithmetic) {
  EXPECT_DOUBLE_EQ(RuleImportance(2.0, 0.5), 1.0);
  EXPECT_EQ(RuleImportance(5.0, 0.0), 0.0);
  EXPECT_EQ(RuleImportance(5.0, 1.0), 0.0);
  EXPECT_NEAR(RuleImportance(-3.0, 0.9), 0.9, 1e-15);
  for (double s = 0.05; s < 1.0; s += 0.1) {
    EXPECT_NEAR(RuleImportance(1.7, s), RuleImportance(1.7, 1.0 - s), 1e-15);
  }
  EXPECT_THROW(RuleImportance(1.0, 1.5), Error);
}

Rows RandomColumns(std::mt19937_64& rng, int p, int n) {
  Rows cols(p, std::vector<double>(n));
  std::normal_distribution<double> normal(0, 1);
  for (auto& c : cols) {
    for (double& v : c) v = normal(rng);
  }
  return cols;
}

TEST(L1Logistic, FullShrinkageGivesPrevalenceIntercept) {
  std::mt19937_64 rng(4);
  const Rows cols = RandomColumns(rng, 5, 40);
  std::vector<int> y(40, 0);
  for (int i = 0; i < 12; ++i) y[i] = 1;
  const L1Fit fit = FitL1Logistic(cols, y, MaxLambda(cols, y) * 1.0001, nullptr,
                                  1000, 1e-12);
  for (double c : fit.coef) EXPECT_EQ(c, 0.0);
  EXPECT_NEAR(fit.intercept, std::log(0.3 / 0.7), 1e-12);
  const L1Fit looser = FitL1Logistic(cols, y, MaxLambda(cols, y) * 0.9, nullptr,
                                     1000, 1e-12);
  int nonzero = 0;
  for (double c : looser.coef) nonzero += c != 0.0;
  EXPECT_GE(nonzero, 1);
}

TEST(L1Logistic, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Rows cols = RandomColumns(rng, 8, 60);
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) y.push_back(cols[0][i] + 0.5 * cols[1][i] > 0.2);
    const double lambda = MaxLambda(cols, y) * (0.01 + 0.1 * trial);
    const L1Fit fit = FitL1Logistic(cols, y, lambda, nullptr, 5000, 1e-12);
    for (size_t s = 1; s < fit.objective.size(); ++s) {
      EXPECT_LE(fit.objective[s], fit.objective[s - 1] + 1e-15);
    }
  }
}

TEST(RuleFit, RecoversPlantedRule) {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const Planted p = PlantedRule(seed, 300);
    RuleFitConfig cfg;
    cfg.seed = seed;
    const RuleFitModel m = FitRuleFit(p.x, p.y, {"f0", "f1", "f2", "f3"}, cfg);
    std::vector<bool> planted;
    for (int y : p.y) planted.push_back(y == 1);
    double best = 0.0;
    for (const Rule& r : m.rules) {
      if (r.coefficient == 0.0) continue;
      std::vector<bool> region;
      for (const auto& row : p.x) region.push_back(r.Matches(row));
      best = std::max(best, Jaccard(region, planted));
    }
    EXPECT_GE(best, 0.8) << "seed " << seed;
    EXPECT_LE(m.NumNonzero(), static_cast<int>(m.rules.size() + m.linear_terms.size()));
    for (const Rule& r : m.rules) {
      EXPECT_DOUBLE_EQ(r.importance, RuleImportance(r.coefficient, r.support));
    }
  }
}

TEST(RuleFit, PredictionMatchesDefinition) {
  const Planted p = PlantedRule(9, 120);
  RuleFitConfig cfg;
  cfg.n_trees = 20;
  const RuleFitModel m = FitRuleFit(p.x, p.y, {"f0", "f1", "f2", "f3"}, cfg);
  for (const auto& row : p.x) {
    double margin = m.intercept;
    for (const Rule& r : m.rules) margin += r.coefficient * (r.Matches(row) ? 1 : 0);
    for (const LinearTerm& t : m.linear_terms) {
      margin += t.coefficient * t.Transform(row[t.feature]);
    }
    EXPECT_NEAR(m.Margin(row), margin, 1e-12);
    EXPECT_GT(m.PredictProba(row), 0.0);
    EXPECT_LT(m.PredictProba(row), 1.0);
  }
  const auto counts = RuleFeatureCounts(m, false);
  EXPECT_EQ(counts.size(), 4u);
}

TEST(ExplainCart, SingleSplitAttributesOnlyItsFeature) {
  const Rows x = {{0, 5}, {0, 1}, {1, 3}, {1, 2}, {1, 9}};
  const std::vector<int> y = {0, 0, 1, 1, 1};
  const CartModel m = FitCart(x, y, {"a", "b"}, CartConfig{});
  ASSERT_EQ(m.tree.nodes.size(), 3u);
  const SurrogatePosthoc out = ExplainCart(m, x, {{0.0, 1.0}, {1.0, 5.0, 9.0}});
  for (size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(out.shap[i].phi[1], 0.0);
    EXPECT_NE(out.shap[i].phi[0], 0.0);
    EXPECT_NEAR(out.shap[i].base_value + out.shap[i].phi[0] + out.shap[i].phi[1],
                m.Score(x[i]), 1e-9);
  }
  for (const auto& curve : out.pdp[0].ice.ice) {
    for (double v : curve) EXPECT_TRUE(v == 0.0 || v == 1.0);
  }
}

TEST(ExplainCart, EfficiencyOnSynthSurrogate) {
  const data::Dataset d = testing::PreparedSynth(7, 120);
  const std::vector<std::string> top = {"concentration_mg_l", "tem_size_nm",
                                        "zeta_potential_mv"};
  const data::Dataset sub = d.SelectFeatures(top);
  const CartModel m = FitCart(sub.rows, sub.Labels(), top, CartConfig{});
  const SurrogatePosthoc out =
      ExplainCart(m, sub.rows, {{25, 200}, {10, 60, 120}, {-40, 0, 20}});
  for (size_t i = 0; i < sub.num_rows(); ++i) {
    double total = out.shap[i].base_value;
    for (double v : out.shap[i].phi) total += v;
    EXPECT_NEAR(total, m.Score(sub.rows[i]), 1e-9);
    for (int a = 0; a < 3; ++a) {
      double row_sum = 0.0;
      for (int b = 0; b < 3; ++b) row_sum += out.interactions[i].phi[a][b];
      EXPECT_NEAR(row_sum, out.shap[i].phi[a], 1e-9);
    }
  }
}

}  // namespace
}  // namespace isar::surrogate
