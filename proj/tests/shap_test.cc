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

#include "isar/shap.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isar/error.h"
#include "test_util.h"

namespace isar::shap {
namespace {

// Cover-weighted conditional expectation, written independently of the
// library's SubsetValue.
double OracleValue(const Tree& tree, int node, const std::vector<double>& x,
                   unsigned mask) {
  const TreeNode& n = tree.nodes[node];
  if (n.feature < 0) return n.value;
  if (mask & (1u << n.feature)) {
    return OracleValue(tree, x[n.feature] <= n.threshold ? n.left : n.right, x,
                       mask);
  }
  const TreeNode& l = tree.nodes[n.left];
  const TreeNode& r = tree.nodes[n.right];
  return (l.cover * OracleValue(tree, n.left, x, mask) +
          r.cover * OracleValue(tree, n.right, x, mask)) /
         (l.cover + r.cover);
}

double OracleEnsembleValue(const TreeEnsemble& e, const std::vector<double>& x,
                           unsigned mask) {
  double v = e.base_score;
  for (const Tree& t : e.trees) v += OracleValue(t, 0, x, mask);
  return v;
}

double Factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::vector<double> OracleShapley(const TreeEnsemble& e,
                                  const std::vector<double>& x, int d) {
  std::vector<double> values(1u << d);
  for (unsigned s = 0; s < values.size(); ++s) {
    values[s] = OracleEnsembleValue(e, x, s);
  }
  std::vector<double> phi(d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (unsigned s = 0; s < values.size(); ++s) {
      if (s & (1u << i)) continue;
      const int k = std::popcount(s);
      const double w = Factorial(k) * Factorial(d - k - 1) / Factorial(d);
      phi[i] += w * (values[s | (1u << i)] - values[s]);
    }
  }
  return phi;
}

std::vector<std::vector<double>> OracleInteractions(
    const TreeEnsemble& e, const std::vector<double>& x, int d) {
  std::vector<double> values(1u << d);
  for (unsigned s = 0; s < values.size(); ++s) {
    values[s] = OracleEnsembleValue(e, x, s);
  }
  std::vector<std::vector<double>> phi(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const unsigned bi = 1u << i, bj = 1u << j;
      for (unsigned s = 0; s < values.size(); ++s) {
        if (s & (bi | bj)) continue;
        const int k = std::popcount(s);
        const double w =
            Factorial(k) * Factorial(d - k - 2) / (2.0 * Factorial(d - 1));
        phi[i][j] += w * (values[s | bi | bj] - values[s | bi] -
                          values[s | bj] + values[s]);
      }
    }
  }
  const std::vector<double> shapley = OracleShapley(e, x, d);
  for (int i = 0; i < d; ++i) {
    double off = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j != i) off += phi[i][j];
    }
    phi[i][i] = shapley[i] - off;
  }
  return phi;
}

testing::RandomTreeOptions OptionsFor(std::mt19937_64& rng) {
  testing::RandomTreeOptions opt;
  opt.num_features = 2 + static_cast<int>(rng() % 11);
  opt.max_depth = 1 + static_cast<int>(rng() % 6);
  opt.feature_pool = (rng() % 2) ? 0 : std::min(opt.num_features, 3);
  return opt;
}

TEST(TreeShap, MatchesExhaustiveShapleyOnRandomEnsembles) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const testing::RandomTreeOptions opt = OptionsFor(rng);
    const TreeEnsemble e =
        testing::RandomEnsemble(rng, opt, 1 + static_cast<int>(rng() % 10));
    const std::vector<double> x = testing::RandomInstance(rng, opt.num_features);
    const ShapExplanation fast = TreeShap(e, x, opt.num_features);
    const std::vector<double> oracle = OracleShapley(e, x, opt.num_features);
    const ShapExplanation brute = BruteForceShapley(e, x, opt.num_features);
    for (int j = 0; j < opt.num_features; ++j) {
      EXPECT_NEAR(fast.phi[j], oracle[j], 1e-9) << "trial " << trial;
      EXPECT_NEAR(brute.phi[j], oracle[j], 1e-9) << "trial " << trial;
    }
    EXPECT_NEAR(fast.base_value, OracleEnsembleValue(e, x, 0), 1e-12);
  }
}

TEST(TreeShap, AdditivityOnTrainedModel) {
  const data::Dataset d = testing::PreparedSynth(11, 150);
  std::vector<int> all(150);
  for (int i = 0; i < 150; ++i) all[i] = i;
  const gbdt::GbdtModel m = gbdt::Train(d, all, gbdt::Hyperparams{});
  for (const auto& row : d.rows) {
    const ShapExplanation s = TreeShap(m, row);
    double total = s.base_value;
    for (double p : s.phi) total += p;
    EXPECT_NEAR(total, m.PredictMargin(row), 1e-9);
    EXPECT_EQ(s.output_margin, m.PredictMargin(row));
  }
}

TEST(TreeShap, UnusedFeatureGetsZero) {
  std::mt19937_64 rng(5);
  testing::RandomTreeOptions opt;
  opt.num_features = 6;
  opt.feature_pool = 4;
  const TreeEnsemble e = testing::RandomEnsemble(rng, opt, 5);
  for (int r = 0; r < 20; ++r) {
    const auto x = testing::RandomInstance(rng, 6);
    const ShapExplanation s = TreeShap(e, x, 6);
    EXPECT_EQ(s.phi[4], 0.0);
    EXPECT_EQ(s.phi[5], 0.0);
  }
}

TEST(TreeShap, SingleLeafTree) {
  TreeEnsemble e;
  e.base_score = 0.25;
  Tree t;
  t.nodes.resize(1);
  t.nodes[0].value = 1.5;
  t.nodes[0].cover = 3.0;
  e.trees.push_back(t);
  const ShapExplanation s = TreeShap(e, std::vector<double>{0.1, 0.2}, 2);
  EXPECT_EQ(s.phi, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(s.base_value, 1.75);
}

TEST(TreeShap, InstanceSizeChecked) {
  TreeEnsemble e;
  EXPECT_THROW(TreeShap(e, std::vector<double>{1.0}, 2), Error);
}

TEST(BruteForce, RefusesLargeFeatureSets) {
  TreeEnsemble e;
  const std::vector<double> x(16, 0.0);
  EXPECT_THROW(BruteForceShapley(e, x, 16), Error);
}

TEST(Interactions, MatchExhaustiveIndex) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 80; ++trial) {
    testing::RandomTreeOptions opt = OptionsFor(rng);
    opt.num_features = std::min(opt.num_features, 8);
    opt.feature_pool = std::min(opt.feature_pool, opt.num_features);
    const int d = opt.num_features;
    const TreeEnsemble e =
        testing::RandomEnsemble(rng, opt, 1 + static_cast<int>(rng() % 6));
    const auto x = testing::RandomInstance(rng, d);
    const InteractionMatrix fast = ShapInteractions(e, x, d);
    const auto oracle = OracleInteractions(e, x, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        EXPECT_NEAR(fast.phi[i][j], oracle[i][j], 1e-8)
            << "trial " << trial << " (" << i << "," << j << ")";
      }
    }
  }
}

TEST(Interactions, SymmetricAndSumToShap) {
  const data::Dataset d = testing::PreparedSynth(12, 120);
  std::vector<int> all(120);
  for (int i = 0; i < 120; ++i) all[i] = i;
  const gbdt::GbdtModel m = gbdt::Train(d, all, gbdt::Hyperparams{});
  for (int r = 0; r < 20; ++r) {
    const auto& row = d.rows[r];
    const InteractionMatrix im = ShapInteractions(m, row);
    const ShapExplanation s = TreeShap(m, row);
    double total = im.base_value;
    for (size_t i = 0; i < im.phi.size(); ++i) {
      double row_sum = 0.0;
      for (size_t j = 0; j < im.phi.size(); ++j) {
        EXPECT_EQ(im.phi[i][j], im.phi[j][i]);
        row_sum += im.phi[i][j];
      }
      EXPECT_NEAR(row_sum, s.phi[i], 1e-9);
      total += row_sum;
    }
    EXPECT_NEAR(total, m.PredictMargin(row), 1e-9);
  }
}

TEST(GlobalImportance, MeanAbsoluteShap) {
  std::mt19937_64 rng(3);
  testing::RandomTreeOptions opt;
  opt.num_features = 5;
  opt.feature_pool = 3;
  const TreeEnsemble e = testing::RandomEnsemble(rng, opt, 4);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 30; ++r) rows.push_back(testing::RandomInstance(rng, 5));
  const auto importance = GlobalShapImportance(e, rows, 5);
  std::vector<double> expected(5, 0.0);
  for (const auto& row : rows) {
    const auto phi = OracleShapley(e, row, 5);
    for (int j = 0; j < 5; ++j) expected[j] += std::abs(phi[j]) / rows.size();
  }
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(importance[j], expected[j], 1e-9);
  EXPECT_EQ(importance[3], 0.0);
  EXPECT_EQ(importance[4], 0.0);
  EXPECT_THROW(GlobalShapImportance(e, {}, 5), Error);
}

TEST(MainEffect, PairsFeatureValueWithDiagonal) {
  std::mt19937_64 rng(4);
  testing::RandomTreeOptions opt;
  opt.num_features = 4;
  const TreeEnsemble e = testing::RandomEnsemble(rng, opt, 3);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 10; ++r) rows.push_back(testing::RandomInstance(rng, 4));
  const auto points = MainEffectPoints(e, rows, 2, 4);
  ASSERT_EQ(points.size(), rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    EXPECT_EQ(points[r].first, rows[r][2]);
    EXPECT_NEAR(points[r].second, OracleInteractions(e, rows[r], 4)[2][2], 1e-9);
  }
}

}  // namespace
}  // namespace isar::shap
