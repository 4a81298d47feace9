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

#include "isar/posthoc.h"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "isar/error.h"
#include "test_util.h"

namespace isar::posthoc {
namespace {

Rows UniformRows(std::mt19937_64& rng, int n, int d) {
  Rows rows;
  for (int i = 0; i < n; ++i) rows.push_back(testing::RandomInstance(rng, d));
  return rows;
}

TEST(PermutationImportance, UnusedFeatureIsExactlyZero) {
  std::mt19937_64 rng(1);
  const Rows rows = UniformRows(rng, 60, 3);
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(r[0] + 0.3 * r[1] > 0.6);
  const Predictor predict = [](std::span<const double> x) {
    return 0.5 * x[0] + 0.2 * x[1];
  };
  const PermutationResult r = PermutationImportance(predict, rows, labels, 10, 3);
  EXPECT_EQ(r.mean[2], 0.0);
  EXPECT_EQ(r.sd[2], 0.0);
  EXPECT_GT(r.mean[0], 0.0);
}

TEST(PermutationImportance, InformativeFeatureDropsToChance) {
  std::mt19937_64 rng(2);
  const Rows rows = UniformRows(rng, 200, 2);
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(r[0] > 0.5);
  const Predictor predict = [](std::span<const double> x) { return x[0]; };
  const PermutationResult r = PermutationImportance(predict, rows, labels, 20, 9);
  EXPECT_EQ(r.baseline, 1.0);
  EXPECT_NEAR(r.mean[0], 0.5, 0.1);
}

TEST(PermutationImportance, SeededAndValidated) {
  std::mt19937_64 rng(3);
  const Rows rows = UniformRows(rng, 50, 3);
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(r[1] > 0.4);
  const Predictor predict = [](std::span<const double> x) {
    return x[1] * x[2];
  };
  const auto a = PermutationImportance(predict, rows, labels, 5, 11);
  const auto b = PermutationImportance(predict, rows, labels, 5, 11);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sd, b.sd);
  std::vector<int> one_class(rows.size(), 1);
  EXPECT_THROW(PermutationImportance(predict, rows, one_class, 5, 1), Error);
}

TEST(PdpIce, PdpIsColumnMeanOfIce) {
  std::mt19937_64 rng(4);
  testing::RandomTreeOptions opt;
  opt.num_features = 4;
  const TreeEnsemble e = testing::RandomEnsemble(rng, opt, 6);
  const Rows rows = UniformRows(rng, 37, 4);
  const std::vector<double> grid = {0.0, 0.1, 0.33, 0.5, 0.9, 1.0};
  for (int f = 0; f < 4; ++f) {
    const PdpIce out = ComputePdpIce(MarginOf(e), rows, f, grid);
    for (size_t g = 0; g < grid.size(); ++g) {
      double sum = 0.0;
      for (size_t i = 0; i < rows.size(); ++i) {
        std::vector<double> x = rows[i];
        x[f] = grid[g];
        EXPECT_EQ(out.ice.ice[i][g], e.Margin(x));
        sum += out.ice.ice[i][g];
      }
      EXPECT_EQ(out.pdp.pdp[g], sum / rows.size());
    }
  }
}

TEST(PdpIce, ConstantModelIsFlat) {
  std::mt19937_64 rng(5);
  const Rows rows = UniformRows(rng, 10, 2);
  const Predictor constant = [](std::span<const double>) { return 0.42; };
  const std::vector<double> grid = {0.0, 0.5, 1.0};
  const PdpIce out = ComputePdpIce(constant, rows, 1, grid);
  for (double v : out.pdp.pdp) EXPECT_DOUBLE_EQ(v, 0.42);
  for (const auto& curve : out.ice.ice) EXPECT_EQ(curve, out.ice.ice[0]);
}

TEST(PdpIce, HandBuiltStepOnConcentration) {
  const data::Dataset d = testing::PreparedSynth(1, 80);
  const int conc = d.FeatureIndex("concentration_mg_l");
  const Predictor step = [conc](std::span<const double> x) {
    return x[conc] >= 150.0 ? 1.0 : 0.0;
  };
  const std::vector<double> grid = DefaultGrid(d, conc, {});
  EXPECT_EQ(grid, (std::vector<double>{25, 50, 100, 200}));
  const PdpIce out = ComputePdpIce(step, d.rows, conc, grid, &d.schema[conc]);
  EXPECT_EQ(out.pdp.pdp, (std::vector<double>{0, 0, 0, 1}));
  EXPECT_TRUE(out.warnings.empty());
  const std::vector<double> wide = {-5.0, 600.0};
  EXPECT_EQ(ComputePdpIce(step, d.rows, conc, wide, &d.schema[conc])
                .warnings.size(),
            2u);
}

TEST(PdpIce, DefaultGridShapes) {
  const data::Dataset d = testing::PreparedSynth(2, 60);
  const int zeta = d.FeatureIndex("zeta_potential_mv");
  const auto grid = DefaultGrid(d, zeta, {});
  EXPECT_EQ(grid.size(), 20u);
  const auto col = d.Column(zeta);
  EXPECT_EQ(grid.front(), *std::min_element(col.begin(), col.end()));
  EXPECT_EQ(grid.back(), *std::max_element(col.begin(), col.end()));
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  const int morph = d.FeatureIndex("morphology");
  EXPECT_EQ(DefaultGrid(d, morph, {}), (std::vector<double>{0, 1, 2}));
}

TEST(Pdp2d, ConstantAndAdditiveModels) {
  std::mt19937_64 rng(6);
  const Rows rows = UniformRows(rng, 25, 3);
  const std::vector<double> g1 = {0.1, 0.4, 0.8}, g2 = {0.2, 0.6, 0.7, 0.9};
  const Predictor constant = [](std::span<const double>) { return 3.0; };
  for (const auto& row : ComputePdp2d(constant, rows, 0, 1, g1, g2).values) {
    for (double v : row) EXPECT_EQ(v, 3.0);
  }
  const Predictor additive = [](std::span<const double> x) {
    return (x[0] > 0.5 ? 1.0 : -0.5) + (x[1] > 0.65 ? 0.25 : 0.0) + x[2];
  };
  const Pdp2d m = ComputePdp2d(additive, rows, 0, 1, g1, g2);
  for (size_t a = 1; a < g1.size(); ++a) {
    const double offset = m.values[a][0] - m.values[0][0];
    for (size_t b = 0; b < g2.size(); ++b) {
      EXPECT_NEAR(m.values[a][b] - m.values[0][b], offset, 1e-12);
    }
  }
  EXPECT_THROW(ComputePdp2d(additive, rows, 1, 1, g1, g2), Error);
}

TEST(Pdp2d, MarginalizingIgnoredFeatureGivesOneDimensionalPdp) {
  std::mt19937_64 rng(7);
  Rows rows = UniformRows(rng, 30, 3);
  for (auto& r : rows) r[1] = std::floor(r[1] * 3.0);  // three levels
  const Predictor model = [](std::span<const double> x) {
    return std::sin(3.0 * x[0]) * x[2];
  };
  const std::vector<double> g1 = {0.0, 0.3, 0.6, 0.95};
  const std::vector<double> levels = {0.0, 1.0, 2.0};
  std::vector<double> weights(3, 0.0);
  for (const auto& r : rows) weights[static_cast<int>(r[1])] += 1.0 / rows.size();
  const Pdp2d two = ComputePdp2d(model, rows, 0, 1, g1, levels);
  const PdpIce one = ComputePdpIce(model, rows, 0, g1);
  for (size_t a = 0; a < g1.size(); ++a) {
    double marginal = 0.0;
    for (size_t b = 0; b < levels.size(); ++b) marginal += weights[b] * two.values[a][b];
    EXPECT_NEAR(marginal, one.pdp.pdp[a], 1e-12);
  }
}

std::vector<data::FeatureStats> StandardStats(int numeric, bool categorical) {
  std::vector<data::FeatureStats> stats;
  for (int j = 0; j < numeric; ++j) {
    data::FeatureStats s;
    s.name = "x" + std::to_string(j);
    s.mean = 0.0;
    s.sd = 1.0;
    stats.push_back(s);
  }
  if (categorical) {
    data::FeatureStats s;
    s.name = "c";
    s.categorical = true;
    s.frequencies = {{0, 0.5}, {1, 0.3}, {2, 0.2}};
    stats.push_back(s);
  }
  return stats;
}

TEST(Lime, ConstantModelHasZeroWeights) {
  const auto stats = StandardStats(3, true);
  const std::vector<double> x = {0.2, -0.4, 1.0, 1.0};
  const Predictor constant = [](std::span<const double>) { return 0.3; };
  LimeConfig cfg;
  const LimeExplanation e = LimeExplain(constant, x, stats, cfg);
  for (double w : e.weights) EXPECT_LT(std::abs(w), 1e-6);
  EXPECT_NEAR(e.intercept, 0.3, 1e-9);
  EXPECT_NEAR(e.kernel_width, 0.75 * 2.0, 1e-15);
}

TEST(Lime, RecoversDominantFeatureSign) {
  const auto stats = StandardStats(3, true);
  const std::vector<double> x = {0.1, 0.5, -0.3, 2.0};
  const Predictor model = [](std::span<const double> v) {
    return 1.0 / (1.0 + std::exp(-2.0 * v[0]));
  };
  int good = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    LimeConfig cfg;
    cfg.seed = seed;
    const LimeExplanation e = LimeExplain(model, x, stats, cfg);
    bool ok = e.weights[0] > 0.0;
    for (size_t j = 1; j < e.weights.size(); ++j) {
      ok &= std::abs(e.weights[j]) < std::abs(e.weights[0]);
    }
    good += ok;
  }
  EXPECT_GE(good, 18);
}

TEST(Lime, DeterministicAndTopK) {
  const auto stats = StandardStats(4, false);
  const std::vector<double> x = {0.0, 1.0, -1.0, 0.5};
  const Predictor model = [](std::span<const double> v) {
    return v[0] + 0.5 * v[1] - 0.1 * v[2];
  };
  LimeConfig cfg;
  cfg.top_k = 2;
  cfg.seed = 5;
  const LimeExplanation a = LimeExplain(model, x, stats, cfg);
  const LimeExplanation b = LimeExplain(model, x, stats, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.intercept, b.intercept);
  EXPECT_EQ(a.selected, (std::vector<int>{0, 1}));
  EXPECT_EQ(a.weights[2], 0.0);
  EXPECT_EQ(a.weights[3], 0.0);
}

TEST(Lime, DegenerateDesignIsAnError) {
  std::vector<data::FeatureStats> stats = StandardStats(2, false);
  for (auto& s : stats) s.sd = 0.0;
  const Predictor model = [](std::span<const double> v) { return v[0]; };
  EXPECT_THROW(LimeExplain(model, std::vector<double>{0.0, 0.0}, stats, {}),
               Error);
}

ImportanceTable Table(std::vector<double> scores, uint64_t seed = 1,
                      ImportanceMethod method = ImportanceMethod::kGain) {
  std::vector<std::string> names;
  for (size_t j = 0; j < scores.size(); ++j) names.push_back(std::string(1, 'A' + j));
  return MakeImportanceTable(method, seed, names, std::move(scores));
}

TEST(AggregateRanks, IdenticalAndSwappedTables) {
  const std::vector<ImportanceTable> same = {Table({3, 1, 2}), Table({3, 1, 2})};
  const RankSummary s = AggregateRanks(same);
  EXPECT_EQ(s.average_rank, (std::vector<double>{1, 3, 2}));
  EXPECT_EQ(s.order, (std::vector<int>{0, 2, 1}));
  const std::vector<ImportanceTable> swapped = {Table({2, 1}), Table({1, 2})};
  EXPECT_EQ(AggregateRanks(swapped).average_rank, (std::vector<double>{1.5, 1.5}));
}

TEST(AggregateRanks, PermutationInvariantAndChecked) {
  std::mt19937_64 rng(8);
  std::vector<ImportanceTable> tables;
  for (int t = 0; t < 7; ++t) {
    std::vector<double> s(5);
    for (double& v : s) v = static_cast<double>(rng() % 4);
    tables.push_back(Table(s));
  }
  const RankSummary base = AggregateRanks(tables);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(tables.begin(), tables.end(), rng);
    const RankSummary again = AggregateRanks(tables);
    EXPECT_EQ(again.average_rank, base.average_rank);
    EXPECT_EQ(again.order, base.order);
  }
  tables.push_back(Table({1, 2, 3}));
  EXPECT_THROW(AggregateRanks(tables), Error);
}

TEST(Spearman, KnownValues) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {4, 3, 2, 1}, c = {1, 1, 1, 1};
  EXPECT_NEAR(Spearman(a, a), 1.0, 1e-15);
  EXPECT_NEAR(Spearman(a, b), -1.0, 1e-15);
  EXPECT_EQ(Spearman(a, c), 0.0);
}

TEST(SelectReferenceModel, OneSplitAndAurocTieBreak) {
  const RankSummary global = AggregateRanks(std::vector<ImportanceTable>{Table({3, 2, 1})});
  std::vector<SplitRanking> one = {{4, {Table({1, 2, 3}, 4)}, 0.6}};
  EXPECT_EQ(SelectReferenceModel(one, global).seed, 4u);
  std::vector<SplitRanking> two = {{1, {Table({3, 2, 1}, 1)}, 0.7},
                                   {2, {Table({3, 2, 1}, 2)}, 0.8}};
  EXPECT_EQ(SelectReferenceModel(two, global).seed, 2u);
  two[1].test_auroc = 0.7;
  EXPECT_EQ(SelectReferenceModel(two, global).seed, 1u);
}

TEST(SelectReferenceModel, SplitMatchingAverageWins) {
  // Ten splits; only split 5 orders the features like the global average.
  std::vector<SplitRanking> splits;
  std::vector<ImportanceTable> all;
  for (uint64_t s = 1; s <= 10; ++s) {
    std::vector<double> scores = {5, 4, 3, 2, 1};
    if (s != 5) std::swap(scores[s % 4], scores[s % 4 + 1]);
    SplitRanking r{s, {}, s == 5 ? 0.7 : 0.9};
    for (ImportanceMethod m : {ImportanceMethod::kGain, ImportanceMethod::kPermutation,
                               ImportanceMethod::kShap}) {
      r.tables.push_back(Table(scores, s, m));
      all.push_back(r.tables.back());
    }
    splits.push_back(r);
  }
  const RankSummary global = AggregateRanks(all);
  EXPECT_EQ(global.order, (std::vector<int>{0, 1, 2, 3, 4}));
  const ReferenceSelection sel = SelectReferenceModel(splits, global);
  EXPECT_EQ(sel.seed, 5u);
  EXPECT_NEAR(sel.spearman[4], 1.0, 1e-15);
}

}  // namespace
}  // namespace isar::posthoc
