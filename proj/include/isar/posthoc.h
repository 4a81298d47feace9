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

// Model-agnostic interpretation: permutation importance, PDP/ICE, LIME and
// cross-split rank aggregation.

#ifndef ISAR_POSTHOC_H_
#define ISAR_POSTHOC_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "isar/data.h"
#include "isar/gbdt.h"
#include "isar/importance.h"
#include "isar/tree.h"

namespace isar::posthoc {

using Rows = std::vector<std::vector<double>>;
using Predictor = std::function<double(std::span<const double>)>;

// The returned predictors hold a reference; the model must outlive them.
Predictor ProbabilityOf(const gbdt::GbdtModel& model);
// Raw ensemble output without a link function (used for CART scores).
Predictor MarginOf(const TreeEnsemble& ensemble);

struct PermutationResult {
  double baseline = 0.0;
  std::vector<double> mean;
  std::vector<double> sd;  // sample standard deviation over repeats
};

inline constexpr int kDefaultPermutationRepeats = 10;

PermutationResult PermutationImportance(const Predictor& predict,
                                        const Rows& rows,
                                        std::span<const int> labels,
                                        int repeats, uint64_t seed);

struct PdpCurve {
  int feature = -1;
  std::vector<double> grid;
  std::vector<double> pdp;
};

struct IceBundle {
  int feature = -1;
  std::vector<double> grid;
  // ice[row][g]
  Rows ice;
};

struct PdpIce {
  PdpCurve pdp;
  IceBundle ice;
  std::vector<std::string> warnings;
};

inline constexpr int kDefaultGridPoints = 20;

// Quantile grid (type-7, deduplicated) for numeric features, the encoded
// category codes for categorical ones.
std::vector<double> DefaultGrid(const data::Dataset& dataset, int feature,
                                std::span<const int> row_ids,
                                int points = kDefaultGridPoints);

// schema, when given, is used only to warn about grid values outside the
// valid range.
PdpIce ComputePdpIce(const Predictor& predict, const Rows& rows, int feature,
                     std::span<const double> grid,
                     const data::FeatureSchema* schema = nullptr);

struct Pdp2d {
  int feature1 = -1;
  int feature2 = -1;
  std::vector<double> grid1;
  std::vector<double> grid2;
  // values[a][b] is the mean prediction with feature1 := grid1[a] and
  // feature2 := grid2[b].
  Rows values;
};

Pdp2d ComputePdp2d(const Predictor& predict, const Rows& rows, int feature1,
                   int feature2, std::span<const double> grid1,
                   std::span<const double> grid2);

struct LimeConfig {
  int n_samples = 1000;
  // <= 0 selects 0.75 * sqrt(d).
  double kernel_width = 0.0;
  int top_k = 7;
  uint64_t seed = 1;
};

struct LimeExplanation {
  // Per feature in the interpretable space: standardized value for numeric
  // features, 1{same category as x} for categorical ones. Unselected
  // features have weight 0.
  std::vector<double> weights;
  std::vector<int> selected;
  double intercept = 0.0;
  double local_fit_r2 = 0.0;
  double local_prediction = 0.0;
  double model_prediction = 0.0;
  double kernel_width = 0.0;
  int n_samples = 0;
  uint64_t seed = 0;
};

LimeExplanation LimeExplain(const Predictor& predict, std::span<const double> x,
                            std::span<const data::FeatureStats> stats,
                            const LimeConfig& config);

struct RankSummary {
  std::vector<std::string> features;   // schema order
  std::vector<double> average_rank;    // aligned with features
  std::vector<int> order;              // feature indices, ascending rank
  std::vector<ImportanceTable> tables;
};

// Average dense rank over all tables. Ties in the order keep feature order.
RankSummary AggregateRanks(std::span<const ImportanceTable> tables);

struct SplitRanking {
  uint64_t seed = 0;
  std::vector<ImportanceTable> tables;
  double test_auroc = 0.0;
};

struct ReferenceSelection {
  uint64_t seed = 0;
  std::vector<double> spearman;  // aligned with the input splits
};

// Spearman correlation with average ranks for ties; 0 when either side is
// constant.
double Spearman(std::span<const double> a, std::span<const double> b);

// Maximizes (Spearman vs the global average ranks, test AUROC), then prefers
// the lower seed.
ReferenceSelection SelectReferenceModel(std::span<const SplitRanking> splits,
                                        const RankSummary& global);

}  // namespace isar::posthoc

#endif  // ISAR_POSTHOC_H_
