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

// Gradient-boosted binary trees with logistic loss, grown leaf-wise with
// exact sorted-scan split finding.

#ifndef ISAR_GBDT_H_
#define ISAR_GBDT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "isar/data.h"
#include "isar/eval.h"
#include "isar/tree.h"
#include "json.hpp"

namespace isar::gbdt {

using Rows = std::vector<std::vector<double>>;

struct Hyperparams {
  int num_trees = 100;
  int max_leaves = 8;
  int max_depth = 6;
  int min_rows_per_leaf = 2;
  double learning_rate = 0.1;
  double feature_subsample_fraction = 1.0;
  double row_subsample_fraction = 1.0;
  uint64_t seed = 1;

  // num_trees may be 0 (prevalence-only model); everything else positive,
  // fractions in (0, 1]. Throws kConfig.
  void Validate() const;
  bool operator==(const Hyperparams&) const = default;
};

// L2 penalty on leaf values and the minimum loss reduction for a split.
inline constexpr double kL2Regularization = 1.0;
inline constexpr double kMinSplitGain = 1e-7;

// num_trees x max_leaves x learning_rate x min_rows_per_leaf, in that nesting
// order (last varies fastest).
std::vector<Hyperparams> DefaultGrid(uint64_t seed = 1);

struct GbdtModel {
  // Shrinkage is already folded into the stored leaf values.
  TreeEnsemble ensemble;
  double learning_rate = 0.1;
  Hyperparams config;
  std::vector<std::string> feature_names;
  data::EncodingMap encoding;
  // Mean training log-loss before the first tree and after each tree.
  std::vector<double> train_log_loss;

  size_t num_features() const { return feature_names.size(); }
  double PredictMargin(std::span<const double> x) const;
  double PredictProba(std::span<const double> x) const;
  // Named lookup; throws kValidation naming the first missing feature.
  double PredictMargin(const std::map<std::string, double>& x) const;
  double PredictProba(const std::map<std::string, double>& x) const;
};

double Sigmoid(double margin);
// Mean logistic loss of margins against binary labels.
double LogLoss(std::span<const double> margins, std::span<const int> labels);

// Fits an ensemble on the given rows. Throws kData when only one class is
// present.
GbdtModel Train(const Rows& x, std::span<const int> labels,
                std::vector<std::string> feature_names, const Hyperparams& h);
GbdtModel Train(const data::Dataset& dataset, std::span<const int> row_ids,
                const Hyperparams& h);

struct CvEntry {
  Hyperparams params;
  // Mean over folds of out-of-fold metrics; n is the total row count.
  eval::Metrics mean;
  std::vector<double> fold_auroc;
  bool flagged = false;
  std::string reason;
};

struct GridSearchResult {
  size_t best_index = 0;
  Hyperparams best;
  std::vector<CvEntry> table;
};

// Scores every config by mean out-of-fold AUROC over plan.cv_folds. The
// best config is the first maximum in grid order; configs where a fold lacks
// a class are flagged and skipped.
GridSearchResult GridSearch(const data::Dataset& dataset,
                            const data::SplitPlan& plan,
                            std::span<const Hyperparams> grid);

// Sum of split gains per feature.
std::vector<double> GainImportance(const GbdtModel& model);
// Number of splits per feature.
std::vector<double> SplitCountImportance(const GbdtModel& model);

inline constexpr char kModelFormat[] = "isar-gbdt/1";

nlohmann::json ModelToJson(const GbdtModel& model);
GbdtModel ModelFromJson(const nlohmann::json& json);

nlohmann::json HyperparamsToJson(const Hyperparams& h);
Hyperparams HyperparamsFromJson(const nlohmann::json& json);

}  // namespace isar::gbdt

#endif  // ISAR_GBDT_H_
