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

// The repeated-split evaluation protocol: stratified split, grid search with
// k-fold CV, refit, test metrics and three importance tables per seed.

#ifndef ISAR_PROTOCOL_H_
#define ISAR_PROTOCOL_H_

#include <cstdint>
#include <span>
#include <vector>

#include "isar/data.h"
#include "isar/eval.h"
#include "isar/gbdt.h"
#include "isar/importance.h"

namespace isar::gbdt {

struct ProtocolOptions {
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double test_fraction = 0.25;
  int cv_folds = 5;
  int permutation_repeats = 10;
};

struct SplitResult {
  uint64_t seed = 0;
  data::SplitPlan plan;
  GridSearchResult search;
  GbdtModel model;
  eval::Metrics train;
  eval::Metrics test;
  eval::Metrics cv;
  ImportanceTable gain;
  ImportanceTable permutation;
  std::vector<double> permutation_sd;
  // Mean |phi| over the split's training rows.
  ImportanceTable shap;
  std::vector<double> split_count;
};

struct ProtocolResult {
  std::vector<SplitResult> splits;
  eval::Metrics mean_train;
  eval::Metrics mean_test;
  eval::Metrics mean_cv;
};

// The dataset must be binarized and encoded.
ProtocolResult RunTenSplits(const data::Dataset& dataset,
                            std::span<const Hyperparams> grid,
                            const ProtocolOptions& options = {});

eval::Metrics MeanMetrics(std::span<const eval::Metrics> metrics);

}  // namespace isar::gbdt

#endif  // ISAR_PROTOCOL_H_
