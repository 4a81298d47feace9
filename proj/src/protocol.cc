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

#include "isar/protocol.h"

#include "isar/error.h"
#include "isar/posthoc.h"
#include "isar/shap.h"

namespace isar::gbdt {
namespace {

eval::Metrics Evaluate(const GbdtModel& model, const data::Dataset& dataset,
                       std::span<const int> row_ids) {
  std::vector<double> prob;
  std::vector<int> labels;
  for (int r : row_ids) {
    prob.push_back(model.PredictProba(dataset.rows[r]));
    labels.push_back(dataset.Labels()[r]);
  }
  return eval::ClassificationMetrics(prob, labels);
}

}  // namespace

eval::Metrics MeanMetrics(std::span<const eval::Metrics> metrics) {
  eval::Metrics out;
  out.auroc = out.f1_weighted = out.accuracy = 0.0;
  out.n = 0;
  if (metrics.empty()) return out;
  for (const eval::Metrics& m : metrics) {
    out.auroc += m.auroc;
    out.f1_weighted += m.f1_weighted;
    out.accuracy += m.accuracy;
    out.n += m.n;
  }
  const double k = static_cast<double>(metrics.size());
  out.auroc /= k;
  out.f1_weighted /= k;
  out.accuracy /= k;
  return out;
}

ProtocolResult RunTenSplits(const data::Dataset& dataset,
                            std::span<const Hyperparams> grid,
                            const ProtocolOptions& options) {
  if (!dataset.label) {
    throw Error(ErrorKind::kData, "dataset must be binarized before training");
  }
  if (!dataset.encoded()) {
    throw Error(ErrorKind::kData, "dataset must be encoded before training");
  }
  if (options.seeds.empty()) throw Error(ErrorKind::kConfig, "no split seeds");
  const std::vector<std::string> names = dataset.FeatureNames();
  ProtocolResult result;
  std::vector<eval::Metrics> train, test, cv;
  for (uint64_t seed : options.seeds) {
    SplitResult s;
    s.seed = seed;
    s.plan = data::MakeCvFolds(
        data::StratifiedShuffleSplit(dataset, seed, options.test_fraction),
        dataset.Labels(), options.cv_folds, seed);
    s.search = GridSearch(dataset, s.plan, grid);
    s.model = Train(dataset, s.plan.train_idx, s.search.best);
    s.train = Evaluate(s.model, dataset, s.plan.train_idx);
    s.test = Evaluate(s.model, dataset, s.plan.test_idx);
    s.cv = s.search.table[s.search.best_index].mean;

    s.gain = MakeImportanceTable(ImportanceMethod::kGain, seed, names,
                                 GainImportance(s.model));
    s.split_count = SplitCountImportance(s.model);

    std::vector<std::vector<double>> test_rows, train_rows;
    std::vector<int> test_labels;
    for (int r : s.plan.test_idx) {
      test_rows.push_back(dataset.rows[r]);
      test_labels.push_back(dataset.Labels()[r]);
    }
    for (int r : s.plan.train_idx) train_rows.push_back(dataset.rows[r]);
    const posthoc::PermutationResult perm = posthoc::PermutationImportance(
        posthoc::ProbabilityOf(s.model), test_rows, test_labels,
        options.permutation_repeats, seed);
    s.permutation = MakeImportanceTable(ImportanceMethod::kPermutation, seed,
                                        names, perm.mean);
    s.permutation_sd = perm.sd;
    s.shap = MakeImportanceTable(ImportanceMethod::kShap, seed, names,
                                 shap::GlobalShapImportance(s.model, train_rows));

    train.push_back(s.train);
    test.push_back(s.test);
    cv.push_back(s.cv);
    result.splits.push_back(std::move(s));
  }
  result.mean_train = MeanMetrics(train);
  result.mean_test = MeanMetrics(test);
  result.mean_cv = MeanMetrics(cv);
  return result;
}

}  // namespace isar::gbdt
