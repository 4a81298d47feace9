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

#ifndef ISAR_EVAL_H_
#define ISAR_EVAL_H_

#include <span>

namespace isar::eval {

struct Metrics {
  double auroc = 0.0;
  double f1_weighted = 0.0;
  double accuracy = 0.0;
  int n = 0;
};

// Mann-Whitney AUROC: (concordant + 0.5 * tied) / (P * N) over all
// positive-negative pairs. Throws kMetric unless both classes are present.
double Auroc(std::span<const double> scores, std::span<const int> labels);

inline constexpr double kDefaultThreshold = 0.5;

// Predictions are 1{prob >= threshold}. Weighted F1 averages per-class F1 by
// class support; a class with no predicted and no true members scores 0.
// auroc is NaN when only one class is present.
Metrics ClassificationMetrics(std::span<const double> prob,
                              std::span<const int> labels,
                              double threshold = kDefaultThreshold);

}  // namespace isar::eval

#endif  // ISAR_EVAL_H_
