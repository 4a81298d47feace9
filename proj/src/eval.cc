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

#include "isar/eval.h"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "isar/error.h"

namespace isar::eval {

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::kMetric, "scores and labels differ in length");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U, accumulated in integers so the result is exact.
  int64_t twice_u = 0;
  int64_t negatives_below = 0;
  int64_t positives = 0;
  int64_t negatives = 0;
  for (size_t begin = 0; begin < order.size();) {
    size_t end = begin;
    int64_t group_pos = 0;
    int64_t group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[begin]]) {
      (labels[order[end]] == 1 ? group_pos : group_neg) += 1;
      ++end;
    }
    twice_u += 2 * group_pos * negatives_below + group_pos * group_neg;
    negatives_below += group_neg;
    positives += group_pos;
    negatives += group_neg;
    begin = end;
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorKind::kMetric, "AUROC needs both classes");
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives) *
          static_cast<double>(negatives));
}

Metrics ClassificationMetrics(std::span<const double> prob,
                              std::span<const int> labels, double threshold) {
  if (prob.empty()) throw Error(ErrorKind::kMetric, "empty input");
  if (prob.size() != labels.size()) {
    throw Error(ErrorKind::kMetric, "probabilities and labels differ in length");
  }
  // confusion[truth][predicted]
  int64_t confusion[2][2] = {{0, 0}, {0, 0}};
  for (size_t i = 0; i < prob.size(); ++i) {
    if (!(prob[i] >= 0.0 && prob[i] <= 1.0)) {
      throw Error(ErrorKind::kMetric, "probability outside [0, 1]");
    }
    ++confusion[labels[i] == 1][prob[i] >= threshold ? 1 : 0];
  }
  const double n = static_cast<double>(prob.size());
  Metrics m;
  m.n = static_cast<int>(prob.size());
  m.accuracy = (confusion[0][0] + confusion[1][1]) / n;
  for (int c = 0; c < 2; ++c) {
    const int64_t tp = confusion[c][c];
    const int64_t fp = confusion[1 - c][c];
    const int64_t fn = confusion[c][1 - c];
    const int64_t support = tp + fn;
    const int64_t denominator = 2 * tp + fp + fn;
    const double f1 = denominator == 0 ? 0.0 : 2.0 * tp / denominator;
    m.f1_weighted += support / n * f1;
  }
  m.auroc = confusion[0][0] + confusion[0][1] > 0 &&
                    confusion[1][0] + confusion[1][1] > 0
                ? Auroc(prob, labels)
                : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace isar::eval
