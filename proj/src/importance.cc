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

#include "isar/importance.h"

#include <algorithm>
#include <numeric>
#include <utility>

namespace isar {

const char* ImportanceMethodName(ImportanceMethod method) {
  switch (method) {
    case ImportanceMethod::kGain:
      return "gain";
    case ImportanceMethod::kPermutation:
      return "permutation";
    case ImportanceMethod::kShap:
      return "shap";
  }
  return "unknown";
}

std::vector<int> DenseRanks(std::span<const double> scores) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<int> ranks(scores.size(), 0);
  int rank = 0;
  for (size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || scores[order[k]] != scores[order[k - 1]]) ++rank;
    ranks[order[k]] = rank;
  }
  return ranks;
}

ImportanceTable MakeImportanceTable(ImportanceMethod method, uint64_t split_seed,
                                    std::vector<std::string> features,
                                    std::vector<double> scores) {
  ImportanceTable table;
  table.method = method;
  table.split_seed = split_seed;
  table.features = std::move(features);
  table.ranks = DenseRanks(scores);
  table.scores = std::move(scores);
  return table;
}

}  // namespace isar
