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

#ifndef ISAR_IMPORTANCE_H_
#define ISAR_IMPORTANCE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace isar {

enum class ImportanceMethod { kGain, kPermutation, kShap };

const char* ImportanceMethodName(ImportanceMethod method);

// Per-feature importance scores of one method on one dataset split.
struct ImportanceTable {
  ImportanceMethod method = ImportanceMethod::kGain;
  uint64_t split_seed = 0;
  std::vector<std::string> features;
  std::vector<double> scores;
  // Dense ranks, 1 = most important; equal scores share a rank.
  std::vector<int> ranks;
};

std::vector<int> DenseRanks(std::span<const double> scores);

ImportanceTable MakeImportanceTable(ImportanceMethod method, uint64_t split_seed,
                                    std::vector<std::string> features,
                                    std::vector<double> scores);

}  // namespace isar

#endif  // ISAR_IMPORTANCE_H_
