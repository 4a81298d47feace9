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

// Combined per-instance explanation over the complex model and its CART
// surrogate.

#ifndef ISAR_LOCAL_REPORT_H_
#define ISAR_LOCAL_REPORT_H_

#include <span>
#include <vector>

#include "isar/gbdt.h"
#include "isar/posthoc.h"
#include "isar/shap.h"
#include "isar/surrogate.h"

namespace isar::posthoc {

struct LocalReport {
  int predicted_class = 0;
  double probability = 0.0;
  double margin = 0.0;
  shap::ShapExplanation shap;
  LimeExplanation lime;
  surrogate::DecisionPath path;
  // Sign of phi per feature: +1 pushes toward class 1, -1 away, 0 neutral.
  std::vector<int> push;
  int positive_count = 0;
};

// x is in the complex model's feature order; the surrogate's features are
// looked up by name. stats are training statistics in the same order as x.
LocalReport MakeLocalReport(const gbdt::GbdtModel& model,
                            const surrogate::CartModel& surrogate,
                            std::span<const double> x,
                            std::span<const data::FeatureStats> stats,
                            const LimeConfig& lime);

}  // namespace isar::posthoc

#endif  // ISAR_LOCAL_REPORT_H_
