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

#include "isar/local_report.h"

#include <map>

#include "isar/error.h"

namespace isar::posthoc {

LocalReport MakeLocalReport(const gbdt::GbdtModel& model,
                            const surrogate::CartModel& surrogate,
                            std::span<const double> x,
                            std::span<const data::FeatureStats> stats,
                            const LimeConfig& lime) {
  if (x.size() != model.num_features()) {
    throw Error(ErrorKind::kValidation, "instance has wrong number of features");
  }
  LocalReport out;
  out.margin = model.PredictMargin(x);
  out.probability = gbdt::Sigmoid(out.margin);
  out.predicted_class = out.probability >= 0.5 ? 1 : 0;
  out.shap = shap::TreeShap(model, x);
  out.lime = LimeExplain(ProbabilityOf(model), x, stats, lime);
  std::map<std::string, double> named;
  for (size_t j = 0; j < x.size(); ++j) named[model.feature_names[j]] = x[j];
  out.path = surrogate::DecisionPathOf(surrogate, named);
  for (double phi : out.shap.phi) {
    const int sign = phi > 0.0 ? 1 : (phi < 0.0 ? -1 : 0);
    out.push.push_back(sign);
    out.positive_count += sign > 0;
  }
  return out;
}

}  // namespace isar::posthoc
