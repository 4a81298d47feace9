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

// Exact Shapley attributions for tree ensembles.
//
// The value of a feature subset S is the path-dependent expectation of the
// ensemble: descend along the instance's branch at splits on features in S,
// and average both children weighted by training cover otherwise. All
// attributions are on the ensemble's raw output (margin) scale.

#ifndef ISAR_SHAP_H_
#define ISAR_SHAP_H_

#include <span>
#include <utility>
#include <vector>

#include "isar/gbdt.h"
#include "isar/tree.h"

namespace isar::shap {

struct ShapExplanation {
  // Expected output with no feature known, v({}).
  double base_value = 0.0;
  std::vector<double> phi;
  std::vector<double> instance;
  double output_margin = 0.0;
};

// Symmetric d x d matrix of SHAP interaction values. Off-diagonal entries
// split each pairwise interaction evenly between (i, j) and (j, i); the
// diagonal holds main effects, so each row sums to phi_i.
struct InteractionMatrix {
  std::vector<std::vector<double>> phi;
  double base_value = 0.0;
  double output_margin = 0.0;
};

// Cover-weighted mean leaf value of one tree.
double ExpectedValue(const Tree& tree);

// v(S) for the ensemble, base score included. in_set[j] marks j in S.
double SubsetValue(const TreeEnsemble& ensemble, std::span<const double> x,
                   const std::vector<bool>& in_set);

// Polynomial-time path-dependent TreeSHAP. Throws kModelIntegrity on
// malformed trees (zero covers, bad children).
ShapExplanation TreeShap(const TreeEnsemble& ensemble,
                         std::span<const double> x, int num_features);
ShapExplanation TreeShap(const gbdt::GbdtModel& model,
                         std::span<const double> x);

inline constexpr int kMaxBruteForceFeatures = 15;

// Enumerates all 2^d feature subsets. Refuses d > kMaxBruteForceFeatures.
ShapExplanation BruteForceShapley(const TreeEnsemble& ensemble,
                                  std::span<const double> x, int num_features);

InteractionMatrix ShapInteractions(const TreeEnsemble& ensemble,
                                   std::span<const double> x,
                                   int num_features);
InteractionMatrix ShapInteractions(const gbdt::GbdtModel& model,
                                   std::span<const double> x);

// Mean |phi_f| over rows. Throws kData on an empty row set.
std::vector<double> GlobalShapImportance(
    const TreeEnsemble& ensemble,
    const std::vector<std::vector<double>>& rows, int num_features);
std::vector<double> GlobalShapImportance(
    const gbdt::GbdtModel& model, const std::vector<std::vector<double>>& rows);

// (x_f, phi_ff) per row: the main-effect scatter of feature f.
std::vector<std::pair<double, double>> MainEffectPoints(
    const TreeEnsemble& ensemble, const std::vector<std::vector<double>>& rows,
    int feature, int num_features);

}  // namespace isar::shap

#endif  // ISAR_SHAP_H_
