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

// Self-interpretable models: a Gini CART tree and RuleFit.

#ifndef ISAR_SURROGATE_H_
#define ISAR_SURROGATE_H_

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "isar/posthoc.h"
#include "isar/shap.h"
#include "isar/tree.h"
#include "json.hpp"

namespace isar::surrogate {

using Rows = std::vector<std::vector<double>>;

struct CartConfig {
  int max_depth = 4;
  int min_leaf = 2;
};

struct CartModel {
  // Node value is the class-1 fraction, cover the row count.
  Tree tree;
  // [count of class 0, count of class 1] per node.
  std::vector<std::array<int, 2>> counts;
  std::vector<double> impurity;
  CartConfig config;
  std::vector<std::string> feature_names;

  double Score(std::span<const double> x) const;
  // 1 when the leaf fraction is >= 0.5.
  int Predict(std::span<const double> x) const;
  // One-tree ensemble with base 0, so SHAP and PDP apply directly.
  TreeEnsemble AsEnsemble() const;
};

CartModel FitCart(const Rows& x, std::span<const int> labels,
                  std::vector<std::string> feature_names,
                  const CartConfig& config);

struct Condition {
  int feature = -1;
  std::string name;
  bool greater = false;  // x > threshold when true, x <= threshold otherwise
  double threshold = 0.0;

  bool Holds(std::span<const double> x) const {
    return greater ? x[feature] > threshold : x[feature] <= threshold;
  }
  std::string ToString() const;
  bool operator<(const Condition& o) const {
    if (feature != o.feature) return feature < o.feature;
    if (greater != o.greater) return greater < o.greater;
    return threshold < o.threshold;
  }
  bool operator==(const Condition& o) const {
    return feature == o.feature && greater == o.greater &&
           threshold == o.threshold;
  }
};

struct PathStep {
  // The node's left-branch test, x <= threshold.
  Condition condition;
  double value = 0.0;
  bool satisfied = false;
  int node = -1;
};

struct DecisionPath {
  std::vector<PathStep> steps;
  std::array<int, 2> leaf_counts{0, 0};
  int leaf = 0;
  int predicted_class = 0;
  double score = 0.0;
};

DecisionPath DecisionPathOf(const CartModel& model, std::span<const double> x);
// Throws kValidation naming the first missing feature.
DecisionPath DecisionPathOf(const CartModel& model,
                            const std::map<std::string, double>& x);

struct Rule {
  // Sorted by (feature, greater, threshold).
  std::vector<Condition> conditions;
  double support = 0.0;
  double coefficient = 0.0;
  double importance = 0.0;

  bool Matches(std::span<const double> x) const;
  std::string ToString() const;
};

// Every non-root node of every tree yields its root-to-node conjunction.
// Identical condition sets are kept once, in first-seen order.
std::vector<Rule> ExtractRules(const TreeEnsemble& ensemble, const Rows& x,
                               std::span<const std::string> feature_names);

double RuleImportance(double coefficient, double support);

struct RuleFitConfig {
  int n_trees = 100;
  int rule_depth = 3;
  int path_length = 50;
  // Smallest penalty as a fraction of the one that zeroes every term.
  double path_min_ratio = 0.01;
  int cv_folds = 5;
  uint64_t seed = 1;
  double winsor_fraction = 0.025;
  double row_subsample = 0.5;
  double learning_rate = 0.1;
  int max_sweeps = 1000;
  double tolerance = 1e-9;
};

struct LinearTerm {
  int feature = -1;
  std::string name;
  double lower = 0.0;  // winsorizing bounds
  double upper = 0.0;
  double mean = 0.0;
  double sd = 1.0;
  double coefficient = 0.0;
  double importance = 0.0;

  double Transform(double v) const;
};

struct RuleFitModel {
  std::vector<Rule> rules;
  std::vector<LinearTerm> linear_terms;
  double intercept = 0.0;
  double l1_strength = 0.0;
  std::vector<std::string> feature_names;
  std::vector<double> lambda_path;
  std::vector<double> cv_auroc;  // aligned with lambda_path

  double Margin(std::span<const double> x) const;
  double PredictProba(std::span<const double> x) const;
  int NumNonzero() const;
};

// L1-penalized logistic regression, objective
//   (1/n) sum logloss + lambda * sum |coef|
// with an unpenalized intercept. Each sweep solves the weighted least-squares
// model of the loss by cyclic coordinate descent with soft-thresholding and
// then halves the step until the objective does not increase.
struct L1Fit {
  double intercept = 0.0;
  std::vector<double> coef;
  std::vector<double> objective;  // after each sweep
  int sweeps = 0;
};

// columns[j][i] holds term j for row i. warm may be null.
L1Fit FitL1Logistic(const Rows& columns, std::span<const int> labels,
                    double lambda, const L1Fit* warm, int max_sweeps,
                    double tolerance);

// Smallest penalty at which every coefficient is zero.
double MaxLambda(const Rows& columns, std::span<const int> labels);

RuleFitModel FitRuleFit(const Rows& x, std::span<const int> labels,
                        std::vector<std::string> feature_names,
                        const RuleFitConfig& config);

// Number of rules mentioning each feature, aligned with feature_names.
std::vector<int> RuleFeatureCounts(const RuleFitModel& model,
                                   bool nonzero_only);

struct SurrogatePosthoc {
  std::vector<posthoc::PdpIce> pdp;            // one per feature
  std::vector<shap::ShapExplanation> shap;     // one per row
  std::vector<shap::InteractionMatrix> interactions;
};

SurrogatePosthoc ExplainCart(const CartModel& model, const Rows& rows,
                             const std::vector<std::vector<double>>& grids);

inline constexpr char kCartFormat[] = "isar-cart/1";
inline constexpr char kRuleFitFormat[] = "isar-rulefit/1";

// Reals are hex-float strings; loading validates structure and throws
// kModelIntegrity on a malformed document.
nlohmann::json CartToJson(const CartModel& model);
CartModel CartFromJson(const nlohmann::json& json);
nlohmann::json RuleFitToJson(const RuleFitModel& model);
RuleFitModel RuleFitFromJson(const nlohmann::json& json);

}  // namespace isar::surrogate

#endif  // ISAR_SURROGATE_H_
