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

#include "isar/shap.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>

#include "isar/error.h"

namespace isar::shap {
namespace {

// One entry of the unique feature path from the root to the current node.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;  // share of cover flowing here when absent
  double one_fraction = 0.0;   // 1 if the instance follows this branch
  double weight = 0.0;         // permutation weight for each subset size
};

using Path = std::vector<PathElement>;

void ExtendPath(Path& path, int depth, double zero_fraction,
                double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight +=
        one_fraction * path[i].weight * (i + 1) / static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * (depth - i) /
                     static_cast<double>(depth + 1);
  }
}

void UnwindPath(Path& path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double saved = path[i].weight;
      path[i].weight = next_one_portion * (depth + 1) / ((i + 1) * one);
      next_one_portion = saved - path[i].weight * zero * (depth - i) /
                                     static_cast<double>(depth + 1);
    } else {
      path[i].weight =
          path[i].weight * (depth + 1) / (zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total weight of the path after removing element `index`, without
// modifying it.
double UnwoundPathSum(const Path& path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].weight;
  double total = 0.0;
  if (one != 0.0) {
    for (int i = depth - 1; i >= 0; --i) {
      const double tmp = next_one_portion * (depth + 1) / ((i + 1) * one);
      total += tmp;
      next_one_portion = path[i].weight - tmp * zero * (depth - i) /
                                               static_cast<double>(depth + 1);
    }
  } else {
    for (int i = depth - 1; i >= 0; --i) {
      total += path[i].weight * (depth + 1) / (zero * (depth - i));
    }
  }
  return total;
}

// Condition semantics: 0 = plain Shapley values; +1 = condition_feature is
// always known (follows x); -1 = condition_feature is never known (cover
// average). The conditioned feature is not a player.
struct Condition {
  int sign = 0;
  int feature = -1;
};

class TreeShapRecursion {
 public:
  TreeShapRecursion(const Tree& tree, std::span<const double> x,
                    std::vector<double>& phi, Condition condition)
      : tree_(tree), x_(x), phi_(phi), condition_(condition) {}

  void Run() {
    Path path(tree_.Depth() + 2);
    Recurse(0, 0, path, 1.0, 1.0, -1, 1.0);
  }

 private:
  void Recurse(int node_id, int depth, Path path, double parent_zero,
               double parent_one, int parent_feature,
               double condition_fraction) {
    if (condition_fraction == 0.0) return;
    if (condition_.sign == 0 || condition_.feature != parent_feature) {
      ExtendPath(path, depth, parent_zero, parent_one, parent_feature);
    }
    const TreeNode& node = tree_.nodes[node_id];
    if (node.is_leaf()) {
      for (int i = 1; i <= depth; ++i) {
        const double w = UnwoundPathSum(path, depth, i);
        const PathElement& el = path[i];
        phi_[el.feature] += w * (el.one_fraction - el.zero_fraction) *
                            node.value * condition_fraction;
      }
      return;
    }
    const bool goes_left = x_[node.feature] <= node.threshold;
    const int hot = goes_left ? node.left : node.right;
    const int cold = goes_left ? node.right : node.left;
    const double hot_zero = tree_.nodes[hot].cover / node.cover;
    const double cold_zero = tree_.nodes[cold].cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature split on earlier along the path is removed and re-added with
    // the combined fractions.
    int index = 0;
    while (index <= depth && path[index].feature != node.feature) ++index;
    if (index != depth + 1) {
      incoming_zero = path[index].zero_fraction;
      incoming_one = path[index].one_fraction;
      UnwindPath(path, depth, index);
      --depth;
    }

    double hot_fraction = condition_fraction;
    double cold_fraction = condition_fraction;
    if (condition_.sign > 0 && node.feature == condition_.feature) {
      cold_fraction = 0.0;
      --depth;
    } else if (condition_.sign < 0 && node.feature == condition_.feature) {
      hot_fraction *= hot_zero;
      cold_fraction *= cold_zero;
      --depth;
    }
    Recurse(hot, depth + 1, path, hot_zero * incoming_zero, incoming_one,
            node.feature, hot_fraction);
    Recurse(cold, depth + 1, std::move(path), cold_zero * incoming_zero, 0.0,
            node.feature, cold_fraction);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::vector<double>& phi_;
  Condition condition_;
};

void CheckInstance(std::span<const double> x, int num_features) {
  if (static_cast<int>(x.size()) != num_features) {
    throw Error(ErrorKind::kValidation,
                "instance has " + std::to_string(x.size()) +
                    " features, expected " + std::to_string(num_features));
  }
}

std::vector<double> ConditionedShap(const TreeEnsemble& ensemble,
                                    std::span<const double> x,
                                    int num_features, Condition condition) {
  std::vector<double> phi(num_features, 0.0);
  for (const Tree& tree : ensemble.trees) {
    TreeShapRecursion(tree, x, phi, condition).Run();
  }
  return phi;
}

double TreeSubsetValue(const Tree& tree, int node_id, std::span<const double> x,
                       const std::vector<bool>& in_set) {
  const TreeNode& node = tree.nodes[node_id];
  if (node.is_leaf()) return node.value;
  if (in_set[node.feature]) {
    return TreeSubsetValue(
        tree, x[node.feature] <= node.threshold ? node.left : node.right, x,
        in_set);
  }
  const TreeNode& left = tree.nodes[node.left];
  const TreeNode& right = tree.nodes[node.right];
  return (left.cover * TreeSubsetValue(tree, node.left, x, in_set) +
          right.cover * TreeSubsetValue(tree, node.right, x, in_set)) /
         node.cover;
}

}  // namespace

double ExpectedValue(const Tree& tree) {
  double total = 0.0;
  const double root_cover = tree.nodes.front().cover;
  for (const TreeNode& node : tree.nodes) {
    if (node.is_leaf()) total += node.cover * node.value;
  }
  return total / root_cover;
}

double SubsetValue(const TreeEnsemble& ensemble, std::span<const double> x,
                   const std::vector<bool>& in_set) {
  double value = ensemble.base_score;
  for (const Tree& tree : ensemble.trees) {
    value += TreeSubsetValue(tree, 0, x, in_set);
  }
  return value;
}

ShapExplanation TreeShap(const TreeEnsemble& ensemble,
                         std::span<const double> x, int num_features) {
  CheckInstance(x, num_features);
  ensemble.Validate(num_features);
  ShapExplanation out;
  out.instance.assign(x.begin(), x.end());
  out.phi = ConditionedShap(ensemble, x, num_features, {});
  out.base_value = ensemble.base_score;
  for (const Tree& tree : ensemble.trees) out.base_value += ExpectedValue(tree);
  out.output_margin = ensemble.Margin(x);
  return out;
}

ShapExplanation TreeShap(const gbdt::GbdtModel& model,
                         std::span<const double> x) {
  return TreeShap(model.ensemble, x, static_cast<int>(model.num_features()));
}

ShapExplanation BruteForceShapley(const TreeEnsemble& ensemble,
                                  std::span<const double> x, int num_features) {
  if (num_features > kMaxBruteForceFeatures) {
    throw Error(ErrorKind::kConfig,
                "brute-force Shapley refuses " + std::to_string(num_features) +
                    " features (limit " +
                    std::to_string(kMaxBruteForceFeatures) + ")");
  }
  CheckInstance(x, num_features);
  ensemble.Validate(num_features);
  const int d = num_features;
  const uint32_t subsets = 1u << d;
  std::vector<double> value(subsets);
  std::vector<bool> in_set(d);
  for (uint32_t mask = 0; mask < subsets; ++mask) {
    for (int j = 0; j < d; ++j) in_set[j] = (mask >> j) & 1u;
    value[mask] = SubsetValue(ensemble, x, in_set);
  }
  // weight[s] = s! (d - s - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (int s = 0; s < d; ++s) {
    double w = 1.0 / d;
    // 1 / (d * C(d - 1, s))
    for (int k = 1; k <= s; ++k) w *= static_cast<double>(k) / (d - k);
    weight[s] = w;
  }
  ShapExplanation out;
  out.instance.assign(x.begin(), x.end());
  out.phi.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    const uint32_t bit = 1u << i;
    for (uint32_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      out.phi[i] += weight[std::popcount(mask)] * (value[mask | bit] - value[mask]);
    }
  }
  out.base_value = value[0];
  out.output_margin = ensemble.Margin(x);
  return out;
}

InteractionMatrix ShapInteractions(const TreeEnsemble& ensemble,
                                   std::span<const double> x,
                                   int num_features) {
  const ShapExplanation shap = TreeShap(ensemble, x, num_features);
  const int d = num_features;
  std::vector<bool> used(d, false);
  for (const Tree& tree : ensemble.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) used[node.feature] = true;
    }
  }
  // raw[j][i]: half the difference of i's attribution with j always known and
  // j never known.
  std::vector<std::vector<double>> raw(d, std::vector<double>(d, 0.0));
  for (int j = 0; j < d; ++j) {
    if (!used[j]) continue;
    const auto on = ConditionedShap(ensemble, x, d, {+1, j});
    const auto off = ConditionedShap(ensemble, x, d, {-1, j});
    for (int i = 0; i < d; ++i) {
      if (i != j) raw[j][i] = 0.5 * (on[i] - off[i]);
    }
  }
  InteractionMatrix out;
  out.base_value = shap.base_value;
  out.output_margin = shap.output_margin;
  out.phi.assign(d, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double v = 0.5 * (raw[i][j] + raw[j][i]);
      out.phi[i][j] = v;
      out.phi[j][i] = v;
    }
  }
  for (int i = 0; i < d; ++i) {
    double off_diagonal = 0.0;
    for (int j = 0; j < d; ++j) {
      if (j != i) off_diagonal += out.phi[i][j];
    }
    out.phi[i][i] = shap.phi[i] - off_diagonal;
  }
  return out;
}

InteractionMatrix ShapInteractions(const gbdt::GbdtModel& model,
                                   std::span<const double> x) {
  return ShapInteractions(model.ensemble, x,
                          static_cast<int>(model.num_features()));
}

std::vector<double> GlobalShapImportance(
    const TreeEnsemble& ensemble,
    const std::vector<std::vector<double>>& rows, int num_features) {
  if (rows.empty()) {
    throw Error(ErrorKind::kData, "SHAP importance needs at least one row");
  }
  std::vector<double> importance(num_features, 0.0);
  for (const auto& row : rows) {
    const ShapExplanation e = TreeShap(ensemble, row, num_features);
    for (int j = 0; j < num_features; ++j) importance[j] += std::abs(e.phi[j]);
  }
  for (double& v : importance) v /= static_cast<double>(rows.size());
  return importance;
}

std::vector<double> GlobalShapImportance(
    const gbdt::GbdtModel& model,
    const std::vector<std::vector<double>>& rows) {
  return GlobalShapImportance(model.ensemble, rows,
                              static_cast<int>(model.num_features()));
}

std::vector<std::pair<double, double>> MainEffectPoints(
    const TreeEnsemble& ensemble, const std::vector<std::vector<double>>& rows,
    int feature, int num_features) {
  if (feature < 0 || feature >= num_features) {
    throw Error(ErrorKind::kValidation, "feature index out of range");
  }
  std::vector<std::pair<double, double>> points;
  points.reserve(rows.size());
  for (const auto& row : rows) {
    const InteractionMatrix m = ShapInteractions(ensemble, row, num_features);
    points.emplace_back(row[feature], m.phi[feature][feature]);
  }
  return points;
}

}  // namespace isar::shap
