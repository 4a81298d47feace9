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

#ifndef ISAR_TREE_H_
#define ISAR_TREE_H_

#include <span>
#include <vector>

#include "json.hpp"

namespace isar {

// Binary decision tree node. Numeric split semantics: x[feature] <= threshold
// goes left. Leaves have feature == -1 and no children.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  // Leaf output (log-odds contribution for boosted trees, class-1 fraction
  // for CART).
  double value = 0.0;
  // Training rows reaching the node.
  double cover = 0.0;
  // Loss reduction of the split; 0 for leaves.
  double gain = 0.0;

  bool is_leaf() const { return feature < 0; }
};

// Node 0 is the root. Children always have larger ids than their parent.
struct Tree {
  std::vector<TreeNode> nodes;

  int LeafIndex(std::span<const double> x) const;
  double Predict(std::span<const double> x) const {
    return nodes[LeafIndex(x)].value;
  }
  int Depth() const;
  int NumLeaves() const;

  // Structural checks: child ids, leaf/internal consistency, positive covers
  // that add up at every internal node. Throws kModelIntegrity.
  void Validate(int num_features) const;
};

// Additive tree model: margin(x) = base_score + sum_t tree_t(x).
struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;

  double Margin(std::span<const double> x) const;
  void Validate(int num_features) const;
};

nlohmann::json TreeToJson(const Tree& tree);
Tree TreeFromJson(const nlohmann::json& json);

}  // namespace isar

#endif  // ISAR_TREE_H_
