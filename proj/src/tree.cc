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

#include "isar/tree.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "isar/error.h"
#include "isar/json_util.h"

namespace isar {

int Tree::LeafIndex(std::span<const double> x) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    const TreeNode& node = nodes[id];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return id;
}

int Tree::Depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> depth(nodes.size(), 0);
  int max_depth = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    depth[nodes[i].left] = depth[nodes[i].right] = depth[i] + 1;
    max_depth = std::max(max_depth, depth[i] + 1);
  }
  return max_depth;
}

int Tree::NumLeaves() const {
  return static_cast<int>(std::count_if(
      nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

void Tree::Validate(int num_features) const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kModelIntegrity, what);
  };
  if (nodes.empty()) fail("tree has no nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<int> parents(nodes.size(), 0);
  for (int i = 0; i < n; ++i) {
    const TreeNode& node = nodes[i];
    if (!(node.cover > 0.0) || !std::isfinite(node.cover)) {
      fail("node " + std::to_string(i) + " has non-positive cover");
    }
    if (!std::isfinite(node.value) || !std::isfinite(node.threshold)) {
      fail("node " + std::to_string(i) + " has a non-finite value");
    }
    if (node.is_leaf()) {
      if (node.left != -1 || node.right != -1) {
        fail("leaf " + std::to_string(i) + " has children");
      }
      continue;
    }
    if (node.feature >= num_features) {
      fail("node " + std::to_string(i) + " splits on unknown feature " +
           std::to_string(node.feature));
    }
    if (node.left <= i || node.right <= i || node.left >= n ||
        node.right >= n || node.left == node.right) {
      fail("node " + std::to_string(i) + " has invalid children");
    }
    ++parents[node.left];
    ++parents[node.right];
    const double sum = nodes[node.left].cover + nodes[node.right].cover;
    if (std::abs(sum - node.cover) > 1e-9 * std::max(1.0, node.cover)) {
      fail("cover of node " + std::to_string(i) +
           " differs from the sum of its children");
    }
  }
  for (int i = 1; i < n; ++i) {
    if (parents[i] != 1) fail("node " + std::to_string(i) + " is orphaned");
  }
}

double TreeEnsemble::Margin(std::span<const double> x) const {
  double margin = base_score;
  for (const Tree& tree : trees) margin += tree.Predict(x);
  return margin;
}

void TreeEnsemble::Validate(int num_features) const {
  for (const Tree& tree : trees) tree.Validate(num_features);
}

nlohmann::json TreeToJson(const Tree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const TreeNode& node : tree.nodes) {
    nlohmann::json j;
    if (node.is_leaf()) {
      j["value"] = EncodeHexDouble(node.value);
    } else {
      j["feature"] = node.feature;
      j["threshold"] = EncodeHexDouble(node.threshold);
      j["left"] = node.left;
      j["right"] = node.right;
      j["gain"] = EncodeHexDouble(node.gain);
      j["value"] = EncodeHexDouble(node.value);
    }
    j["cover"] = EncodeHexDouble(node.cover);
    nodes.push_back(std::move(j));
  }
  return nlohmann::json{{"nodes", std::move(nodes)}};
}

Tree TreeFromJson(const nlohmann::json& json) {
  Tree tree;
  try {
    for (const auto& j : json.at("nodes")) {
      TreeNode node;
      node.value = ReadDouble(j.at("value"));
      node.cover = ReadDouble(j.at("cover"));
      if (j.contains("feature")) {
        node.feature = j.at("feature").get<int>();
        node.threshold = ReadDouble(j.at("threshold"));
        node.left = j.at("left").get<int>();
        node.right = j.at("right").get<int>();
        node.gain = ReadDouble(j.at("gain"));
      }
      tree.nodes.push_back(node);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("malformed tree document: ") + e.what());
  }
  return tree;
}

}  // namespace isar
