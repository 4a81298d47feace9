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

#include "isar/gbdt.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "isar/error.h"
#include "isar/json_util.h"
#include "isar/parallel.h"

namespace isar::gbdt {
namespace {

struct SplitCandidate {
  bool valid = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct LeafState {
  int node = 0;
  int depth = 0;
  double grad = 0.0;
  double hess = 0.0;
  int count = 0;
  SplitCandidate split;
};

double LeafWeight(double grad, double hess) {
  return -grad / (hess + kL2Regularization);
}

double Score(double grad, double hess) {
  return grad * grad / (hess + kL2Regularization);
}

// Grows one tree leaf-wise on the rows flagged in `node_of_row` (entries of -1
// are out of the row sample).
class TreeGrower {
 public:
  TreeGrower(const Rows& x, const std::vector<std::vector<int>>& sorted,
             const std::vector<double>& grad, const std::vector<double>& hess,
             const std::vector<int>& features, const Hyperparams& h)
      : x_(x), sorted_(sorted), grad_(grad), hess_(hess), features_(features),
        h_(h) {}

  Tree Grow(std::vector<int> node_of_row) {
    node_of_row_ = std::move(node_of_row);
    Tree tree;
    tree.nodes.emplace_back();
    LeafState root;
    for (size_t i = 0; i < node_of_row_.size(); ++i) {
      if (node_of_row_[i] != 0) continue;
      root.grad += grad_[i];
      root.hess += hess_[i];
      ++root.count;
    }
    std::vector<LeafState> leaves = {root};
    FindSplit(leaves.back());
    while (static_cast<int>(leaves.size()) < h_.max_leaves) {
      int best = -1;
      for (size_t k = 0; k < leaves.size(); ++k) {
        if (!leaves[k].split.valid) continue;
        if (best < 0 || leaves[k].split.gain > leaves[best].split.gain) {
          best = static_cast<int>(k);
        }
      }
      if (best < 0) break;
      LeafState parent = leaves[best];
      const int left_id = static_cast<int>(tree.nodes.size());
      const int right_id = left_id + 1;
      TreeNode& node = tree.nodes[parent.node];
      node.feature = parent.split.feature;
      node.threshold = parent.split.threshold;
      node.gain = parent.split.gain;
      node.left = left_id;
      node.right = right_id;
      node.value = h_.learning_rate * LeafWeight(parent.grad, parent.hess);
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();

      LeafState left;
      left.node = left_id;
      left.depth = parent.depth + 1;
      LeafState right;
      right.node = right_id;
      right.depth = parent.depth + 1;
      for (size_t i = 0; i < node_of_row_.size(); ++i) {
        if (node_of_row_[i] != parent.node) continue;
        LeafState& child =
            x_[i][parent.split.feature] <= parent.split.threshold ? left
                                                                  : right;
        node_of_row_[i] = child.node;
        child.grad += grad_[i];
        child.hess += hess_[i];
        ++child.count;
      }
      FindSplit(left);
      FindSplit(right);
      leaves[best] = left;
      leaves.push_back(right);
    }
    for (const LeafState& leaf : leaves) {
      tree.nodes[leaf.node].value =
          h_.learning_rate * LeafWeight(leaf.grad, leaf.hess);
    }
    return tree;
  }

 private:
  void FindSplit(LeafState& leaf) const {
    leaf.split = {};
    if (leaf.depth >= h_.max_depth) return;
    if (leaf.count < 2 * h_.min_rows_per_leaf) return;
    const double parent_score = Score(leaf.grad, leaf.hess);
    for (int feature : features_) {
      double grad_left = 0.0;
      double hess_left = 0.0;
      int count_left = 0;
      double previous = 0.0;
      for (int i : sorted_[feature]) {
        if (node_of_row_[i] != leaf.node) continue;
        const double value = x_[i][feature];
        if (count_left >= h_.min_rows_per_leaf && value > previous &&
            leaf.count - count_left >= h_.min_rows_per_leaf) {
          const double gain =
              0.5 * (Score(grad_left, hess_left) +
                     Score(leaf.grad - grad_left, leaf.hess - hess_left) -
                     parent_score);
          if (gain > kMinSplitGain &&
              (!leaf.split.valid || gain > leaf.split.gain)) {
            double threshold = 0.5 * (previous + value);
            if (!(threshold < value)) threshold = previous;
            leaf.split = {true, feature, threshold, gain};
          }
        }
        grad_left += grad_[i];
        hess_left += hess_[i];
        ++count_left;
        previous = value;
      }
    }
  }

  const Rows& x_;
  const std::vector<std::vector<int>>& sorted_;
  const std::vector<double>& grad_;
  const std::vector<double>& hess_;
  const std::vector<int>& features_;
  const Hyperparams& h_;
  std::vector<int> node_of_row_;
};

void CheckFeatureCount(const GbdtModel& model, size_t size) {
  if (size != model.num_features()) {
    throw Error(ErrorKind::kValidation,
                "instance has " + std::to_string(size) + " features, model " +
                    "expects " + std::to_string(model.num_features()));
  }
}

std::vector<double> NamedToVector(const GbdtModel& model,
                                  const std::map<std::string, double>& x) {
  std::vector<double> values;
  values.reserve(model.num_features());
  for (const std::string& name : model.feature_names) {
    auto it = x.find(name);
    if (it == x.end()) {
      throw Error(ErrorKind::kValidation, "missing feature '" + name + "'",
                  name);
    }
    values.push_back(it->second);
  }
  return values;
}

}  // namespace

void Hyperparams::Validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorKind::kConfig, "invalid hyperparameter: " + what);
  };
  if (num_trees < 0) fail("num_trees < 0");
  if (max_leaves < 2) fail("max_leaves < 2");
  if (max_depth < 1) fail("max_depth < 1");
  if (min_rows_per_leaf < 1) fail("min_rows_per_leaf < 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    fail("learning_rate outside (0, 1]");
  }
  if (!(feature_subsample_fraction > 0.0 && feature_subsample_fraction <= 1.0)) {
    fail("feature_subsample_fraction outside (0, 1]");
  }
  if (!(row_subsample_fraction > 0.0 && row_subsample_fraction <= 1.0)) {
    fail("row_subsample_fraction outside (0, 1]");
  }
}

std::vector<Hyperparams> DefaultGrid(uint64_t seed) {
  std::vector<Hyperparams> grid;
  for (int trees : {50, 100, 200}) {
    for (int leaves : {4, 8, 16}) {
      for (double rate : {0.05, 0.1}) {
        for (int min_rows : {2, 5}) {
          Hyperparams h;
          h.num_trees = trees;
          h.max_leaves = leaves;
          h.learning_rate = rate;
          h.min_rows_per_leaf = min_rows;
          h.seed = seed;
          grid.push_back(h);
        }
      }
    }
  }
  return grid;
}

double Sigmoid(double margin) {
  const double p = 1.0 / (1.0 + std::exp(-margin));
  // Keep probabilities strictly inside (0, 1).
  return std::clamp(p, std::numeric_limits<double>::min(),
                    1.0 - std::numeric_limits<double>::epsilon() / 2);
}

double LogLoss(std::span<const double> margins, std::span<const int> labels) {
  double total = 0.0;
  for (size_t i = 0; i < margins.size(); ++i) {
    // log(1 + e^m) - y * m, written to avoid overflow.
    const double m = margins[i];
    const double softplus =
        m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    total += softplus - labels[i] * m;
  }
  return total / margins.size();
}

double GbdtModel::PredictMargin(std::span<const double> x) const {
  CheckFeatureCount(*this, x.size());
  return ensemble.Margin(x);
}

double GbdtModel::PredictProba(std::span<const double> x) const {
  return Sigmoid(PredictMargin(x));
}

double GbdtModel::PredictMargin(const std::map<std::string, double>& x) const {
  return PredictMargin(NamedToVector(*this, x));
}

double GbdtModel::PredictProba(const std::map<std::string, double>& x) const {
  return Sigmoid(PredictMargin(x));
}

GbdtModel Train(const Rows& x, std::span<const int> labels,
                std::vector<std::string> feature_names, const Hyperparams& h) {
  h.Validate();
  const size_t n = x.size();
  if (n == 0 || labels.size() != n) {
    throw Error(ErrorKind::kData, "training rows and labels mismatch");
  }
  const size_t d = feature_names.size();
  for (const auto& row : x) {
    if (row.size() != d) {
      throw Error(ErrorKind::kData, "training row width differs from feature "
                                    "count");
    }
  }
  const double positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0 || positives == static_cast<double>(n)) {
    throw Error(ErrorKind::kData, "training labels contain a single class");
  }

  GbdtModel model;
  model.feature_names = std::move(feature_names);
  model.config = h;
  model.learning_rate = h.learning_rate;
  const double prevalence = positives / n;
  model.ensemble.base_score = std::log(prevalence / (1.0 - prevalence));

  std::vector<std::vector<int>> sorted(d, std::vector<int>(n));
  for (size_t j = 0; j < d; ++j) {
    std::iota(sorted[j].begin(), sorted[j].end(), 0);
    std::stable_sort(sorted[j].begin(), sorted[j].end(),
                     [&](int a, int b) { return x[a][j] < x[b][j]; });
  }

  std::vector<double> margins(n, model.ensemble.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  model.train_log_loss.push_back(LogLoss(margins, labels));
  std::mt19937_64 rng(h.seed);
  std::vector<int> all_features(d);
  std::iota(all_features.begin(), all_features.end(), 0);
  std::vector<int> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  for (int t = 0; t < h.num_trees; ++t) {
    for (size_t i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-margins[i]));
      grad[i] = p - labels[i];
      hess[i] = p * (1.0 - p);
    }
    std::vector<int> node_of_row(n, 0);
    if (h.row_subsample_fraction < 1.0) {
      const auto keep = std::max<size_t>(
          1, static_cast<size_t>(std::llround(h.row_subsample_fraction * n)));
      std::vector<int> shuffled = all_rows;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      std::fill(node_of_row.begin(), node_of_row.end(), -1);
      for (size_t k = 0; k < keep; ++k) node_of_row[shuffled[k]] = 0;
    }
    std::vector<int> features = all_features;
    if (h.feature_subsample_fraction < 1.0) {
      const auto keep = std::max<size_t>(
          1, static_cast<size_t>(std::ceil(h.feature_subsample_fraction * d)));
      std::shuffle(features.begin(), features.end(), rng);
      features.resize(keep);
      std::sort(features.begin(), features.end());
    }
    TreeGrower grower(x, sorted, grad, hess, features, h);
    Tree tree = grower.Grow(std::move(node_of_row));
    if (tree.nodes.size() == 1) continue;  // no split anywhere

    // Covers count every training row, sampled or not.
    for (TreeNode& node : tree.nodes) node.cover = 0.0;
    for (size_t i = 0; i < n; ++i) {
      int id = 0;
      tree.nodes[id].cover += 1.0;
      while (!tree.nodes[id].is_leaf()) {
        const TreeNode& node = tree.nodes[id];
        id = x[i][node.feature] <= node.threshold ? node.left : node.right;
        tree.nodes[id].cover += 1.0;
      }
      margins[i] += tree.nodes[id].value;
    }
    model.ensemble.trees.push_back(std::move(tree));
    model.train_log_loss.push_back(LogLoss(margins, labels));
  }
  return model;
}

GbdtModel Train(const data::Dataset& dataset, std::span<const int> row_ids,
                const Hyperparams& h) {
  Rows x;
  std::vector<int> y;
  const auto& labels = dataset.Labels();
  for (int id : row_ids) {
    x.push_back(dataset.rows.at(id));
    y.push_back(labels.at(id));
  }
  GbdtModel model = Train(x, y, dataset.FeatureNames(), h);
  model.encoding = dataset.encoding;
  return model;
}

GridSearchResult GridSearch(const data::Dataset& dataset,
                            const data::SplitPlan& plan,
                            std::span<const Hyperparams> grid) {
  if (grid.empty()) throw Error(ErrorKind::kConfig, "empty hyperparameter grid");
  if (plan.cv_folds.size() < 2) {
    throw Error(ErrorKind::kConfig, "grid search needs at least two CV folds");
  }
  const auto& labels = dataset.Labels();
  GridSearchResult result;
  result.table.resize(grid.size());

  ParallelFor(grid.size(), [&](size_t c) {
    CvEntry& entry = result.table[c];
    entry.params = grid[c];
    double f1 = 0.0;
    double accuracy = 0.0;
    double auroc = 0.0;
    for (size_t f = 0; f < plan.cv_folds.size(); ++f) {
      const auto& held_out = plan.cv_folds[f];
      std::vector<int> fit_rows;
      for (size_t g = 0; g < plan.cv_folds.size(); ++g) {
        if (g == f) continue;
        fit_rows.insert(fit_rows.end(), plan.cv_folds[g].begin(),
                        plan.cv_folds[g].end());
      }
      std::sort(fit_rows.begin(), fit_rows.end());
      std::vector<int> fold_labels;
      for (int id : held_out) fold_labels.push_back(labels[id]);
      const auto fold_pos =
          std::count(fold_labels.begin(), fold_labels.end(), 1);
      if (fold_pos == 0 || fold_pos == static_cast<long>(fold_labels.size())) {
        entry.flagged = true;
        entry.reason = "fold " + std::to_string(f) + " has a single class";
        return;
      }
      GbdtModel model;
      try {
        model = Train(dataset, fit_rows, grid[c]);
      } catch (const Error& e) {
        entry.flagged = true;
        entry.reason = "fold " + std::to_string(f) + ": " + e.what();
        return;
      }
      std::vector<double> prob;
      for (int id : held_out) prob.push_back(model.PredictProba(dataset.rows[id]));
      const eval::Metrics m = eval::ClassificationMetrics(prob, fold_labels);
      entry.fold_auroc.push_back(m.auroc);
      auroc += m.auroc;
      f1 += m.f1_weighted;
      accuracy += m.accuracy;
      entry.mean.n += m.n;
    }
    const double k = static_cast<double>(plan.cv_folds.size());
    entry.mean.auroc = auroc / k;
    entry.mean.f1_weighted = f1 / k;
    entry.mean.accuracy = accuracy / k;
  });

  bool found = false;
  for (size_t c = 0; c < result.table.size(); ++c) {
    const CvEntry& entry = result.table[c];
    if (entry.flagged) continue;
    if (!found || entry.mean.auroc > result.table[result.best_index].mean.auroc) {
      result.best_index = c;
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorKind::kTraining,
                "every grid configuration was flagged: " +
                    result.table.front().reason);
  }
  result.best = result.table[result.best_index].params;
  return result;
}

std::vector<double> GainImportance(const GbdtModel& model) {
  std::vector<double> importance(model.num_features(), 0.0);
  for (const Tree& tree : model.ensemble.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) importance[node.feature] += node.gain;
    }
  }
  return importance;
}

std::vector<double> SplitCountImportance(const GbdtModel& model) {
  std::vector<double> importance(model.num_features(), 0.0);
  for (const Tree& tree : model.ensemble.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) importance[node.feature] += 1.0;
    }
  }
  return importance;
}

nlohmann::json HyperparamsToJson(const Hyperparams& h) {
  return {
      {"num_trees", h.num_trees},
      {"max_leaves", h.max_leaves},
      {"max_depth", h.max_depth},
      {"min_rows_per_leaf", h.min_rows_per_leaf},
      {"learning_rate", EncodeHexDouble(h.learning_rate)},
      {"feature_subsample_fraction",
       EncodeHexDouble(h.feature_subsample_fraction)},
      {"row_subsample_fraction", EncodeHexDouble(h.row_subsample_fraction)},
      {"seed", h.seed},
  };
}

Hyperparams HyperparamsFromJson(const nlohmann::json& json) {
  Hyperparams h;
  h.num_trees = json.at("num_trees").get<int>();
  h.max_leaves = json.at("max_leaves").get<int>();
  h.max_depth = json.at("max_depth").get<int>();
  h.min_rows_per_leaf = json.at("min_rows_per_leaf").get<int>();
  h.learning_rate = ReadDouble(json.at("learning_rate"));
  h.feature_subsample_fraction =
      ReadDouble(json.at("feature_subsample_fraction"));
  h.row_subsample_fraction = ReadDouble(json.at("row_subsample_fraction"));
  h.seed = json.at("seed").get<uint64_t>();
  return h;
}

nlohmann::json ModelToJson(const GbdtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : model.ensemble.trees) trees.push_back(TreeToJson(tree));
  nlohmann::json loss = nlohmann::json::array();
  for (double v : model.train_log_loss) loss.push_back(EncodeHexDouble(v));
  return {
      {"format", kModelFormat},
      {"feature_names", model.feature_names},
      {"encoding", model.encoding},
      {"base_score", EncodeHexDouble(model.ensemble.base_score)},
      {"learning_rate", EncodeHexDouble(model.learning_rate)},
      {"config", HyperparamsToJson(model.config)},
      {"train_log_loss", std::move(loss)},
      {"trees", std::move(trees)},
  };
}

GbdtModel ModelFromJson(const nlohmann::json& json) {
  GbdtModel model;
  try {
    if (json.at("format").get<std::string>() != kModelFormat) {
      throw Error(ErrorKind::kModelIntegrity,
                  "unsupported model format '" +
                      json.at("format").get<std::string>() + "'");
    }
    model.feature_names =
        json.at("feature_names").get<std::vector<std::string>>();
    model.encoding = json.at("encoding").get<data::EncodingMap>();
    model.ensemble.base_score = ReadDouble(json.at("base_score"));
    model.learning_rate = ReadDouble(json.at("learning_rate"));
    model.config = HyperparamsFromJson(json.at("config"));
    for (const auto& v : json.at("train_log_loss")) {
      model.train_log_loss.push_back(ReadDouble(v));
    }
    for (const auto& t : json.at("trees")) {
      model.ensemble.trees.push_back(TreeFromJson(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("malformed model document: ") + e.what());
  }
  model.ensemble.Validate(static_cast<int>(model.num_features()));
  return model;
}

}  // namespace isar::gbdt
