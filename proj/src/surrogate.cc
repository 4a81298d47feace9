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

#include "isar/surrogate.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "isar/data.h"
#include "isar/error.h"
#include "isar/eval.h"
#include "isar/gbdt.h"
#include "isar/json_util.h"

namespace isar::surrogate {
namespace {

double Gini(int c0, int c1) {
  const double n = c0 + c1;
  if (n == 0) return 0.0;
  const double p0 = c0 / n, p1 = c1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

class CartGrower {
 public:
  CartGrower(const Rows& x, std::span<const int> y, const CartConfig& config,
             CartModel& model)
      : x_(x), y_(y), config_(config), model_(model) {}

  int Grow(std::vector<int> rows, int depth) {
    const int id = static_cast<int>(model_.tree.nodes.size());
    model_.tree.nodes.emplace_back();
    std::array<int, 2> counts{0, 0};
    for (int r : rows) ++counts[y_[r]];
    const int n = static_cast<int>(rows.size());
    const double impurity = Gini(counts[0], counts[1]);
    model_.counts.push_back(counts);
    model_.impurity.push_back(impurity);
    model_.tree.nodes[id].cover = n;
    model_.tree.nodes[id].value = static_cast<double>(counts[1]) / n;
    if (depth >= config_.max_depth || n < 2 * config_.min_leaf ||
        impurity == 0.0) {
      return id;
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_impurity = impurity;
    const int d = static_cast<int>(x_[0].size());
    std::vector<int> order = rows;
    for (int f = 0; f < d; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return x_[a][f] < x_[b][f]; });
      std::array<int, 2> left{0, 0};
      for (int i = 0; i + 1 < n; ++i) {
        ++left[y_[order[i]]];
        const double v = x_[order[i]][f], next = x_[order[i + 1]][f];
        if (v == next) continue;
        const int nl = i + 1, nr = n - nl;
        if (nl < config_.min_leaf || nr < config_.min_leaf) continue;
        const double weighted =
            (nl * Gini(left[0], left[1]) +
             nr * Gini(counts[0] - left[0], counts[1] - left[1])) /
            n;
        if (weighted < best_impurity) {
          best_impurity = weighted;
          best_feature = f;
          best_threshold = v + 0.5 * (next - v);
        }
      }
    }
    // Strict decrease, with slack for rounding in the weighted sum.
    if (best_feature < 0 || best_impurity >= impurity - 1e-12) return id;

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
      (x_[r][best_feature] <= best_threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const int left = Grow(std::move(left_rows), depth + 1);
    const int right = Grow(std::move(right_rows), depth + 1);
    TreeNode& node = model_.tree.nodes[id];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    node.gain = n * (impurity - best_impurity);
    return id;
  }

 private:
  const Rows& x_;
  std::span<const int> y_;
  const CartConfig& config_;
  CartModel& model_;
};

std::string FormatNumber(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double Quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * q;
  const size_t lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - lo) * (v[lo + 1] - v[lo]);
}

double SoftThreshold(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

double Objective(std::span<const double> eta, std::span<const int> y,
                 std::span<const double> coef, double lambda) {
  double loss = 0.0;
  for (size_t i = 0; i < eta.size(); ++i) {
    // log(1 + e^eta) - y * eta, computed stably.
    const double e = eta[i];
    loss += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) -
            y[i] * e;
  }
  double penalty = 0.0;
  for (double c : coef) penalty += std::abs(c);
  return loss / static_cast<double>(eta.size()) + lambda * penalty;
}

Rows Columns(const Rows& x, const std::vector<Rule>& rules,
             const std::vector<LinearTerm>& terms) {
  Rows cols(rules.size() + terms.size(), std::vector<double>(x.size()));
  for (size_t i = 0; i < x.size(); ++i) {
    for (size_t r = 0; r < rules.size(); ++r) {
      cols[r][i] = rules[r].Matches(x[i]) ? 1.0 : 0.0;
    }
    for (size_t t = 0; t < terms.size(); ++t) {
      cols[rules.size() + t][i] = terms[t].Transform(x[i][terms[t].feature]);
    }
  }
  return cols;
}

Rows SelectRows(const Rows& columns, std::span<const int> idx) {
  Rows out(columns.size(), std::vector<double>(idx.size()));
  for (size_t j = 0; j < columns.size(); ++j) {
    for (size_t k = 0; k < idx.size(); ++k) out[j][k] = columns[j][idx[k]];
  }
  return out;
}

double LinearScore(const L1Fit& fit, const Rows& columns, size_t row) {
  double s = fit.intercept;
  for (size_t j = 0; j < columns.size(); ++j) {
    if (fit.coef[j] != 0.0) s += fit.coef[j] * columns[j][row];
  }
  return s;
}

}  // namespace

double CartModel::Score(std::span<const double> x) const {
  return tree.Predict(x);
}

int CartModel::Predict(std::span<const double> x) const {
  return Score(x) >= 0.5 ? 1 : 0;
}

TreeEnsemble CartModel::AsEnsemble() const {
  TreeEnsemble e;
  e.base_score = 0.0;
  e.trees.push_back(tree);
  return e;
}

CartModel FitCart(const Rows& x, std::span<const int> labels,
                  std::vector<std::string> feature_names,
                  const CartConfig& config) {
  if (x.empty() || x.size() != labels.size()) {
    throw Error(ErrorKind::kData, "CART needs matching non-empty rows and labels");
  }
  if (config.max_depth < 0 || config.min_leaf < 1) {
    throw Error(ErrorKind::kConfig, "CART needs max_depth >= 0 and min_leaf >= 1");
  }
  for (const auto& row : x) {
    if (row.size() != feature_names.size()) {
      throw Error(ErrorKind::kData, "row width does not match feature names");
    }
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorKind::kData, "labels must be 0/1");
  }
  CartModel model;
  model.config = config;
  model.feature_names = std::move(feature_names);
  std::vector<int> rows(x.size());
  std::iota(rows.begin(), rows.end(), 0);
  CartGrower(x, labels, config, model).Grow(std::move(rows), 0);
  return model;
}

std::string Condition::ToString() const {
  return name + (greater ? " > " : " <= ") + FormatNumber(threshold);
}

DecisionPath DecisionPathOf(const CartModel& model, std::span<const double> x) {
  if (x.size() != model.feature_names.size()) {
    throw Error(ErrorKind::kValidation, "instance has wrong number of features");
  }
  DecisionPath path;
  int node = 0;
  while (!model.tree.nodes[node].is_leaf()) {
    const TreeNode& n = model.tree.nodes[node];
    PathStep step;
    step.condition = {n.feature, model.feature_names[n.feature], false,
                      n.threshold};
    step.value = x[n.feature];
    step.satisfied = step.condition.Holds(x);
    step.node = node;
    path.steps.push_back(step);
    node = step.satisfied ? n.left : n.right;
  }
  path.leaf = node;
  path.leaf_counts = model.counts[node];
  path.score = model.tree.nodes[node].value;
  path.predicted_class = path.score >= 0.5 ? 1 : 0;
  return path;
}

DecisionPath DecisionPathOf(const CartModel& model,
                            const std::map<std::string, double>& x) {
  std::vector<double> v;
  for (const std::string& name : model.feature_names) {
    const auto it = x.find(name);
    if (it == x.end()) {
      throw Error(ErrorKind::kValidation, "missing feature " + name, name);
    }
    v.push_back(it->second);
  }
  return DecisionPathOf(model, v);
}

bool Rule::Matches(std::span<const double> x) const {
  for (const Condition& c : conditions) {
    if (!c.Holds(x)) return false;
  }
  return true;
}

std::string Rule::ToString() const {
  std::string s;
  for (const Condition& c : conditions) {
    if (!s.empty()) s += " AND ";
    s += c.ToString();
  }
  return s;
}

std::vector<Rule> ExtractRules(const TreeEnsemble& ensemble, const Rows& x,
                               std::span<const std::string> feature_names) {
  std::vector<Rule> rules;
  std::set<std::vector<Condition>> seen;
  struct Frame {
    int node;
    std::vector<Condition> conditions;
  };
  for (const Tree& tree : ensemble.trees) {
    std::vector<Frame> stack = {{0, {}}};
    while (!stack.empty()) {
      Frame frame = std::move(stack.back());
      stack.pop_back();
      const TreeNode& n = tree.nodes[frame.node];
      if (!frame.conditions.empty()) {
        std::vector<Condition> key = frame.conditions;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) {
          Rule rule;
          rule.conditions = std::move(key);
          rules.push_back(std::move(rule));
        }
      }
      if (n.is_leaf()) continue;
      const std::string& name = feature_names[n.feature];
      Frame right{n.right, frame.conditions};
      right.conditions.push_back({n.feature, name, true, n.threshold});
      Frame left{n.left, std::move(frame.conditions)};
      left.conditions.push_back({n.feature, name, false, n.threshold});
      // Left subtree is visited first.
      stack.push_back(std::move(right));
      stack.push_back(std::move(left));
    }
  }
  for (Rule& rule : rules) {
    int hits = 0;
    for (const auto& row : x) hits += rule.Matches(row);
    rule.support = x.empty() ? 0.0 : static_cast<double>(hits) / x.size();
  }
  return rules;
}

double RuleImportance(double coefficient, double support) {
  if (!(support >= 0.0 && support <= 1.0)) {
    throw Error(ErrorKind::kValidation, "support must lie in [0, 1]");
  }
  return std::abs(coefficient) * std::sqrt(support * (1.0 - support));
}

double LinearTerm::Transform(double v) const {
  return (std::clamp(v, lower, upper) - mean) / sd;
}

double RuleFitModel::Margin(std::span<const double> x) const {
  double m = intercept;
  for (const Rule& r : rules) {
    if (r.coefficient != 0.0 && r.Matches(x)) m += r.coefficient;
  }
  for (const LinearTerm& t : linear_terms) {
    m += t.coefficient * t.Transform(x[t.feature]);
  }
  return m;
}

double RuleFitModel::PredictProba(std::span<const double> x) const {
  return gbdt::Sigmoid(Margin(x));
}

int RuleFitModel::NumNonzero() const {
  int count = 0;
  for (const Rule& r : rules) count += r.coefficient != 0.0;
  for (const LinearTerm& t : linear_terms) count += t.coefficient != 0.0;
  return count;
}

double MaxLambda(const Rows& columns, std::span<const int> labels) {
  const double n = static_cast<double>(labels.size());
  double ybar = 0.0;
  for (int y : labels) ybar += y;
  ybar /= n;
  double out = 0.0;
  for (const auto& col : columns) {
    double g = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) g += col[i] * (labels[i] - ybar);
    out = std::max(out, std::abs(g) / n);
  }
  return out;
}

L1Fit FitL1Logistic(const Rows& columns, std::span<const int> labels,
                    double lambda, const L1Fit* warm, int max_sweeps,
                    double tolerance) {
  const size_t n = labels.size();
  const size_t p = columns.size();
  if (n == 0) throw Error(ErrorKind::kData, "no rows to fit");
  for (const auto& col : columns) {
    if (col.size() != n) throw Error(ErrorKind::kData, "ragged design");
  }
  double ybar = 0.0;
  for (int y : labels) ybar += y;
  ybar /= static_cast<double>(n);
  if (ybar == 0.0 || ybar == 1.0) {
    throw Error(ErrorKind::kTraining, "L1 logistic fit needs both classes");
  }

  L1Fit fit;
  if (warm != nullptr) {
    fit.intercept = warm->intercept;
    fit.coef = warm->coef;
  } else {
    fit.intercept = std::log(ybar / (1.0 - ybar));
    fit.coef.assign(p, 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  auto margins = [&](double b0, const std::vector<double>& coef,
                     std::vector<double>& eta) {
    std::fill(eta.begin(), eta.end(), b0);
    for (size_t j = 0; j < p; ++j) {
      if (coef[j] == 0.0) continue;
      const auto& col = columns[j];
      for (size_t i = 0; i < n; ++i) eta[i] += coef[j] * col[i];
    }
  };
  std::vector<double> eta(n), trial_eta(n), w(n), r(n), curvature(p);
  margins(fit.intercept, fit.coef, eta);
  double previous = Objective(eta, labels, fit.coef, lambda);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    // Weighted least-squares model of the log-loss around the current fit;
    // r is the working residual.
    double wsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double prob = gbdt::Sigmoid(eta[i]);
      w[i] = std::max(prob * (1.0 - prob), 1e-5);
      r[i] = (labels[i] - prob) / w[i];
      wsum += w[i];
    }
    for (size_t j = 0; j < p; ++j) {
      double s = 0.0;
      const auto& col = columns[j];
      for (size_t i = 0; i < n; ++i) s += w[i] * col[i] * col[i];
      curvature[j] = inv_n * s;
    }
    double b0 = fit.intercept;
    std::vector<double> coef = fit.coef;
    for (int pass = 0; pass < 100; ++pass) {
      double delta0 = 0.0;
      for (size_t i = 0; i < n; ++i) delta0 += w[i] * r[i];
      delta0 /= wsum;
      b0 += delta0;
      for (double& v : r) v -= delta0;
      double change = std::abs(delta0);
      // A full pass first, then passes over the active set only.
      for (size_t j = 0; j < p; ++j) {
        if ((pass > 0 && coef[j] == 0.0) || curvature[j] == 0.0) continue;
        const auto& col = columns[j];
        double c = 0.0;
        for (size_t i = 0; i < n; ++i) c += w[i] * col[i] * r[i];
        c = inv_n * c + curvature[j] * coef[j];
        const double next = SoftThreshold(c, lambda) / curvature[j];
        const double delta = next - coef[j];
        if (delta == 0.0) continue;
        for (size_t i = 0; i < n; ++i) r[i] -= delta * col[i];
        coef[j] = next;
        change = std::max(change, std::abs(delta) * std::sqrt(curvature[j]));
      }
      if (change < 1e-10) break;
    }

    // Step halving keeps the objective monotone.
    double t = 1.0;
    double current = previous;
    std::vector<double> trial_coef(p);
    double trial_b0 = fit.intercept;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, t *= 0.5) {
      trial_b0 = fit.intercept + t * (b0 - fit.intercept);
      for (size_t j = 0; j < p; ++j) {
        trial_coef[j] = fit.coef[j] + t * (coef[j] - fit.coef[j]);
      }
      margins(trial_b0, trial_coef, trial_eta);
      current = Objective(trial_eta, labels, trial_coef, lambda);
      if (current <= previous) {
        accepted = true;
        break;
      }
    }
    double max_step = 0.0;
    if (accepted) {
      max_step = std::abs(trial_b0 - fit.intercept);
      for (size_t j = 0; j < p; ++j) {
        max_step = std::max(max_step, std::abs(trial_coef[j] - fit.coef[j]));
      }
      fit.intercept = trial_b0;
      fit.coef = trial_coef;
      eta.swap(trial_eta);
    } else {
      current = previous;
    }
    fit.objective.push_back(current);
    fit.sweeps = sweep + 1;
    if (!accepted ||
        (previous - current <= tolerance * std::max(1.0, std::abs(current)) &&
         max_step < 1e-6)) {
      return fit;
    }
    previous = current;
  }
  throw Error(ErrorKind::kTraining,
              "L1 logistic fit did not converge after " +
                  std::to_string(max_sweeps) + " sweeps (lambda " +
                  FormatNumber(lambda) + ", objective " +
                  FormatNumber(previous) + ")");
}

RuleFitModel FitRuleFit(const Rows& x, std::span<const int> labels,
                        std::vector<std::string> feature_names,
                        const RuleFitConfig& config) {
  if (x.empty() || x.size() != labels.size()) {
    throw Error(ErrorKind::kData, "RuleFit needs matching non-empty rows and labels");
  }
  if (config.path_length < 1 || config.cv_folds < 2 || config.rule_depth < 1 ||
      config.n_trees < 1 || !(config.path_min_ratio > 0.0) ||
      !(config.path_min_ratio < 1.0)) {
    throw Error(ErrorKind::kConfig, "invalid RuleFit configuration");
  }
  const size_t d = feature_names.size();
  RuleFitModel model;
  model.feature_names = feature_names;

  gbdt::Hyperparams h;
  h.num_trees = config.n_trees;
  h.max_depth = config.rule_depth;
  h.max_leaves = 1 << config.rule_depth;
  h.min_rows_per_leaf = 2;
  h.learning_rate = config.learning_rate;
  h.row_subsample_fraction = config.row_subsample;
  h.seed = config.seed;
  const gbdt::GbdtModel ensemble = gbdt::Train(x, labels, feature_names, h);
  model.rules = ExtractRules(ensemble.ensemble, x, feature_names);

  for (size_t f = 0; f < d; ++f) {
    LinearTerm t;
    t.feature = static_cast<int>(f);
    t.name = feature_names[f];
    std::vector<double> col(x.size());
    for (size_t i = 0; i < x.size(); ++i) col[i] = x[i][f];
    t.lower = Quantile(col, config.winsor_fraction);
    t.upper = Quantile(col, 1.0 - config.winsor_fraction);
    double mean = 0.0;
    for (double& v : col) {
      v = std::clamp(v, t.lower, t.upper);
      mean += v;
    }
    mean /= static_cast<double>(col.size());
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(col.size()));
    t.mean = mean;
    t.sd = sd > 0.0 ? sd : 1.0;
    model.linear_terms.push_back(t);
  }

  const Rows columns = Columns(x, model.rules, model.linear_terms);
  const double lambda_max = MaxLambda(columns, labels);
  if (lambda_max > 0.0) {
    const double step =
        config.path_length > 1
            ? std::log(config.path_min_ratio) / (config.path_length - 1)
            : 0.0;
    for (int k = 0; k < config.path_length; ++k) {
      model.lambda_path.push_back(lambda_max * std::exp(step * k));
    }
  } else {
    model.lambda_path.push_back(0.0);
  }

  // Penalty selection by cross-validated AUROC.
  data::SplitPlan plan;
  plan.train_idx.resize(x.size());
  std::iota(plan.train_idx.begin(), plan.train_idx.end(), 0);
  plan = data::MakeCvFolds(std::move(plan), labels, config.cv_folds, config.seed);
  const size_t path_len = model.lambda_path.size();
  model.cv_auroc.assign(path_len, 0.0);
  for (const auto& held_out : plan.cv_folds) {
    std::vector<bool> in_fold(x.size(), false);
    for (int i : held_out) in_fold[i] = true;
    std::vector<int> train_idx;
    for (size_t i = 0; i < x.size(); ++i) {
      if (!in_fold[i]) train_idx.push_back(static_cast<int>(i));
    }
    const Rows train_cols = SelectRows(columns, train_idx);
    std::vector<int> train_y, test_y;
    for (int i : train_idx) train_y.push_back(labels[i]);
    for (int i : held_out) test_y.push_back(labels[i]);
    L1Fit fit;
    for (size_t k = 0; k < path_len; ++k) {
      fit = FitL1Logistic(train_cols, train_y, model.lambda_path[k],
                          k == 0 ? nullptr : &fit, config.max_sweeps,
                          config.tolerance);
      std::vector<double> scores;
      for (int i : held_out) scores.push_back(LinearScore(fit, columns, i));
      model.cv_auroc[k] += eval::Auroc(scores, test_y) / plan.cv_folds.size();
    }
  }
  size_t best = 0;
  for (size_t k = 1; k < path_len; ++k) {
    if (model.cv_auroc[k] > model.cv_auroc[best]) best = k;
  }

  L1Fit fit;
  for (size_t k = 0; k <= best; ++k) {
    fit = FitL1Logistic(columns, labels, model.lambda_path[k],
                        k == 0 ? nullptr : &fit, config.max_sweeps,
                        config.tolerance);
  }
  model.l1_strength = model.lambda_path[best];
  model.intercept = fit.intercept;
  for (size_t r = 0; r < model.rules.size(); ++r) {
    Rule& rule = model.rules[r];
    rule.coefficient = fit.coef[r];
    rule.importance = RuleImportance(rule.coefficient, rule.support);
  }
  for (size_t t = 0; t < model.linear_terms.size(); ++t) {
    LinearTerm& term = model.linear_terms[t];
    term.coefficient = fit.coef[model.rules.size() + t];
    const auto& col = columns[model.rules.size() + t];
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    term.importance = std::abs(term.coefficient) * std::sqrt(ss / col.size());
  }
  return model;
}

std::vector<int> RuleFeatureCounts(const RuleFitModel& model,
                                   bool nonzero_only) {
  std::vector<int> counts(model.feature_names.size(), 0);
  for (const Rule& rule : model.rules) {
    if (nonzero_only && rule.coefficient == 0.0) continue;
    std::set<int> features;
    for (const Condition& c : rule.conditions) features.insert(c.feature);
    for (int f : features) ++counts[f];
  }
  return counts;
}

SurrogatePosthoc ExplainCart(const CartModel& model, const Rows& rows,
                             const std::vector<std::vector<double>>& grids) {
  const int d = static_cast<int>(model.feature_names.size());
  if (static_cast<int>(grids.size()) != d) {
    throw Error(ErrorKind::kConfig, "need one grid per surrogate feature");
  }
  const TreeEnsemble ensemble = model.AsEnsemble();
  const posthoc::Predictor predict = posthoc::MarginOf(ensemble);
  SurrogatePosthoc out;
  for (int f = 0; f < d; ++f) {
    out.pdp.push_back(posthoc::ComputePdpIce(predict, rows, f, grids[f]));
  }
  for (const auto& row : rows) {
    out.shap.push_back(shap::TreeShap(ensemble, row, d));
    out.interactions.push_back(shap::ShapInteractions(ensemble, row, d));
  }
  return out;
}

namespace {

nlohmann::json ConditionToJson(const Condition& c) {
  return {{"feature", c.feature},
          {"name", c.name},
          {"op", c.greater ? ">" : "<="},
          {"threshold", EncodeHexDouble(c.threshold)}};
}

Condition ConditionFromJson(const nlohmann::json& j) {
  Condition c;
  c.feature = j.at("feature").get<int>();
  c.name = j.at("name").get<std::string>();
  const std::string op = j.at("op").get<std::string>();
  if (op != ">" && op != "<=") {
    throw Error(ErrorKind::kModelIntegrity, "unknown rule operator " + op);
  }
  c.greater = op == ">";
  c.threshold = ReadDouble(j.at("threshold"));
  return c;
}

void CheckFormat(const nlohmann::json& json, const char* format) {
  if (!json.is_object() || json.value("format", "") != format) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("expected a ") + format + " document");
  }
}

}  // namespace

nlohmann::json CartToJson(const CartModel& model) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& c : model.counts) counts.push_back({c[0], c[1]});
  nlohmann::json impurity = nlohmann::json::array();
  for (double v : model.impurity) impurity.push_back(EncodeHexDouble(v));
  return {{"format", kCartFormat},
          {"feature_names", model.feature_names},
          {"max_depth", model.config.max_depth},
          {"min_leaf", model.config.min_leaf},
          {"tree", TreeToJson(model.tree)},
          {"counts", std::move(counts)},
          {"impurity", std::move(impurity)}};
}

CartModel CartFromJson(const nlohmann::json& json) {
  CheckFormat(json, kCartFormat);
  CartModel m;
  try {
    m.feature_names = json.at("feature_names").get<std::vector<std::string>>();
    m.config.max_depth = json.at("max_depth").get<int>();
    m.config.min_leaf = json.at("min_leaf").get<int>();
    m.tree = TreeFromJson(json.at("tree"));
    for (const auto& c : json.at("counts")) {
      m.counts.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    }
    for (const auto& v : json.at("impurity")) m.impurity.push_back(ReadDouble(v));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("malformed CART document: ") + e.what());
  }
  m.tree.Validate(static_cast<int>(m.feature_names.size()));
  if (m.counts.size() != m.tree.nodes.size() ||
      m.impurity.size() != m.tree.nodes.size()) {
    throw Error(ErrorKind::kModelIntegrity, "CART node annotations do not match");
  }
  return m;
}

nlohmann::json RuleFitToJson(const RuleFitModel& model) {
  nlohmann::json rules = nlohmann::json::array();
  for (const Rule& r : model.rules) {
    nlohmann::json conds = nlohmann::json::array();
    for (const Condition& c : r.conditions) conds.push_back(ConditionToJson(c));
    rules.push_back({{"conditions", std::move(conds)},
                     {"support", EncodeHexDouble(r.support)},
                     {"coefficient", EncodeHexDouble(r.coefficient)}});
  }
  nlohmann::json terms = nlohmann::json::array();
  for (const LinearTerm& t : model.linear_terms) {
    terms.push_back({{"feature", t.feature},
                     {"name", t.name},
                     {"lower", EncodeHexDouble(t.lower)},
                     {"upper", EncodeHexDouble(t.upper)},
                     {"mean", EncodeHexDouble(t.mean)},
                     {"sd", EncodeHexDouble(t.sd)},
                     {"coefficient", EncodeHexDouble(t.coefficient)},
                     {"importance", EncodeHexDouble(t.importance)}});
  }
  nlohmann::json path = nlohmann::json::array();
  for (double v : model.lambda_path) path.push_back(EncodeHexDouble(v));
  nlohmann::json cv = nlohmann::json::array();
  for (double v : model.cv_auroc) cv.push_back(EncodeHexDouble(v));
  return {{"format", kRuleFitFormat},
          {"feature_names", model.feature_names},
          {"intercept", EncodeHexDouble(model.intercept)},
          {"l1_strength", EncodeHexDouble(model.l1_strength)},
          {"rules", std::move(rules)},
          {"linear_terms", std::move(terms)},
          {"lambda_path", std::move(path)},
          {"cv_auroc", std::move(cv)}};
}

RuleFitModel RuleFitFromJson(const nlohmann::json& json) {
  CheckFormat(json, kRuleFitFormat);
  RuleFitModel m;
  try {
    m.feature_names = json.at("feature_names").get<std::vector<std::string>>();
    m.intercept = ReadDouble(json.at("intercept"));
    m.l1_strength = ReadDouble(json.at("l1_strength"));
    const int d = static_cast<int>(m.feature_names.size());
    for (const auto& j : json.at("rules")) {
      Rule r;
      for (const auto& c : j.at("conditions")) {
        r.conditions.push_back(ConditionFromJson(c));
        if (r.conditions.back().feature < 0 || r.conditions.back().feature >= d) {
          throw Error(ErrorKind::kModelIntegrity, "rule feature out of range");
        }
      }
      r.support = ReadDouble(j.at("support"));
      r.coefficient = ReadDouble(j.at("coefficient"));
      r.importance = RuleImportance(r.coefficient, r.support);
      m.rules.push_back(std::move(r));
    }
    for (const auto& j : json.at("linear_terms")) {
      LinearTerm t;
      t.feature = j.at("feature").get<int>();
      if (t.feature < 0 || t.feature >= d) {
        throw Error(ErrorKind::kModelIntegrity, "linear term feature out of range");
      }
      t.name = j.at("name").get<std::string>();
      t.lower = ReadDouble(j.at("lower"));
      t.upper = ReadDouble(j.at("upper"));
      t.mean = ReadDouble(j.at("mean"));
      t.sd = ReadDouble(j.at("sd"));
      t.coefficient = ReadDouble(j.at("coefficient"));
      t.importance = ReadDouble(j.at("importance"));
      m.linear_terms.push_back(t);
    }
    for (const auto& v : json.at("lambda_path")) m.lambda_path.push_back(ReadDouble(v));
    for (const auto& v : json.at("cv_auroc")) m.cv_auroc.push_back(ReadDouble(v));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("malformed RuleFit document: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kModelIntegrity) throw;
    throw Error(ErrorKind::kModelIntegrity, e.what());
  }
  return m;
}

}  // namespace isar::surrogate
