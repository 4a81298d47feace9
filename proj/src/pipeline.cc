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

#include "isar/pipeline.h"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>

#include "isar/curvefit.h"
#include "isar/error.h"
#include "isar/json_util.h"
#include "isar/local_report.h"
#include "isar/parallel.h"
#include "isar/shap.h"

namespace isar::pipeline {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using Rows = std::vector<std::vector<double>>;

template <typename Fn>
auto Stage(const char* name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("[") + name + "] " + e.what(), e.field());
  }
}

void Require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kConfig, key + " " + what, key);
}

std::string UtcNow() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson MetricsJson(const eval::Metrics& m) {
  ojson j;
  j["auroc"] = m.auroc;
  j["f1_weighted"] = m.f1_weighted;
  j["accuracy"] = m.accuracy;
  j["n"] = m.n;
  return j;
}

ojson ParamsJson(const gbdt::Hyperparams& h) {
  ojson j;
  j["num_trees"] = h.num_trees;
  j["max_leaves"] = h.max_leaves;
  j["max_depth"] = h.max_depth;
  j["min_rows_per_leaf"] = h.min_rows_per_leaf;
  j["learning_rate"] = h.learning_rate;
  j["feature_subsample_fraction"] = h.feature_subsample_fraction;
  j["row_subsample_fraction"] = h.row_subsample_fraction;
  j["seed"] = h.seed;
  return j;
}

ojson TableJson(const ImportanceTable& t) {
  ojson j;
  j["method"] = ImportanceMethodName(t.method);
  j["scores"] = t.scores;
  j["ranks"] = t.ranks;
  return j;
}

ojson TreeJson(const Tree& tree) {
  ojson nodes = ojson::array();
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& n = tree.nodes[i];
    ojson j;
    j["id"] = i;
    j["feature"] = n.is_leaf() ? ojson(nullptr) : ojson(n.feature);
    j["threshold"] = n.is_leaf() ? ojson(nullptr) : ojson(n.threshold);
    j["left"] = n.is_leaf() ? ojson(nullptr) : ojson(n.left);
    j["right"] = n.is_leaf() ? ojson(nullptr) : ojson(n.right);
    j["value"] = n.value;
    j["cover"] = n.cover;
    nodes.push_back(std::move(j));
  }
  return nodes;
}

ojson FailedEntry(const std::string& reason, const std::string& message) {
  ojson j;
  j["status"] = "failed";
  j["reason"] = reason;
  j["message"] = message;
  return j;
}

// All five trend fits; a fit that cannot be computed becomes a status entry.
ojson TrendFits(const std::vector<curvefit::Point>& points, int degree) {
  static constexpr curvefit::FitKind kKinds[] = {
      curvefit::FitKind::kLinear, curvefit::FitKind::kPiecewiseLinear,
      curvefit::FitKind::kLogistic4, curvefit::FitKind::kPlateau,
      curvefit::FitKind::kPolynomial};
  ojson fits = ojson::array();
  curvefit::FitOptions options;
  options.degree = degree;
  for (curvefit::FitKind kind : kKinds) {
    ojson entry;
    entry["kind"] = curvefit::FitKindName(kind);
    try {
      const curvefit::FitResult fit = curvefit::FitTrend(points, kind, options);
      entry["status"] = "ok";
      entry["params"] = fit.params;
      entry["r2"] = fit.r2;
      entry["residual_sse"] = fit.residual_sse;
    } catch (const Error& e) {
      entry.update(FailedEntry(ErrorKindName(e.kind()), e.what()));
    }
    fits.push_back(std::move(entry));
  }
  return fits;
}

ojson PointsJson(const std::vector<curvefit::Point>& points) {
  ojson out = ojson::array();
  for (const auto& [x, y] : points) out.push_back({x, y});
  return out;
}

ojson PdpJson(const posthoc::PdpIce& p, const std::string& name) {
  ojson j;
  j["feature"] = name;
  j["grid"] = p.pdp.grid;
  j["pdp"] = p.pdp.pdp;
  j["ice"] = p.ice.ice;
  j["warnings"] = p.warnings;
  return j;
}

ojson InstanceJson(const data::Dataset& d, int row) {
  ojson j;
  for (size_t f = 0; f < d.num_features(); ++f) {
    if (d.schema[f].is_categorical()) {
      j[d.schema[f].name] = d.labels[row][f];
    } else {
      j[d.schema[f].name] = d.rows[row][f];
    }
  }
  return j;
}

ojson PathJson(const surrogate::DecisionPath& path) {
  ojson steps = ojson::array();
  for (const auto& s : path.steps) {
    ojson j;
    j["node"] = s.node;
    j["feature"] = s.condition.name;
    j["op"] = "<=";
    j["threshold"] = s.condition.threshold;
    j["value"] = s.value;
    j["satisfied"] = s.satisfied;
    steps.push_back(std::move(j));
  }
  ojson j;
  j["steps"] = std::move(steps);
  j["leaf"] = path.leaf;
  j["leaf_counts"] = {path.leaf_counts[0], path.leaf_counts[1]};
  j["class"] = path.predicted_class;
  j["score"] = path.score;
  return j;
}

Rows Project(const data::Dataset& d, std::span<const int> ids,
             std::span<const int> columns) {
  Rows out;
  for (int r : ids) {
    std::vector<double> row;
    for (int c : columns) row.push_back(d.rows[r][c]);
    out.push_back(std::move(row));
  }
  return out;
}

ojson MeanAbsMatrix(const std::vector<shap::InteractionMatrix>& all, int d) {
  std::vector<std::vector<double>> mean(d, std::vector<double>(d, 0.0));
  for (const auto& m : all) {
    for (int a = 0; a < d; ++a) {
      for (int b = 0; b < d; ++b) mean[a][b] += std::abs(m.phi[a][b]);
    }
  }
  for (auto& row : mean) {
    for (double& v : row) v /= static_cast<double>(all.size());
  }
  return mean;
}

}  // namespace

void RunConfig::Validate() const {
  if (dataset_path.empty()) Require(synth.n >= 8, "synth_n", "must be >= 8");
  Require(std::isfinite(synth.noise_sd) && synth.noise_sd >= 0.0,
          "synth_noise_sd", "must be >= 0");
  Require(correlation_threshold > 0.0 && correlation_threshold <= 1.0,
          "correlation_threshold", "must be in (0, 1]");
  for (const auto& h : grid) {
    try {
      h.Validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, std::string("grid: ") + e.what(), "grid");
    }
  }
  Require(!protocol.seeds.empty(), "seeds", "must not be empty");
  Require(protocol.test_fraction > 0.0 && protocol.test_fraction < 1.0,
          "test_fraction", "must be in (0, 1)");
  Require(protocol.cv_folds >= 2, "cv_folds", "must be >= 2");
  Require(protocol.permutation_repeats >= 1, "permutation_repeats",
          "must be >= 1");
  Require(top_k >= 1, "top_k", "must be >= 1");
  Require(cart.max_depth >= 1, "cart_max_depth", "must be >= 1");
  Require(cart.min_leaf >= 1, "cart_min_leaf", "must be >= 1");
  Require(rulefit.n_trees >= 1, "rulefit_n_trees", "must be >= 1");
  Require(rulefit.rule_depth >= 1 && rulefit.rule_depth <= 8,
          "rulefit_rule_depth", "must be in [1, 8]");
  Require(rulefit.path_length >= 2, "rulefit_path_length", "must be >= 2");
  Require(rulefit.path_min_ratio > 0.0 && rulefit.path_min_ratio < 1.0,
          "rulefit_path_min_ratio", "must be in (0, 1)");
  Require(rulefit.cv_folds >= 2, "rulefit_cv_folds", "must be >= 2");
  Require(lime.n_samples >= 10, "lime_samples", "must be >= 10");
  Require(lime.top_k >= 1, "lime_top_k", "must be >= 1");
  Require(std::isfinite(lime.kernel_width), "lime_kernel_width",
          "must be finite");
  Require(pdp_grid_points >= 2, "pdp_grid_points", "must be >= 2");
  Require(polynomial_degree >= 1 && polynomial_degree <= 8, "polynomial_degree",
          "must be in [1, 8]");
  Require(explain_row >= -1, "explain_row", "must be >= -1");
  Require(!output_dir.empty(), "output_dir", "must not be empty");
}

ojson ConfigToJson(const RunConfig& c) {
  ojson j;
  j["dataset_path"] = c.dataset_path.empty() ? ojson(nullptr) : ojson(c.dataset_path);
  j["synth"] = {{"seed", c.synth.seed}, {"n", c.synth.n},
                {"noise_sd", c.synth.noise_sd}};
  j["correlation_threshold"] = c.correlation_threshold;
  ojson grid = ojson::array();
  for (const auto& h : c.grid.empty() ? gbdt::DefaultGrid() : c.grid) {
    grid.push_back(ParamsJson(h));
  }
  j["grid"] = std::move(grid);
  j["seeds"] = c.protocol.seeds;
  j["test_fraction"] = c.protocol.test_fraction;
  j["cv_folds"] = c.protocol.cv_folds;
  j["permutation_repeats"] = c.protocol.permutation_repeats;
  j["top_k"] = c.top_k;
  j["cart"] = {{"max_depth", c.cart.max_depth}, {"min_leaf", c.cart.min_leaf}};
  ojson rf;
  rf["n_trees"] = c.rulefit.n_trees;
  rf["rule_depth"] = c.rulefit.rule_depth;
  rf["path_length"] = c.rulefit.path_length;
  rf["path_min_ratio"] = c.rulefit.path_min_ratio;
  rf["cv_folds"] = c.rulefit.cv_folds;
  rf["seed"] = c.rulefit.seed;
  rf["winsor_fraction"] = c.rulefit.winsor_fraction;
  rf["row_subsample"] = c.rulefit.row_subsample;
  rf["learning_rate"] = c.rulefit.learning_rate;
  j["rulefit"] = std::move(rf);
  j["lime"] = {{"n_samples", c.lime.n_samples},
               {"kernel_width", c.lime.kernel_width},
               {"top_k", c.lime.top_k},
               {"seed", c.lime.seed}};
  j["pdp_grid_points"] = c.pdp_grid_points;
  j["polynomial_degree"] = c.polynomial_degree;
  j["explain_row"] = c.explain_row;
  return j;
}

PipelineResult RunPipeline(const RunConfig& config) {
  Stage("config", [&] {
    config.Validate();
    return 0;
  });
  ojson report;
  report["format"] = kReportFormat;
  report["tool_version"] = kToolVersion;
  report["generated_at"] = UtcNow();
  report["config"] = ConfigToJson(config);

  // Load or synthesize, binarize, prune, encode.
  data::Dataset raw = Stage("load", [&] {
    if (!config.dataset_path.empty()) {
      return data::LoadDataset(config.dataset_path, data::NanoprimingSchema());
    }
    data::SynthRecipe recipe;
    recipe.noise_sd = config.synth.noise_sd;
    return data::SynthGenerate(config.synth.seed, config.synth.n, recipe);
  });
  const double median = Stage("binarize", [&] { return data::Median(raw.target_raw); });
  raw = Stage("binarize", [&] { return data::WithBinarizedLabel(std::move(raw)); });
  const data::PruneResult pruned = Stage("prune", [&] {
    return data::PruneCorrelated(raw, config.correlation_threshold);
  });
  const data::Dataset dataset =
      Stage("encode", [&] { return data::EncodeCategoricals(pruned.dataset); });
  const std::vector<std::string> names = dataset.FeatureNames();
  const int d = static_cast<int>(names.size());
  if (config.top_k > d) {
    throw Error(ErrorKind::kConfig,
                "[config] top_k exceeds the " + std::to_string(d) +
                    " modeling features",
                "top_k");
  }
  {
    ojson block;
    block["source"] = config.dataset_path.empty() ? "synthetic" : config.dataset_path;
    block["n_rows"] = dataset.num_rows();
    int positives = 0;
    for (int y : dataset.Labels()) positives += y;
    block["n_positive"] = positives;
    block["target"] = data::kTargetColumn;
    block["median_threshold"] = median;
    block["all_features"] = raw.FeatureNames();
    block["removed_features"] = pruned.removed;
    block["prune_warnings"] = pruned.warnings;
    block["modeling_features"] = names;
    block["encoding"] = dataset.encoding;
    report["dataset"] = std::move(block);
  }

  // Ten splits with grid search and the three importances.
  const std::vector<gbdt::Hyperparams> grid =
      config.grid.empty() ? gbdt::DefaultGrid() : config.grid;
  const gbdt::ProtocolResult protocol = Stage("train", [&] {
    return gbdt::RunTenSplits(dataset, grid, config.protocol);
  });
  {
    ojson splits = ojson::array();
    for (const auto& s : protocol.splits) {
      ojson j;
      j["seed"] = s.seed;
      j["n_train"] = s.plan.train_idx.size();
      j["n_test"] = s.plan.test_idx.size();
      ojson folds = ojson::array();
      for (const auto& f : s.plan.cv_folds) folds.push_back(f.size());
      j["cv_fold_sizes"] = std::move(folds);
      j["best_index"] = s.search.best_index;
      j["best_params"] = ParamsJson(s.search.best);
      j["train"] = MetricsJson(s.train);
      j["cv"] = MetricsJson(s.cv);
      j["test"] = MetricsJson(s.test);
      ojson imp;
      imp["gain"] = TableJson(s.gain);
      imp["permutation"] = TableJson(s.permutation);
      imp["permutation"]["sd"] = s.permutation_sd;
      imp["shap"] = TableJson(s.shap);
      imp["split_count"] = s.split_count;
      j["importances"] = std::move(imp);
      ojson table = ojson::array();
      for (size_t i = 0; i < s.search.table.size(); ++i) {
        const gbdt::CvEntry& e = s.search.table[i];
        ojson row;
        row["index"] = i;
        row["cv_auroc"] = e.flagged ? ojson(nullptr) : ojson(e.mean.auroc);
        row["flagged"] = e.flagged;
        row["reason"] = e.flagged ? ojson(e.reason) : ojson(nullptr);
        table.push_back(std::move(row));
      }
      j["grid_table"] = std::move(table);
      splits.push_back(std::move(j));
    }
    report["splits"] = std::move(splits);
    report["aggregate"] = {{"train", MetricsJson(protocol.mean_train)},
                           {"cv", MetricsJson(protocol.mean_cv)},
                           {"test", MetricsJson(protocol.mean_test)}};
  }

  // Rank aggregation and reference split.
  std::vector<ImportanceTable> tables;
  std::vector<posthoc::SplitRanking> rankings;
  for (const auto& s : protocol.splits) {
    tables.insert(tables.end(), {s.gain, s.permutation, s.shap});
    rankings.push_back({s.seed, {s.gain, s.permutation, s.shap}, s.test.auroc});
  }
  const posthoc::RankSummary ranks =
      Stage("rank", [&] { return posthoc::AggregateRanks(tables); });
  const posthoc::ReferenceSelection reference =
      Stage("rank", [&] { return posthoc::SelectReferenceModel(rankings, ranks); });
  size_t ref_pos = 0;
  while (protocol.splits[ref_pos].seed != reference.seed) ++ref_pos;
  const gbdt::SplitResult& ref = protocol.splits[ref_pos];
  std::vector<int> top;
  std::vector<std::string> top_names;
  for (int k = 0; k < config.top_k; ++k) {
    top.push_back(ranks.order[k]);
    top_names.push_back(names[ranks.order[k]]);
  }
  {
    ojson j;
    j["features"] = ranks.features;
    j["average_rank"] = ranks.average_rank;
    std::vector<std::string> order;
    for (int f : ranks.order) order.push_back(names[f]);
    j["order"] = order;
    j["top_k"] = top_names;
    ojson per_split = ojson::array();
    for (const auto& s : protocol.splits) {
      const posthoc::RankSummary mine =
          posthoc::AggregateRanks(std::vector<ImportanceTable>{s.gain, s.permutation, s.shap});
      std::vector<std::string> top_split;
      for (int k = 0; k < config.top_k; ++k) top_split.push_back(names[mine.order[k]]);
      per_split.push_back({{"seed", s.seed}, {"top_k", top_split}});
    }
    j["per_split_top_k"] = std::move(per_split);
    report["ranks"] = std::move(j);
    report["reference"] = {{"seed", reference.seed},
                           {"spearman", reference.spearman}};
  }

  // Post hoc on the reference model, over its training rows.
  const Rows train_rows = Project(dataset, ref.plan.train_idx, [&] {
    std::vector<int> all(d);
    for (int j = 0; j < d; ++j) all[j] = j;
    return all;
  }());
  std::vector<int> train_labels;
  for (int r : ref.plan.train_idx) train_labels.push_back(dataset.Labels()[r]);
  const posthoc::Predictor complex_prob = posthoc::ProbabilityOf(ref.model);
  report["complex_posthoc"] = Stage("posthoc", [&] {
    ojson j;
    j["split_seed"] = ref.seed;
    j["rows"] = ref.plan.train_idx;
    std::vector<std::vector<double>> grids(d);
    std::vector<posthoc::PdpIce> curves(d);
    ParallelFor(d, [&](size_t f) {
      grids[f] = posthoc::DefaultGrid(dataset, f, ref.plan.train_idx,
                                      config.pdp_grid_points);
      curves[f] = posthoc::ComputePdpIce(complex_prob, train_rows, f, grids[f],
                                         &dataset.schema[f]);
    });
    ojson pdp = ojson::array();
    for (int f = 0; f < d; ++f) pdp.push_back(PdpJson(curves[f], names[f]));
    j["pdp_ice"] = std::move(pdp);
    ojson pdp2 = ojson::array();
    for (size_t a = 0; a < top.size(); ++a) {
      for (size_t b = a + 1; b < top.size(); ++b) {
        const posthoc::Pdp2d p = posthoc::ComputePdp2d(
            complex_prob, train_rows, top[a], top[b], grids[top[a]], grids[top[b]]);
        ojson e;
        e["feature1"] = names[top[a]];
        e["feature2"] = names[top[b]];
        e["grid1"] = p.grid1;
        e["grid2"] = p.grid2;
        e["values"] = p.values;
        pdp2.push_back(std::move(e));
      }
    }
    j["pdp_2d"] = std::move(pdp2);

    const TreeEnsemble& ens = ref.model.ensemble;
    std::vector<shap::ShapExplanation> phis(train_rows.size());
    std::vector<shap::InteractionMatrix> inter(train_rows.size());
    ParallelFor(train_rows.size(), [&](size_t i) {
      phis[i] = shap::TreeShap(ens, train_rows[i], d);
      inter[i] = shap::ShapInteractions(ens, train_rows[i], d);
    });
    ojson sj;
    sj["base_value"] = phis.empty() ? 0.0 : phis[0].base_value;
    sj["global"] = shap::GlobalShapImportance(ens, train_rows, d);
    Rows values;
    for (const auto& p : phis) values.push_back(p.phi);
    sj["values"] = values;
    j["shap"] = std::move(sj);

    ojson mains = ojson::array();
    for (int f = 0; f < d; ++f) {
      const auto points = shap::MainEffectPoints(ens, train_rows, f, d);
      ojson e;
      e["feature"] = names[f];
      e["points"] = PointsJson(points);
      if (dataset.schema[f].is_categorical()) {
        e["fits"] = nullptr;
        e["fits_reason"] = "categorical_feature";
      } else {
        e["fits"] = TrendFits(points, config.polynomial_degree);
      }
      mains.push_back(std::move(e));
    }
    j["main_effects"] = std::move(mains);

    ojson ij;
    ij["features"] = names;
    ij["mean_abs"] = MeanAbsMatrix(inter, d);
    ojson pairs = ojson::array();
    for (size_t a = 0; a < top.size(); ++a) {
      for (size_t b = a + 1; b < top.size(); ++b) {
        std::vector<curvefit::Point> points;
        for (size_t i = 0; i < train_rows.size(); ++i) {
          points.emplace_back(train_rows[i][top[a]],
                              inter[i].phi[top[a]][top[b]] + inter[i].phi[top[b]][top[a]]);
        }
        ojson e;
        e["feature1"] = names[top[a]];
        e["feature2"] = names[top[b]];
        e["points"] = PointsJson(points);
        if (dataset.schema[top[a]].is_categorical()) {
          e["fits"] = nullptr;
          e["fits_reason"] = "categorical_feature";
        } else {
          e["fits"] = TrendFits(points, config.polynomial_degree);
        }
        pairs.push_back(std::move(e));
      }
    }
    ij["pairs"] = std::move(pairs);
    j["interactions"] = std::move(ij);
    return j;
  });

  // Model-based surrogates on the top-k features.
  const Rows top_rows = Project(dataset, ref.plan.train_idx, top);
  const Rows top_test = Project(dataset, ref.plan.test_idx, top);
  std::vector<int> test_labels;
  for (int r : ref.plan.test_idx) test_labels.push_back(dataset.Labels()[r]);
  const surrogate::CartModel cart = Stage("surrogate", [&] {
    return surrogate::FitCart(top_rows, train_labels, top_names, config.cart);
  });
  surrogate::RuleFitConfig rf_config = config.rulefit;
  const surrogate::RuleFitModel rulefit = Stage("surrogate", [&] {
    return surrogate::FitRuleFit(top_rows, train_labels, top_names, rf_config);
  });
  auto evaluate = [&](auto&& score, const Rows& rows, const std::vector<int>& y) {
    std::vector<double> s;
    for (const auto& r : rows) s.push_back(score(r));
    return MetricsJson(eval::ClassificationMetrics(s, y));
  };
  {
    ojson j;
    j["features"] = top_names;
    j["config"] = {{"max_depth", config.cart.max_depth},
                   {"min_leaf", config.cart.min_leaf}};
    ojson nodes = TreeJson(cart.tree);
    for (size_t i = 0; i < nodes.size(); ++i) {
      nodes[i]["counts"] = {cart.counts[i][0], cart.counts[i][1]};
      nodes[i]["gini"] = cart.impurity[i];
      if (!cart.tree.nodes[i].is_leaf()) {
        nodes[i]["feature_name"] = top_names[cart.tree.nodes[i].feature];
      }
    }
    j["nodes"] = std::move(nodes);
    j["depth"] = cart.tree.Depth();
    j["leaves"] = cart.tree.NumLeaves();
    auto score = [&](const std::vector<double>& r) { return cart.Score(r); };
    j["train"] = evaluate(score, top_rows, train_labels);
    j["test"] = evaluate(score, top_test, test_labels);
    report["cart"] = std::move(j);
  }
  {
    ojson j;
    j["features"] = top_names;
    j["intercept"] = rulefit.intercept;
    j["l1_strength"] = rulefit.l1_strength;
    j["lambda_path"] = rulefit.lambda_path;
    j["cv_auroc"] = rulefit.cv_auroc;
    j["n_rules"] = rulefit.rules.size();
    j["n_nonzero"] = rulefit.NumNonzero();
    std::vector<const surrogate::Rule*> sorted;
    for (const auto& r : rulefit.rules) {
      if (r.coefficient != 0.0) sorted.push_back(&r);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
      return a->importance > b->importance;
    });
    ojson rules = ojson::array();
    for (const auto* r : sorted) {
      ojson e;
      std::vector<std::string> conditions;
      for (const auto& c : r->conditions) conditions.push_back(c.ToString());
      e["conditions"] = conditions;
      e["rule"] = r->ToString();
      e["support"] = r->support;
      e["coefficient"] = r->coefficient;
      e["importance"] = r->importance;
      rules.push_back(std::move(e));
    }
    j["rules"] = std::move(rules);
    ojson linear = ojson::array();
    for (const auto& t : rulefit.linear_terms) {
      ojson e;
      e["feature"] = t.name;
      e["coefficient"] = t.coefficient;
      e["importance"] = t.importance;
      e["winsor_lower"] = t.lower;
      e["winsor_upper"] = t.upper;
      linear.push_back(std::move(e));
    }
    j["linear_terms"] = std::move(linear);
    const auto all = surrogate::RuleFeatureCounts(rulefit, false);
    const auto nonzero = surrogate::RuleFeatureCounts(rulefit, true);
    ojson counts = ojson::array();
    for (size_t f = 0; f < top_names.size(); ++f) {
      counts.push_back(
          {{"feature", top_names[f]}, {"rules", all[f]}, {"nonzero_rules", nonzero[f]}});
    }
    j["feature_rule_counts"] = std::move(counts);
    auto score = [&](const std::vector<double>& r) { return rulefit.PredictProba(r); };
    j["train"] = evaluate(score, top_rows, train_labels);
    j["test"] = evaluate(score, top_test, test_labels);
    report["rulefit"] = std::move(j);
  }

  // Post hoc on the tree surrogate.
  report["surrogate_posthoc"] = Stage("surrogate_posthoc", [&] {
    std::vector<std::vector<double>> grids;
    for (int f : top) {
      grids.push_back(posthoc::DefaultGrid(dataset, f, ref.plan.train_idx,
                                           config.pdp_grid_points));
    }
    const surrogate::SurrogatePosthoc post = surrogate::ExplainCart(cart, top_rows, grids);
    const int k = static_cast<int>(top.size());
    ojson j;
    ojson pdp = ojson::array();
    for (int f = 0; f < k; ++f) pdp.push_back(PdpJson(post.pdp[f], top_names[f]));
    j["pdp_ice"] = std::move(pdp);
    std::vector<double> global(k, 0.0);
    Rows values;
    for (const auto& s : post.shap) {
      for (int f = 0; f < k; ++f) global[f] += std::abs(s.phi[f]);
      values.push_back(s.phi);
    }
    for (double& g : global) g /= static_cast<double>(post.shap.size());
    ojson sj;
    sj["features"] = top_names;
    sj["base_value"] = post.shap.empty() ? 0.0 : post.shap[0].base_value;
    sj["global"] = global;
    sj["values"] = values;
    j["shap"] = std::move(sj);
    j["interactions"] = {{"features", top_names},
                         {"mean_abs", MeanAbsMatrix(post.interactions, k)}};
    return j;
  });

  // Local report for one instance.
  const std::vector<data::FeatureStats> stats =
      data::ComputeFeatureStats(dataset, ref.plan.train_idx);
  report["local"] = Stage("local", [&] {
    const int row = config.explain_row >= 0 ? config.explain_row : ref.plan.test_idx.front();
    if (static_cast<size_t>(row) >= dataset.num_rows()) {
      throw Error(ErrorKind::kConfig, "explain_row is out of range", "explain_row");
    }
    const posthoc::LocalReport local = posthoc::MakeLocalReport(
        ref.model, cart, dataset.rows[row], stats, config.lime);
    ojson j;
    j["row_id"] = row;
    j["instance"] = InstanceJson(dataset, row);
    j["label"] = dataset.Labels()[row];
    j["predicted_class"] = local.predicted_class;
    j["probability"] = local.probability;
    j["margin"] = local.margin;
    j["shap"] = {{"base_value", local.shap.base_value}, {"phi", local.shap.phi}};
    j["push"] = local.push;
    j["positive_count"] = local.positive_count;
    ojson lime;
    lime["seed"] = local.lime.seed;
    lime["n_samples"] = local.lime.n_samples;
    lime["kernel_width"] = local.lime.kernel_width;
    lime["intercept"] = local.lime.intercept;
    lime["weights"] = local.lime.weights;
    lime["selected"] = local.lime.selected;
    lime["local_fit_r2"] = local.lime.local_fit_r2;
    lime["local_prediction"] = local.lime.local_prediction;
    lime["model_prediction"] = local.lime.model_prediction;
    j["lime"] = std::move(lime);
    j["tree_path"] = PathJson(local.path);
    return j;
  });

  PipelineResult result;
  result.report = std::move(report);
  service::ModelRegistry& reg = result.registry;
  reg.version = kToolVersion;
  reg.complex = ref.model;
  reg.tree = cart;
  reg.rulefit = rulefit;
  reg.dataset = dataset;
  reg.train_idx = ref.plan.train_idx;
  reg.stats = stats;
  reg.lime = config.lime;
  reg.reference_seed = ref.seed;
  return result;
}

void WriteOutputs(PipelineResult& result, const fs::path& dir) {
  const fs::path staging =
      dir / (".isar-staging-" + std::to_string(static_cast<long>(getpid())));
  const char* files[] = {kReportFile, kReportHashFile, service::kRegistryFile,
                         service::kComplexModelFile, service::kTreeModelFile,
                         service::kRuleFitModelFile};
  try {
    fs::remove_all(staging);
    fs::create_directories(staging);
    auto write = [&](const char* rel, const std::string& bytes) {
      std::ofstream out(staging / rel, std::ios::binary);
      out << bytes;
      if (!out) throw Error(ErrorKind::kData, std::string("cannot write ") + rel);
    };
    write(kReportFile, RenderReport(result.report, RenderFormat::kJson));
    write(kReportHashFile, CanonicalReportHash(result.report) + "\n");
    service::SaveRegistry(result.registry, staging);
    fs::create_directories(dir / "models");
    for (const char* rel : files) fs::rename(staging / rel, dir / rel);
    fs::remove_all(staging);
  } catch (const fs::filesystem_error& e) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw Error(ErrorKind::kData, std::string("[write] ") + e.what());
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(staging, ignored);
    throw;
  }
}

}  // namespace isar::pipeline
