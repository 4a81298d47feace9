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

#include "isar/posthoc.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "isar/error.h"
#include "isar/eval.h"

namespace isar::posthoc {
namespace {

std::vector<double> PredictAll(const Predictor& predict, const Rows& rows) {
  std::vector<double> out(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) out[i] = predict(rows[i]);
  return out;
}

void CheckFeature(const Rows& rows, int feature) {
  if (rows.empty()) throw Error(ErrorKind::kData, "no rows to evaluate");
  if (feature < 0 || static_cast<size_t>(feature) >= rows[0].size()) {
    throw Error(ErrorKind::kConfig,
                "feature index " + std::to_string(feature) + " out of range");
  }
}

// Fractional ranks, ties share their average position.
std::vector<double> AverageRanks(std::span<const double> v) {
  std::vector<int> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Predictor ProbabilityOf(const gbdt::GbdtModel& model) {
  return [&model](std::span<const double> x) { return model.PredictProba(x); };
}

Predictor MarginOf(const TreeEnsemble& ensemble) {
  return [&ensemble](std::span<const double> x) { return ensemble.Margin(x); };
}

PermutationResult PermutationImportance(const Predictor& predict,
                                        const Rows& rows,
                                        std::span<const int> labels,
                                        int repeats, uint64_t seed) {
  if (repeats < 1) throw Error(ErrorKind::kConfig, "repeats must be >= 1");
  if (rows.size() != labels.size()) {
    throw Error(ErrorKind::kData, "rows and labels differ in length");
  }
  PermutationResult result;
  result.baseline = eval::Auroc(PredictAll(predict, rows), labels);
  const size_t d = rows.empty() ? 0 : rows[0].size();
  result.mean.assign(d, 0.0);
  result.sd.assign(d, 0.0);
  Rows shuffled = rows;
  std::vector<double> column(rows.size());
  std::vector<double> drops(repeats);
  for (size_t j = 0; j < d; ++j) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * (j + 1));
    for (size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][j];
    for (int r = 0; r < repeats; ++r) {
      std::vector<double> permuted = column;
      std::shuffle(permuted.begin(), permuted.end(), rng);
      for (size_t i = 0; i < rows.size(); ++i) shuffled[i][j] = permuted[i];
      drops[r] =
          result.baseline - eval::Auroc(PredictAll(predict, shuffled), labels);
    }
    for (size_t i = 0; i < rows.size(); ++i) shuffled[i][j] = column[i];
    double sum = 0.0;
    for (double v : drops) sum += v;
    const double mean = sum / repeats;
    double ss = 0.0;
    for (double v : drops) ss += (v - mean) * (v - mean);
    result.mean[j] = mean;
    result.sd[j] = repeats > 1 ? std::sqrt(ss / (repeats - 1)) : 0.0;
  }
  return result;
}

std::vector<double> DefaultGrid(const data::Dataset& dataset, int feature,
                                std::span<const int> row_ids, int points) {
  if (feature < 0 || static_cast<size_t>(feature) >= dataset.schema.size()) {
    throw Error(ErrorKind::kConfig, "feature index out of range");
  }
  const data::FeatureSchema& fs = dataset.schema[feature];
  if (fs.is_categorical()) {
    const auto it = dataset.encoding.find(fs.name);
    if (it == dataset.encoding.end()) {
      throw Error(ErrorKind::kData, "categorical feature is not encoded",
                  fs.name);
    }
    std::vector<double> grid;
    for (const auto& [label, code] : it->second) grid.push_back(code);
    std::sort(grid.begin(), grid.end());
    return grid;
  }
  if (points < 2) throw Error(ErrorKind::kConfig, "grid needs >= 2 points");
  std::vector<double> values;
  if (row_ids.empty()) {
    values = dataset.Column(feature);
  } else {
    for (int r : row_ids) values.push_back(dataset.rows.at(r)[feature]);
  }
  if (values.empty()) throw Error(ErrorKind::kData, "no rows for grid");
  std::sort(values.begin(), values.end());
  std::vector<double> grid;
  const double n1 = static_cast<double>(values.size() - 1);
  for (int k = 0; k < points; ++k) {
    const double h = n1 * k / (points - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    double v = values[lo];
    if (frac > 0.0 && lo + 1 < values.size()) {
      v += frac * (values[lo + 1] - values[lo]);
    }
    if (grid.empty() || v != grid.back()) grid.push_back(v);
  }
  return grid;
}

PdpIce ComputePdpIce(const Predictor& predict, const Rows& rows, int feature,
                     std::span<const double> grid,
                     const data::FeatureSchema* schema) {
  CheckFeature(rows, feature);
  if (grid.empty()) throw Error(ErrorKind::kConfig, "empty grid");
  PdpIce out;
  out.pdp.feature = out.ice.feature = feature;
  out.pdp.grid.assign(grid.begin(), grid.end());
  out.ice.grid = out.pdp.grid;
  if (schema != nullptr && !schema->is_categorical()) {
    for (double g : grid) {
      if (g < schema->min_value || g > schema->max_value) {
        out.warnings.push_back("grid value " + std::to_string(g) +
                               " outside valid range of " + schema->name);
      }
    }
  }
  out.ice.ice.assign(rows.size(), std::vector<double>(grid.size()));
  std::vector<double> x;
  for (size_t i = 0; i < rows.size(); ++i) {
    x = rows[i];
    for (size_t g = 0; g < grid.size(); ++g) {
      x[feature] = grid[g];
      out.ice.ice[i][g] = predict(x);
    }
  }
  out.pdp.pdp.assign(grid.size(), 0.0);
  for (size_t g = 0; g < grid.size(); ++g) {
    double sum = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) sum += out.ice.ice[i][g];
    out.pdp.pdp[g] = sum / static_cast<double>(rows.size());
  }
  return out;
}

Pdp2d ComputePdp2d(const Predictor& predict, const Rows& rows, int feature1,
                   int feature2, std::span<const double> grid1,
                   std::span<const double> grid2) {
  CheckFeature(rows, feature1);
  CheckFeature(rows, feature2);
  if (feature1 == feature2) {
    throw Error(ErrorKind::kConfig, "2D PDP needs two distinct features");
  }
  if (grid1.empty() || grid2.empty()) {
    throw Error(ErrorKind::kConfig, "empty grid");
  }
  Pdp2d out;
  out.feature1 = feature1;
  out.feature2 = feature2;
  out.grid1.assign(grid1.begin(), grid1.end());
  out.grid2.assign(grid2.begin(), grid2.end());
  out.values.assign(grid1.size(), std::vector<double>(grid2.size(), 0.0));
  std::vector<double> x;
  for (size_t a = 0; a < grid1.size(); ++a) {
    for (size_t b = 0; b < grid2.size(); ++b) {
      double sum = 0.0;
      for (const auto& row : rows) {
        x = row;
        x[feature1] = grid1[a];
        x[feature2] = grid2[b];
        sum += predict(x);
      }
      out.values[a][b] = sum / static_cast<double>(rows.size());
    }
  }
  return out;
}

LimeExplanation LimeExplain(const Predictor& predict, std::span<const double> x,
                            std::span<const data::FeatureStats> stats,
                            const LimeConfig& config) {
  const int d = static_cast<int>(x.size());
  if (static_cast<int>(stats.size()) != d) {
    throw Error(ErrorKind::kValidation, "feature statistics do not match instance");
  }
  if (config.n_samples < 2) throw Error(ErrorKind::kConfig, "n_samples must be >= 2");
  if (config.top_k < 1) throw Error(ErrorKind::kConfig, "top_k must be >= 1");
  const double width = config.kernel_width > 0.0
                           ? config.kernel_width
                           : 0.75 * std::sqrt(static_cast<double>(d));
  const int n = config.n_samples;

  auto represent = [&](int j, double v) {
    const data::FeatureStats& s = stats[j];
    if (s.categorical) return v == x[j] ? 1.0 : 0.0;
    return s.sd > 0.0 ? (v - s.mean) / s.sd : 0.0;
  };

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd z(n, d);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w(n);
  std::vector<double> z0(d);
  for (int j = 0; j < d; ++j) z0[j] = represent(j, x[j]);
  std::vector<double> sample(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      const data::FeatureStats& s = stats[j];
      if (i == 0) {
        sample[j] = x[j];
      } else if (s.categorical) {
        double u = unit(rng);
        sample[j] = s.frequencies.empty() ? x[j] : s.frequencies.rbegin()->first;
        for (const auto& [code, freq] : s.frequencies) {
          if (u < freq) {
            sample[j] = code;
            break;
          }
          u -= freq;
        }
      } else {
        sample[j] = s.mean + s.sd * normal(rng);
      }
      z(i, j) = represent(j, sample[j]);
    }
    double dist2 = 0.0;
    for (int j = 0; j < d; ++j) dist2 += (z(i, j) - z0[j]) * (z(i, j) - z0[j]);
    w(i) = std::exp(-dist2 / (width * width));
    y(i) = predict(sample);
  }

  // Feature selection by weighted correlation with the model output.
  const double wsum = w.sum();
  const double ymean = w.dot(y) / wsum;
  double yvar = 0.0;
  for (int i = 0; i < n; ++i) yvar += w(i) * (y(i) - ymean) * (y(i) - ymean);
  std::vector<int> eligible;
  std::vector<double> corr(d, 0.0);
  for (int j = 0; j < d; ++j) {
    const double m = w.dot(z.col(j)) / wsum;
    double var = 0.0, cov = 0.0;
    for (int i = 0; i < n; ++i) {
      var += w(i) * (z(i, j) - m) * (z(i, j) - m);
      cov += w(i) * (z(i, j) - m) * (y(i) - ymean);
    }
    if (var <= 1e-12 * wsum) continue;
    eligible.push_back(j);
    if (yvar > 0.0) corr[j] = cov / std::sqrt(var * yvar);
  }
  if (eligible.empty()) {
    throw Error(ErrorKind::kNumeric,
                "LIME design is degenerate: no sampled column varies");
  }
  std::stable_sort(eligible.begin(), eligible.end(), [&](int a, int b) {
    return std::abs(corr[a]) > std::abs(corr[b]);
  });
  if (static_cast<int>(eligible.size()) > config.top_k) {
    eligible.resize(config.top_k);
  }
  std::sort(eligible.begin(), eligible.end());

  const int p = static_cast<int>(eligible.size());
  Eigen::MatrixXd design(n, p + 1);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) {
    const double sw = std::sqrt(w(i));
    design(i, 0) = sw;
    for (int k = 0; k < p; ++k) design(i, k + 1) = sw * z(i, eligible[k]);
    target(i) = sw * y(i);
  }
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);

  LimeExplanation out;
  out.weights.assign(d, 0.0);
  out.selected = eligible;
  out.intercept = beta(0);
  out.local_prediction = beta(0);
  for (int k = 0; k < p; ++k) {
    out.weights[eligible[k]] = beta(k + 1);
    out.local_prediction += beta(k + 1) * z0[eligible[k]];
  }
  double sse = 0.0;
  for (int i = 0; i < n; ++i) {
    double fit = beta(0);
    for (int k = 0; k < p; ++k) fit += beta(k + 1) * z(i, eligible[k]);
    sse += w(i) * (y(i) - fit) * (y(i) - fit);
  }
  out.local_fit_r2 = yvar > 0.0 ? 1.0 - sse / yvar : 1.0;
  out.model_prediction = y(0);
  out.kernel_width = width;
  out.n_samples = n;
  out.seed = config.seed;
  for (double v : out.weights) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumeric, "non-finite LIME weight");
  }
  return out;
}

RankSummary AggregateRanks(std::span<const ImportanceTable> tables) {
  if (tables.empty()) throw Error(ErrorKind::kConfig, "no importance tables");
  RankSummary out;
  out.features = tables[0].features;
  const size_t d = out.features.size();
  std::vector<long> sums(d, 0);
  for (const ImportanceTable& t : tables) {
    if (t.features != out.features || t.ranks.size() != d) {
      throw Error(ErrorKind::kValidation,
                  "importance tables disagree on the feature set");
    }
    for (size_t j = 0; j < d; ++j) sums[j] += t.ranks[j];
  }
  out.average_rank.resize(d);
  for (size_t j = 0; j < d; ++j) {
    out.average_rank[j] =
        static_cast<double>(sums[j]) / static_cast<double>(tables.size());
  }
  out.order.resize(d);
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) {
    return out.average_rank[a] < out.average_rank[b];
  });
  out.tables.assign(tables.begin(), tables.end());
  return out;
}

double Spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorKind::kValidation, "Spearman needs two equal-length lists");
  }
  const std::vector<double> ra = AverageRanks(a);
  const std::vector<double> rb = AverageRanks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

ReferenceSelection SelectReferenceModel(std::span<const SplitRanking> splits,
                                        const RankSummary& global) {
  if (splits.empty()) throw Error(ErrorKind::kConfig, "no splits to choose from");
  ReferenceSelection out;
  size_t best = 0;
  for (size_t s = 0; s < splits.size(); ++s) {
    const RankSummary local = AggregateRanks(splits[s].tables);
    if (local.features != global.features) {
      throw Error(ErrorKind::kValidation, "split tables disagree on features");
    }
    out.spearman.push_back(Spearman(local.average_rank, global.average_rank));
    if (s == 0) continue;
    const SplitRanking& a = splits[s];
    const SplitRanking& b = splits[best];
    const double ra = out.spearman[s], rb = out.spearman[best];
    if (ra > rb || (ra == rb && (a.test_auroc > b.test_auroc ||
                                 (a.test_auroc == b.test_auroc && a.seed < b.seed)))) {
      best = s;
    }
  }
  out.seed = splits[best].seed;
  return out;
}

}  // namespace isar::posthoc
