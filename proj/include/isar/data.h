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

// Nanopriming feature table: schema, CSV ingestion, target binarization,
// correlation pruning, label encoding, stratified splitting, and a seeded
// synthetic generator with known ground truth.

#ifndef ISAR_DATA_H_
#define ISAR_DATA_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace isar::data {

enum class FeatureKind { kNumeric, kCategorical };

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  std::string unit = "none";
  // Closed valid interval for numeric features.
  double min_value = 0.0;
  double max_value = 0.0;
  // Allowed labels for categorical features.
  std::vector<std::string> categories;

  bool is_categorical() const { return kind == FeatureKind::kCategorical; }
};

using Schema = std::vector<FeatureSchema>;

// Throws kSchema on duplicate names, inverted ranges or empty label sets.
void ValidateSchema(std::span<const FeatureSchema> schema);

// The nine collected features, in CSV column order.
Schema NanoprimingSchema();
inline constexpr char kTargetColumn[] = "root_dry_weight_g";

// feature name -> (label -> code)
using EncodingMap = std::map<std::string, std::map<std::string, int>>;

struct Dataset {
  Schema schema;
  // rows[i][j]: numeric value, or the integer code of a categorical label once
  // encoded (NaN before encoding).
  std::vector<std::vector<double>> rows;
  // labels[i][j]: raw categorical label; empty for numeric features.
  std::vector<std::vector<std::string>> labels;
  std::vector<double> target_raw;
  // Binary class per row, present once binarized.
  std::optional<std::vector<int>> label;
  EncodingMap encoding;

  size_t num_rows() const { return rows.size(); }
  size_t num_features() const { return schema.size(); }
  bool encoded() const;
  std::vector<std::string> FeatureNames() const;
  // Throws kSchema naming the feature when absent.
  int FeatureIndex(const std::string& name) const;
  std::vector<double> Column(int feature) const;
  // Keeps the given rows, in order.
  Dataset Subset(std::span<const int> row_ids) const;
  // Keeps the named features, in the given order.
  Dataset SelectFeatures(std::span<const std::string> names) const;
  const std::vector<int>& Labels() const;
};

// Parses a CSV table. Column order is free; every schema column and the target
// column must be present. Extra columns are ignored.
Dataset ParseCsv(std::istream& input, const Schema& schema,
                 const std::string& source = "<stream>");
Dataset LoadDataset(const std::string& path, const Schema& schema);
// Writes schema columns followed by the target, round-trip exact.
void WriteCsv(const Dataset& dataset, std::ostream& output);

// Upper-half split at the median: value > median -> 1, otherwise 0. Rows tied
// at the median land in class 0.
std::vector<int> BinarizeTarget(std::span<const double> target_raw);
double Median(std::span<const double> values);
Dataset WithBinarizedLabel(Dataset dataset);

struct PruneResult {
  Dataset dataset;
  std::vector<std::string> removed;
  std::vector<std::string> warnings;
};

inline constexpr double kDefaultCorrelationThreshold = 0.9;

double PearsonCorrelation(std::span<const double> x, std::span<const double> y);

// Walks numeric feature pairs (i < j) in schema order and drops feature j when
// |r(i, j)| >= threshold and neither has been dropped yet. Constant columns are
// treated as uncorrelated.
PruneResult PruneCorrelated(const Dataset& dataset,
                            double threshold = kDefaultCorrelationThreshold);

// Lexicographic label order -> codes 0..k-1 over the observed labels.
Dataset EncodeCategoricals(Dataset dataset);
Dataset DecodeCategoricals(Dataset dataset);
// Throws kValidation naming the feature when the label has no code.
int EncodeLabel(const EncodingMap& encoding, const std::string& feature,
                const std::string& label);
std::string DecodeLabel(const EncodingMap& encoding, const std::string& feature,
                        int code);

struct SplitPlan {
  uint64_t seed = 0;
  std::vector<int> train_idx;
  std::vector<int> test_idx;
  // Partition of train_idx; row ids refer to the dataset.
  std::vector<std::vector<int>> cv_folds;
};

SplitPlan StratifiedShuffleSplit(std::span<const int> labels, uint64_t seed,
                                 double test_fraction);
SplitPlan StratifiedShuffleSplit(const Dataset& dataset, uint64_t seed,
                                 double test_fraction);

// Stratified k-fold partition of plan.train_idx. Members of each class are
// shuffled and dealt round-robin, so fold sizes differ by at most one.
SplitPlan MakeCvFolds(SplitPlan plan, std::span<const int> labels, int k,
                      uint64_t seed);

// Synthetic nanopriming table. The target is
//   root_dry_weight = base + scale * sigmoid(z)
//   z = w_c * (conc - 93.75) / 67.0234
//     + w_s * (tem_size - 65) / 31.7543
//     - w_z * (zeta + 10) / 17.3205
//     + noise_sd * eps,  eps ~ N(0, 1)
// where the centering constants are the means and standard deviations of the
// sampling distributions below. tem_size_sd tracks tem_size and pdi tracks the
// hydrodynamic diameter, so both are removed by correlation pruning.
struct SynthRecipe {
  double weight_concentration = 2.5;
  double weight_tem_size = 1.5;
  double weight_zeta = 1.5;
  double noise_sd = 0.5;
  double base = 0.10;
  double scale = 0.20;
};

inline constexpr double kConcentrationMean = 93.75;
inline constexpr double kConcentrationSd = 67.02344;
inline constexpr double kTemSizeMean = 65.0;
inline constexpr double kTemSizeSd = 31.75426;
inline constexpr double kZetaMean = -10.0;
inline constexpr double kZetaSd = 17.32051;

// Latent score z for one row with zero noise.
double SynthLatent(const SynthRecipe& recipe, double concentration,
                   double tem_size, double zeta);

Dataset SynthGenerate(uint64_t seed, int n, const SynthRecipe& recipe = {});

// Per-feature statistics of training rows, used for local surrogate sampling
// and range checks.
struct FeatureStats {
  std::string name;
  bool categorical = false;
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  // code -> relative frequency, categorical only.
  std::map<int, double> frequencies;
};

std::vector<FeatureStats> ComputeFeatureStats(const Dataset& dataset,
                                              std::span<const int> row_ids);

}  // namespace isar::data

#endif  // ISAR_DATA_H_
