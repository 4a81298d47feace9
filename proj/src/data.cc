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

#include "isar/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "isar/error.h"

namespace isar::data {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string Trim(const std::string& s) {
  size_t begin = 0;
  size_t end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) {
    ++begin;
  }
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) {
    --end;
  }
  std::string out = s.substr(begin, end - begin);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      cell.push_back(c);
    } else if (c == ',' && !quoted) {
      cells.push_back(Trim(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(Trim(cell));
  return cells;
}

bool ParseReal(const std::string& text, double* value) {
  if (text.empty()) return false;
  std::istringstream stream(text);
  stream.imbue(std::locale::classic());
  stream >> *value;
  return !stream.fail() && stream.eof() && std::isfinite(*value);
}

std::string FormatReal(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace

void ValidateSchema(std::span<const FeatureSchema> schema) {
  std::set<std::string> names;
  for (const FeatureSchema& f : schema) {
    if (f.name.empty()) throw Error(ErrorKind::kSchema, "empty feature name");
    if (!names.insert(f.name).second) {
      throw Error(ErrorKind::kSchema, "duplicate feature '" + f.name + "'",
                  f.name);
    }
    if (f.is_categorical()) {
      if (f.categories.empty()) {
        throw Error(ErrorKind::kSchema,
                    "categorical feature '" + f.name + "' has no labels",
                    f.name);
      }
    } else if (!(f.min_value <= f.max_value)) {
      throw Error(ErrorKind::kSchema,
                  "feature '" + f.name + "' has min > max", f.name);
    }
  }
}

Schema NanoprimingSchema() {
  auto numeric = [](std::string name, std::string unit, double lo, double hi) {
    FeatureSchema f;
    f.name = std::move(name);
    f.kind = FeatureKind::kNumeric;
    f.unit = std::move(unit);
    f.min_value = lo;
    f.max_value = hi;
    return f;
  };
  auto categorical = [](std::string name, std::vector<std::string> labels) {
    FeatureSchema f;
    f.name = std::move(name);
    f.kind = FeatureKind::kCategorical;
    f.categories = std::move(labels);
    return f;
  };
  return {
      categorical("composition", {"CeO2", "CuO", "Fe2O3", "Fe3O4", "SiO2",
                                  "TiO2", "ZnO"}),
      numeric("tem_size_nm", "nm", 1.0, 500.0),
      numeric("tem_size_sd_nm", "nm", 0.0, 250.0),
      categorical("morphology", {"irregular", "rod", "spherical"}),
      numeric("concentration_mg_l", "mg/L", 0.0, 500.0),
      numeric("hydrodynamic_diameter_nm", "nm", 1.0, 5000.0),
      numeric("pdi", "none", 0.0, 1.0),
      numeric("zeta_potential_mv", "mV", -100.0, 100.0),
      numeric("bet_surface_area_m2_g", "m2/g", 0.0, 2000.0),
  };
}

bool Dataset::encoded() const {
  for (const FeatureSchema& f : schema) {
    if (f.is_categorical() && !encoding.contains(f.name)) return false;
  }
  return true;
}

std::vector<std::string> Dataset::FeatureNames() const {
  std::vector<std::string> names;
  names.reserve(schema.size());
  for (const FeatureSchema& f : schema) names.push_back(f.name);
  return names;
}

int Dataset::FeatureIndex(const std::string& name) const {
  for (size_t j = 0; j < schema.size(); ++j) {
    if (schema[j].name == name) return static_cast<int>(j);
  }
  throw Error(ErrorKind::kSchema, "unknown feature '" + name + "'", name);
}

std::vector<double> Dataset::Column(int feature) const {
  std::vector<double> column;
  column.reserve(rows.size());
  for (const auto& row : rows) column.push_back(row[feature]);
  return column;
}

Dataset Dataset::Subset(std::span<const int> row_ids) const {
  Dataset out;
  out.schema = schema;
  out.encoding = encoding;
  if (label) out.label.emplace();
  for (int id : row_ids) {
    out.rows.push_back(rows.at(id));
    out.labels.push_back(labels.at(id));
    out.target_raw.push_back(target_raw.at(id));
    if (label) out.label->push_back(label->at(id));
  }
  return out;
}

Dataset Dataset::SelectFeatures(std::span<const std::string> names) const {
  std::vector<int> keep;
  for (const std::string& name : names) keep.push_back(FeatureIndex(name));
  Dataset out;
  out.target_raw = target_raw;
  out.label = label;
  for (int j : keep) {
    out.schema.push_back(schema[j]);
    if (auto it = encoding.find(schema[j].name); it != encoding.end()) {
      out.encoding.insert(*it);
    }
  }
  out.rows.reserve(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    std::vector<double> row;
    std::vector<std::string> row_labels;
    for (int j : keep) {
      row.push_back(rows[i][j]);
      row_labels.push_back(labels[i][j]);
    }
    out.rows.push_back(std::move(row));
    out.labels.push_back(std::move(row_labels));
  }
  return out;
}

const std::vector<int>& Dataset::Labels() const {
  if (!label) {
    throw Error(ErrorKind::kData, "dataset has not been binarized");
  }
  return *label;
}

Dataset ParseCsv(std::istream& input, const Schema& schema,
                 const std::string& source) {
  ValidateSchema(schema);
  std::string line;
  if (!std::getline(input, line) || Trim(line).empty()) {
    throw Error(ErrorKind::kSchema, source + ": empty file, header expected");
  }
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
    line = line.substr(3);  // UTF-8 byte order mark
  }
  const std::vector<std::string> header = SplitLine(line);
  auto column_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorKind::kSchema,
                  source + ": missing column '" + name + "'", name);
    }
    return static_cast<size_t>(it - header.begin());
  };
  std::vector<size_t> columns;
  for (const FeatureSchema& f : schema) columns.push_back(column_of(f.name));
  const size_t target_column = column_of(kTargetColumn);

  Dataset dataset;
  dataset.schema = schema;
  std::vector<std::string> offenders;
  int line_number = 1;
  while (std::getline(input, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = SplitLine(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::kSchema,
                  source + ": line " + std::to_string(line_number) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    std::vector<double> row(schema.size(), kNaN);
    std::vector<std::string> row_labels(schema.size());
    for (size_t j = 0; j < schema.size(); ++j) {
      const FeatureSchema& f = schema[j];
      const std::string& cell = cells[columns[j]];
      const std::string where = "line " + std::to_string(line_number) +
                                ", column '" + f.name + "'";
      if (f.is_categorical()) {
        if (std::find(f.categories.begin(), f.categories.end(), cell) ==
            f.categories.end()) {
          offenders.push_back(where + ": unknown label '" + cell + "'");
        }
        row_labels[j] = cell;
        continue;
      }
      double value = 0.0;
      if (!ParseReal(cell, &value)) {
        throw Error(ErrorKind::kSchema,
                    source + ": " + where + ": cannot parse '" + cell + "'",
                    f.name);
      }
      if (value < f.min_value || value > f.max_value) {
        offenders.push_back(where + ": " + cell + " outside [" +
                            FormatReal(f.min_value) + ", " +
                            FormatReal(f.max_value) + "]");
      }
      row[j] = value;
    }
    double target = 0.0;
    if (!ParseReal(cells[target_column], &target)) {
      throw Error(ErrorKind::kSchema,
                  source + ": line " + std::to_string(line_number) +
                      ", column '" + kTargetColumn + "': cannot parse '" +
                      cells[target_column] + "'",
                  kTargetColumn);
    }
    dataset.rows.push_back(std::move(row));
    dataset.labels.push_back(std::move(row_labels));
    dataset.target_raw.push_back(target);
  }
  if (!offenders.empty()) {
    std::string message = source + ": " + std::to_string(offenders.size()) +
                          " invalid value(s):";
    for (const std::string& o : offenders) message += "\n  " + o;
    throw Error(ErrorKind::kValidation, message);
  }
  if (dataset.rows.empty()) {
    throw Error(ErrorKind::kSchema, source + ": no data rows");
  }
  return dataset;
}

Dataset LoadDataset(const std::string& path, const Schema& schema) {
  std::ifstream input(path);
  if (!input) {
    throw Error(ErrorKind::kSchema, "cannot open dataset '" + path + "'");
  }
  return ParseCsv(input, schema, path);
}

void WriteCsv(const Dataset& dataset, std::ostream& output) {
  for (const FeatureSchema& f : dataset.schema) output << f.name << ',';
  output << kTargetColumn << '\n';
  for (size_t i = 0; i < dataset.num_rows(); ++i) {
    for (size_t j = 0; j < dataset.num_features(); ++j) {
      if (dataset.schema[j].is_categorical()) {
        output << dataset.labels[i][j];
      } else {
        output << FormatReal(dataset.rows[i][j]);
      }
      output << ',';
    }
    output << FormatReal(dataset.target_raw[i]) << '\n';
  }
}

double Median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::kData, "median of empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

std::vector<int> BinarizeTarget(std::span<const double> target_raw) {
  if (target_raw.size() < 2) {
    throw Error(ErrorKind::kData, "binarization needs at least two values");
  }
  const double median = Median(target_raw);
  std::vector<int> labels;
  labels.reserve(target_raw.size());
  for (double v : target_raw) labels.push_back(v > median ? 1 : 0);
  return labels;
}

Dataset WithBinarizedLabel(Dataset dataset) {
  dataset.label = BinarizeTarget(dataset.target_raw);
  return dataset;
}

double PearsonCorrelation(std::span<const double> x,
                          std::span<const double> y) {
  const size_t n = x.size();
  if (n != y.size() || n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

PruneResult PruneCorrelated(const Dataset& dataset, double threshold) {
  PruneResult result;
  std::vector<int> numeric;
  for (size_t j = 0; j < dataset.num_features(); ++j) {
    if (!dataset.schema[j].is_categorical()) numeric.push_back(j);
  }
  std::vector<std::vector<double>> columns;
  for (int j : numeric) {
    columns.push_back(dataset.Column(j));
    const auto [lo, hi] =
        std::minmax_element(columns.back().begin(), columns.back().end());
    if (columns.back().empty() || *lo == *hi) {
      result.warnings.push_back("feature '" + dataset.schema[j].name +
                                "' is constant; correlations treated as 0");
    }
  }
  std::vector<bool> removed(numeric.size(), false);
  for (size_t a = 0; a < numeric.size(); ++a) {
    if (removed[a]) continue;
    for (size_t b = a + 1; b < numeric.size(); ++b) {
      if (removed[b]) continue;
      if (std::abs(PearsonCorrelation(columns[a], columns[b])) >= threshold) {
        removed[b] = true;
      }
    }
  }
  std::vector<std::string> keep;
  for (size_t j = 0; j < dataset.num_features(); ++j) {
    auto it = std::find(numeric.begin(), numeric.end(), static_cast<int>(j));
    if (it != numeric.end() && removed[it - numeric.begin()]) {
      result.removed.push_back(dataset.schema[j].name);
    } else {
      keep.push_back(dataset.schema[j].name);
    }
  }
  result.dataset = dataset.SelectFeatures(keep);
  return result;
}

Dataset EncodeCategoricals(Dataset dataset) {
  for (size_t j = 0; j < dataset.num_features(); ++j) {
    const FeatureSchema& f = dataset.schema[j];
    if (!f.is_categorical()) continue;
    std::set<std::string> observed;
    for (const auto& row_labels : dataset.labels) observed.insert(row_labels[j]);
    std::map<std::string, int> codes;
    int next = 0;
    for (const std::string& label : observed) codes[label] = next++;
    for (size_t i = 0; i < dataset.num_rows(); ++i) {
      dataset.rows[i][j] = codes.at(dataset.labels[i][j]);
    }
    dataset.encoding[f.name] = std::move(codes);
  }
  return dataset;
}

Dataset DecodeCategoricals(Dataset dataset) {
  for (size_t j = 0; j < dataset.num_features(); ++j) {
    const FeatureSchema& f = dataset.schema[j];
    if (!f.is_categorical() || !dataset.encoding.contains(f.name)) continue;
    for (size_t i = 0; i < dataset.num_rows(); ++i) {
      dataset.labels[i][j] = DecodeLabel(
          dataset.encoding, f.name, static_cast<int>(dataset.rows[i][j]));
      dataset.rows[i][j] = kNaN;
    }
    dataset.encoding.erase(f.name);
  }
  return dataset;
}

int EncodeLabel(const EncodingMap& encoding, const std::string& feature,
                const std::string& label) {
  auto feature_it = encoding.find(feature);
  if (feature_it == encoding.end()) {
    throw Error(ErrorKind::kValidation,
                "feature '" + feature + "' has no encoding", feature);
  }
  auto it = feature_it->second.find(label);
  if (it == feature_it->second.end()) {
    throw Error(ErrorKind::kValidation,
                "unknown category '" + label + "' for feature '" + feature +
                    "'",
                feature);
  }
  return it->second;
}

std::string DecodeLabel(const EncodingMap& encoding, const std::string& feature,
                        int code) {
  auto feature_it = encoding.find(feature);
  if (feature_it != encoding.end()) {
    for (const auto& [label, c] : feature_it->second) {
      if (c == code) return label;
    }
  }
  throw Error(ErrorKind::kValidation,
              "unknown code " + std::to_string(code) + " for feature '" +
                  feature + "'",
              feature);
}

SplitPlan StratifiedShuffleSplit(std::span<const int> labels, uint64_t seed,
                                 double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, "test fraction must lie in (0, 1)");
  }
  std::vector<int> members[2];
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorKind::kData, "labels must be binary");
    }
    members[labels[i]].push_back(static_cast<int>(i));
  }
  for (int c = 0; c < 2; ++c) {
    if (members[c].size() < 2) {
      throw Error(ErrorKind::kData,
                  "stratification needs at least two members of class " +
                      std::to_string(c));
    }
  }
  const size_t n = labels.size();
  const auto test_size = static_cast<size_t>(std::llround(n * test_fraction));
  // Floor of each class's proportional share, then hand the remainder to the
  // classes with the largest fractional parts (class 0 first on ties).
  size_t allocation[2];
  double remainder[2];
  size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double share = members[c].size() * test_fraction;
    allocation[c] = static_cast<size_t>(std::floor(share));
    remainder[c] = share - allocation[c];
    assigned += allocation[c];
  }
  while (assigned < test_size) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++allocation[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  SplitPlan plan;
  plan.seed = seed;
  std::mt19937_64 rng(seed);
  for (int c = 0; c < 2; ++c) {
    std::vector<int> shuffled = members[c];
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (size_t k = 0; k < shuffled.size(); ++k) {
      (k < allocation[c] ? plan.test_idx : plan.train_idx)
          .push_back(shuffled[k]);
    }
  }
  std::sort(plan.train_idx.begin(), plan.train_idx.end());
  std::sort(plan.test_idx.begin(), plan.test_idx.end());
  return plan;
}

SplitPlan StratifiedShuffleSplit(const Dataset& dataset, uint64_t seed,
                                 double test_fraction) {
  return StratifiedShuffleSplit(dataset.Labels(), seed, test_fraction);
}

SplitPlan MakeCvFolds(SplitPlan plan, std::span<const int> labels, int k,
                      uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::kConfig, "need at least 2 folds");
  if (plan.train_idx.size() < static_cast<size_t>(k)) {
    throw Error(ErrorKind::kData,
                "cannot make " + std::to_string(k) + " folds from " +
                    std::to_string(plan.train_idx.size()) + " rows");
  }
  std::vector<int> members[2];
  for (int id : plan.train_idx) members[labels[id] == 1].push_back(id);
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ULL);
  plan.cv_folds.assign(k, {});
  size_t position = 0;
  for (auto& group : members) {
    std::shuffle(group.begin(), group.end(), rng);
    for (int id : group) plan.cv_folds[position++ % k].push_back(id);
  }
  for (auto& fold : plan.cv_folds) std::sort(fold.begin(), fold.end());
  return plan;
}

double SynthLatent(const SynthRecipe& recipe, double concentration,
                   double tem_size, double zeta) {
  return recipe.weight_concentration * (concentration - kConcentrationMean) /
             kConcentrationSd +
         recipe.weight_tem_size * (tem_size - kTemSizeMean) / kTemSizeSd -
         recipe.weight_zeta * (zeta - kZetaMean) / kZetaSd;
}

Dataset SynthGenerate(uint64_t seed, int n, const SynthRecipe& recipe) {
  if (n < 8) throw Error(ErrorKind::kConfig, "synthetic table needs n >= 8");
  Dataset dataset;
  dataset.schema = NanoprimingSchema();
  const auto& compositions = dataset.schema[0].categories;
  const auto& morphologies = dataset.schema[3].categories;
  static constexpr double kConcentrations[] = {25.0, 50.0, 100.0, 200.0};

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick_composition(
      0, compositions.size() - 1);
  std::uniform_int_distribution<size_t> pick_morphology(
      0, morphologies.size() - 1);
  std::uniform_int_distribution<int> pick_concentration(0, 3);
  std::uniform_real_distribution<double> tem_size(10.0, 120.0);
  std::uniform_real_distribution<double> hydro(150.0, 1200.0);
  std::uniform_real_distribution<double> zeta(-40.0, 20.0);
  std::uniform_real_distribution<double> bet(5.0, 120.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  for (int i = 0; i < n; ++i) {
    const std::string composition = compositions[pick_composition(rng)];
    const std::string morphology = morphologies[pick_morphology(rng)];
    const double size = tem_size(rng);
    const double size_sd = std::max(0.0, 0.25 * size + normal(rng));
    const double concentration = kConcentrations[pick_concentration(rng)];
    const double diameter = hydro(rng);
    const double pdi =
        std::clamp(0.1 + diameter / 2500.0 + 0.01 * normal(rng), 0.0, 1.0);
    const double potential = zeta(rng);
    const double surface = bet(rng);
    const double eps = normal(rng);
    const double z = SynthLatent(recipe, concentration, size, potential) +
                     recipe.noise_sd * eps;
    dataset.rows.push_back({kNaN, size, size_sd, kNaN, concentration, diameter,
                            pdi, potential, surface});
    dataset.labels.push_back({composition, "", "", morphology, "", "", "", "",
                              ""});
    dataset.target_raw.push_back(recipe.base +
                                 recipe.scale / (1.0 + std::exp(-z)));
  }
  return dataset;
}

std::vector<FeatureStats> ComputeFeatureStats(const Dataset& dataset,
                                              std::span<const int> row_ids) {
  if (row_ids.empty()) {
    throw Error(ErrorKind::kData, "feature statistics need at least one row");
  }
  std::vector<FeatureStats> stats;
  for (size_t j = 0; j < dataset.num_features(); ++j) {
    FeatureStats s;
    s.name = dataset.schema[j].name;
    s.categorical = dataset.schema[j].is_categorical();
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (int id : row_ids) {
      const double v = dataset.rows[id][j];
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
      if (s.categorical) s.frequencies[static_cast<int>(v)] += 1.0;
    }
    s.mean = sum / row_ids.size();
    double ss = 0.0;
    for (int id : row_ids) {
      ss += (dataset.rows[id][j] - s.mean) * (dataset.rows[id][j] - s.mean);
    }
    s.sd = std::sqrt(ss / row_ids.size());
    for (auto& [code, f] : s.frequencies) f /= row_ids.size();
    stats.push_back(std::move(s));
  }
  return stats;
}

}  // namespace isar::data
