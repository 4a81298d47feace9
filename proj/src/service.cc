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

#include "isar/service.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "isar/error.h"
#include "isar/json_util.h"
#include "isar/shap.h"

namespace isar::service {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kData, "cannot write " + path.string());
  out << bytes;
  if (!out) throw Error(ErrorKind::kData, "failed writing " + path.string());
}

json HexArray(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(EncodeHexDouble(v));
  return out;
}

std::vector<double> ReadArray(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(ReadDouble(v));
  return out;
}

json RegistryDocument(const ModelRegistry& r) {
  json schema = json::array();
  for (const data::FeatureSchema& f : r.dataset.schema) {
    schema.push_back({{"name", f.name},
                      {"kind", f.is_categorical() ? "categorical" : "numeric"},
                      {"unit", f.unit},
                      {"min", EncodeHexDouble(f.min_value)},
                      {"max", EncodeHexDouble(f.max_value)},
                      {"categories", f.categories}});
  }
  json rows = json::array();
  for (size_t i = 0; i < r.dataset.num_rows(); ++i) {
    rows.push_back({{"values", HexArray(r.dataset.rows[i])},
                    {"labels", r.dataset.labels[i]},
                    {"target", EncodeHexDouble(r.dataset.target_raw[i])},
                    {"label", r.dataset.Labels()[i]}});
  }
  json stats = json::array();
  for (const data::FeatureStats& s : r.stats) {
    json freq = json::object();
    for (const auto& [code, f] : s.frequencies) {
      freq[std::to_string(code)] = EncodeHexDouble(f);
    }
    stats.push_back({{"name", s.name},
                     {"categorical", s.categorical},
                     {"mean", EncodeHexDouble(s.mean)},
                     {"sd", EncodeHexDouble(s.sd)},
                     {"min", EncodeHexDouble(s.min)},
                     {"max", EncodeHexDouble(s.max)},
                     {"frequencies", std::move(freq)}});
  }
  return {{"format", kRegistryFormat},
          {"version", r.version},
          {"reference_seed", r.reference_seed},
          {"schema", std::move(schema)},
          {"encoding", r.dataset.encoding},
          {"rows", std::move(rows)},
          {"train_idx", r.train_idx},
          {"stats", std::move(stats)},
          {"lime",
           {{"n_samples", r.lime.n_samples},
            {"kernel_width", EncodeHexDouble(r.lime.kernel_width)},
            {"top_k", r.lime.top_k},
            {"seed", r.lime.seed}}},
          {"model_files",
           {{"complex", kComplexModelFile},
            {"tree", kTreeModelFile},
            {"rulefit", kRuleFitModelFile}}}};
}

void ParseRegistryDocument(const json& j, ModelRegistry& r) {
  if (j.value("format", "") != kRegistryFormat) {
    throw Error(ErrorKind::kModelIntegrity, "registry.json has an unknown format");
  }
  try {
    r.version = j.at("version").get<std::string>();
    r.reference_seed = j.at("reference_seed").get<uint64_t>();
    for (const auto& f : j.at("schema")) {
      data::FeatureSchema fs;
      fs.name = f.at("name").get<std::string>();
      fs.kind = f.at("kind").get<std::string>() == "categorical"
                    ? data::FeatureKind::kCategorical
                    : data::FeatureKind::kNumeric;
      fs.unit = f.at("unit").get<std::string>();
      fs.min_value = ReadDouble(f.at("min"));
      fs.max_value = ReadDouble(f.at("max"));
      fs.categories = f.at("categories").get<std::vector<std::string>>();
      r.dataset.schema.push_back(std::move(fs));
    }
    r.dataset.encoding = j.at("encoding").get<data::EncodingMap>();
    std::vector<int> labels;
    for (const auto& row : j.at("rows")) {
      r.dataset.rows.push_back(ReadArray(row.at("values")));
      r.dataset.labels.push_back(row.at("labels").get<std::vector<std::string>>());
      r.dataset.target_raw.push_back(ReadDouble(row.at("target")));
      labels.push_back(row.at("label").get<int>());
      if (r.dataset.rows.back().size() != r.dataset.schema.size()) {
        throw Error(ErrorKind::kModelIntegrity, "registry row width mismatch");
      }
    }
    r.dataset.label = std::move(labels);
    r.train_idx = j.at("train_idx").get<std::vector<int>>();
    for (int id : r.train_idx) {
      if (id < 0 || static_cast<size_t>(id) >= r.dataset.num_rows()) {
        throw Error(ErrorKind::kModelIntegrity, "registry train index out of range");
      }
    }
    for (const auto& s : j.at("stats")) {
      data::FeatureStats fs;
      fs.name = s.at("name").get<std::string>();
      fs.categorical = s.at("categorical").get<bool>();
      fs.mean = ReadDouble(s.at("mean"));
      fs.sd = ReadDouble(s.at("sd"));
      fs.min = ReadDouble(s.at("min"));
      fs.max = ReadDouble(s.at("max"));
      for (const auto& [code, f] : s.at("frequencies").items()) {
        fs.frequencies[std::stoi(code)] = ReadDouble(f);
      }
      r.stats.push_back(std::move(fs));
    }
    if (r.stats.size() != r.dataset.schema.size()) {
      throw Error(ErrorKind::kModelIntegrity, "registry stats do not match schema");
    }
    const json& lime = j.at("lime");
    r.lime.n_samples = lime.at("n_samples").get<int>();
    r.lime.kernel_width = ReadDouble(lime.at("kernel_width"));
    r.lime.top_k = lime.at("top_k").get<int>();
    r.lime.seed = lime.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kModelIntegrity,
                std::string("malformed registry.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Request handling.

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, std::string code, const std::string& message,
            std::string field = "")
      : std::runtime_error(message),
        status_(status),
        code_(std::move(code)),
        field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string code_;
  std::string field_;
};

Response JsonResponse(int status, const ordered_json& body) {
  return {status, body.dump()};
}

Response ErrorResponse(int status, const std::string& code,
                       const std::string& message, const std::string& field) {
  ordered_json body;
  body["code"] = code;
  body["message"] = message;
  body["field"] = field.empty() ? ordered_json(nullptr) : ordered_json(field);
  return JsonResponse(status, body);
}

template <typename Fn>
Response Guard(Fn&& fn) {
  try {
    return fn();
  } catch (const HttpError& e) {
    return ErrorResponse(e.status(), e.code(), e.what(), e.field());
  } catch (const Error& e) {
    const int status = e.kind() == ErrorKind::kNotFound ? 404 : 400;
    return ErrorResponse(status, ErrorKindName(e.kind()), e.what(), e.field());
  } catch (const std::exception& e) {
    return ErrorResponse(500, "internal_error", e.what(), "");
  }
}

enum class ModelKind { kComplex, kTree, kRuleFit };

ModelKind ParseModel(const json& body) {
  const std::string name = body.contains("model") ? body.at("model").get<std::string>()
                                                  : "complex";
  if (name == "complex") return ModelKind::kComplex;
  if (name == "tree") return ModelKind::kTree;
  if (name == "rulefit") return ModelKind::kRuleFit;
  throw HttpError(404, "not_found", "unknown model " + name, "model");
}

const char* ModelName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kComplex: return "complex";
    case ModelKind::kTree: return "tree";
    case ModelKind::kRuleFit: return "rulefit";
  }
  return "";
}

struct Instance {
  std::optional<int> id;
  std::vector<double> x;            // dataset feature order, encoded
  std::vector<ordered_json> shown;  // display value per feature
  std::vector<std::string> ood_features;
};

json ParseBody(const std::string& body) {
  try {
    json j = json::parse(body);
    if (!j.is_object()) {
      throw HttpError(400, "validation_error", "request body must be an object");
    }
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError(400, "validation_error",
                    std::string("malformed JSON body: ") + e.what());
  }
}

// Code for a schema-valid label that never occurred in training: its position
// between the neighbouring observed labels in lexicographic order.
double InterpolatedCode(const std::map<std::string, int>& codes,
                        const std::string& label) {
  const auto hi = codes.upper_bound(label);
  if (hi == codes.begin()) return hi->second - 0.5;
  const auto lo = std::prev(hi);
  if (hi == codes.end()) return lo->second + 0.5;
  return 0.5 * (lo->second + hi->second);
}

Instance ParseInstance(const ModelRegistry& r, const json& body) {
  const data::Dataset& d = r.dataset;
  const bool has_id = body.contains("instance_id");
  const bool has_map = body.contains("instance");
  if (has_id == has_map) {
    throw HttpError(400, "validation_error",
                    "give exactly one of instance_id or instance", "instance");
  }
  Instance inst;
  const size_t nf = d.schema.size();
  if (has_id) {
    const json& v = body.at("instance_id");
    if (!v.is_number_integer()) {
      throw HttpError(400, "validation_error", "instance_id must be an integer",
                      "instance_id");
    }
    const long id = v.get<long>();
    if (id < 0 || static_cast<size_t>(id) >= d.num_rows()) {
      throw HttpError(404, "not_found", "no instance " + std::to_string(id),
                      "instance_id");
    }
    inst.id = static_cast<int>(id);
    inst.x = d.rows[id];
    for (size_t j = 0; j < nf; ++j) {
      inst.shown.push_back(d.schema[j].is_categorical() ? ordered_json(d.labels[id][j])
                                                        : ordered_json(inst.x[j]));
    }
  } else {
    const json& m = body.at("instance");
    if (!m.is_object()) {
      throw HttpError(400, "validation_error", "instance must be an object",
                      "instance");
    }
    for (const auto& [key, value] : m.items()) {
      bool known = false;
      for (const auto& f : d.schema) known |= f.name == key;
      if (!known) {
        throw HttpError(400, "validation_error",
                        key + " is not a modeling feature", key);
      }
    }
    inst.x.resize(nf);
    for (size_t j = 0; j < nf; ++j) {
      const data::FeatureSchema& f = d.schema[j];
      if (!m.contains(f.name)) {
        throw HttpError(400, "validation_error", "missing feature " + f.name, f.name);
      }
      const json& v = m.at(f.name);
      if (f.is_categorical()) {
        if (!v.is_string()) {
          throw HttpError(400, "validation_error", f.name + " must be a label",
                          f.name);
        }
        const std::string label = v.get<std::string>();
        if (std::find(f.categories.begin(), f.categories.end(), label) ==
            f.categories.end()) {
          throw HttpError(400, "unknown_category",
                          "unknown category " + label + " for " + f.name, f.name);
        }
        const auto& codes = d.encoding.at(f.name);
        const auto it = codes.find(label);
        inst.x[j] = it != codes.end() ? it->second : InterpolatedCode(codes, label);
        inst.shown.push_back(label);
      } else {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
          throw HttpError(400, "validation_error", f.name + " must be a number",
                          f.name);
        }
        const double x = v.get<double>();
        if (x < f.min_value || x > f.max_value) {
          throw HttpError(400, "validation_error",
                          f.name + " is outside its valid range", f.name);
        }
        inst.x[j] = x;
        inst.shown.push_back(x);
      }
    }
  }
  for (size_t j = 0; j < nf; ++j) {
    const data::FeatureSchema& f = d.schema[j];
    const data::FeatureStats& s = r.stats[j];
    const bool out = f.is_categorical()
                         ? s.frequencies.count(static_cast<int>(inst.x[j])) == 0 ||
                               inst.x[j] != std::floor(inst.x[j])
                         : inst.x[j] < s.min || inst.x[j] > s.max;
    if (out) inst.ood_features.push_back(f.name);
  }
  return inst;
}

// Column positions of `names` inside the registry's feature order.
std::vector<int> Positions(const ModelRegistry& r,
                           const std::vector<std::string>& names) {
  std::vector<int> pos;
  for (const auto& n : names) pos.push_back(r.dataset.FeatureIndex(n));
  return pos;
}

std::vector<double> Project(const std::vector<double>& x, const std::vector<int>& pos) {
  std::vector<double> out;
  for (int p : pos) out.push_back(x[p]);
  return out;
}

struct Prediction {
  int cls = 0;
  double probability = 0.0;
  double margin = 0.0;
};

Prediction PredictWith(const ModelRegistry& r, ModelKind kind,
                       const std::vector<double>& x) {
  Prediction p;
  switch (kind) {
    case ModelKind::kComplex:
      p.margin = r.complex.PredictMargin(x);
      p.probability = gbdt::Sigmoid(p.margin);
      break;
    case ModelKind::kTree: {
      const auto sub = Project(x, Positions(r, r.tree.feature_names));
      p.margin = p.probability = r.tree.Score(sub);
      break;
    }
    case ModelKind::kRuleFit: {
      const auto sub = Project(x, Positions(r, r.rulefit.feature_names));
      p.margin = r.rulefit.Margin(sub);
      p.probability = gbdt::Sigmoid(p.margin);
      break;
    }
  }
  p.cls = p.probability >= 0.5 ? 1 : 0;
  return p;
}

ordered_json PredictionJson(ModelKind kind, const Instance& inst,
                            const Prediction& p) {
  ordered_json out;
  out["model"] = ModelName(kind);
  out["instance_id"] = inst.id ? ordered_json(*inst.id) : ordered_json(nullptr);
  out["class"] = p.cls;
  out["probability"] = p.probability;
  out["margin"] = p.margin;
  out["out_of_distribution"] = !inst.ood_features.empty();
  out["ood_features"] = inst.ood_features;
  return out;
}

std::vector<std::string> ParseMethods(const json& body) {
  if (!body.contains("methods")) return {"shap"};
  const json& m = body.at("methods");
  if (!m.is_array() || m.empty()) {
    throw HttpError(400, "validation_error", "methods must be a non-empty list",
                    "methods");
  }
  std::vector<std::string> out;
  for (const auto& v : m) {
    const std::string name = v.is_string() ? v.get<std::string>() : "";
    if (name != "shap" && name != "lime" && name != "path" && name != "rules") {
      throw HttpError(400, "validation_error", "unknown method " + v.dump(),
                      "methods");
    }
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

}  // namespace

void SaveRegistry(ModelRegistry& registry, const fs::path& dir) {
  const std::string complex = gbdt::ModelToJson(registry.complex).dump();
  const std::string tree = surrogate::CartToJson(registry.tree).dump();
  const std::string rulefit = surrogate::RuleFitToJson(registry.rulefit).dump();
  WriteFile(dir / kComplexModelFile, complex);
  WriteFile(dir / kTreeModelFile, tree);
  WriteFile(dir / kRuleFitModelFile, rulefit);
  WriteFile(dir / kRegistryFile, RegistryDocument(registry).dump());
  registry.model_hashes = {{"complex", Sha256Hex(complex)},
                           {"tree", Sha256Hex(tree)},
                           {"rulefit", Sha256Hex(rulefit)}};
}

ModelRegistry LoadRegistry(const fs::path& dir) {
  std::vector<std::string> missing;
  for (const char* rel :
       {kRegistryFile, kComplexModelFile, kTreeModelFile, kRuleFitModelFile}) {
    if (!fs::is_regular_file(dir / rel)) missing.push_back((dir / rel).string());
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts:";
    for (const auto& m : missing) msg += " " + m;
    throw Error(ErrorKind::kNotFound, msg);
  }
  ModelRegistry r;
  auto parse = [](const std::string& bytes, const fs::path& path) {
    try {
      return json::parse(bytes);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kModelIntegrity,
                  path.string() + " is not valid JSON: " + e.what());
    }
  };
  ParseRegistryDocument(parse(ReadFile(dir / kRegistryFile), dir / kRegistryFile), r);
  const std::string complex = ReadFile(dir / kComplexModelFile);
  const std::string tree = ReadFile(dir / kTreeModelFile);
  const std::string rulefit = ReadFile(dir / kRuleFitModelFile);
  r.complex = gbdt::ModelFromJson(parse(complex, dir / kComplexModelFile));
  r.tree = surrogate::CartFromJson(parse(tree, dir / kTreeModelFile));
  r.rulefit = surrogate::RuleFitFromJson(parse(rulefit, dir / kRuleFitModelFile));
  r.model_hashes = {{"complex", Sha256Hex(complex)},
                    {"tree", Sha256Hex(tree)},
                    {"rulefit", Sha256Hex(rulefit)}};
  if (r.complex.feature_names != r.dataset.FeatureNames()) {
    throw Error(ErrorKind::kModelIntegrity,
                "complex model features do not match the registry schema");
  }
  for (const auto* names : {&r.tree.feature_names, &r.rulefit.feature_names}) {
    for (const auto& n : *names) r.dataset.FeatureIndex(n);
  }
  return r;
}

std::string RegistryDigest(const ModelRegistry& registry) {
  std::string bytes = RegistryDocument(registry).dump();
  bytes += gbdt::ModelToJson(registry.complex).dump();
  bytes += surrogate::CartToJson(registry.tree).dump();
  bytes += surrogate::RuleFitToJson(registry.rulefit).dump();
  return Sha256Hex(bytes);
}

ApiHandler::ApiHandler(std::shared_ptr<const ModelRegistry> registry)
    : registry_(std::move(registry)) {}

Response ApiHandler::Health() const {
  return Guard([&] {
    ordered_json out;
    out["status"] = "ok";
    out["version"] = registry_->version;
    out["reference_seed"] = registry_->reference_seed;
    out["models"] = registry_->model_hashes;
    return JsonResponse(200, out);
  });
}

Response ApiHandler::Schema() const {
  return Guard([&] {
    const ModelRegistry& r = *registry_;
    ordered_json features = ordered_json::array();
    for (size_t j = 0; j < r.dataset.schema.size(); ++j) {
      const data::FeatureSchema& f = r.dataset.schema[j];
      ordered_json e;
      e["name"] = f.name;
      e["kind"] = f.is_categorical() ? "categorical" : "numeric";
      e["unit"] = f.unit;
      if (f.is_categorical()) {
        e["categories"] = f.categories;
        std::vector<std::string> seen;
        for (const auto& [label, code] : r.dataset.encoding.at(f.name)) {
          seen.push_back(label);
        }
        e["training_categories"] = seen;
      } else {
        e["valid_range"] = {f.min_value, f.max_value};
        e["training_range"] = {r.stats[j].min, r.stats[j].max};
      }
      features.push_back(std::move(e));
    }
    ordered_json out;
    out["features"] = std::move(features);
    out["target"] = {{"name", data::kTargetColumn},
                     {"classes", {"low", "high"}}};
    out["models"] = {"complex", "tree", "rulefit"};
    out["tree_features"] = r.tree.feature_names;
    out["rulefit_features"] = r.rulefit.feature_names;
    return JsonResponse(200, out);
  });
}

Response ApiHandler::Instances(const std::optional<std::string>& limit) const {
  return Guard([&] {
    const ModelRegistry& r = *registry_;
    size_t n = r.dataset.num_rows();
    if (limit) {
      long value = 0;
      const auto* end = limit->data() + limit->size();
      const auto [ptr, ec] = std::from_chars(limit->data(), end, value);
      if (ec != std::errc() || ptr != end || value <= 0) {
        throw HttpError(400, "validation_error", "limit must be a positive integer",
                        "limit");
      }
      n = std::min(n, static_cast<size_t>(value));
    }
    std::vector<bool> in_train(r.dataset.num_rows(), false);
    for (int id : r.train_idx) in_train[id] = true;
    ordered_json rows = ordered_json::array();
    for (size_t i = 0; i < n; ++i) {
      ordered_json values;
      for (size_t j = 0; j < r.dataset.schema.size(); ++j) {
        if (r.dataset.schema[j].is_categorical()) {
          values[r.dataset.schema[j].name] = r.dataset.labels[i][j];
        } else {
          values[r.dataset.schema[j].name] = r.dataset.rows[i][j];
        }
      }
      ordered_json row;
      row["id"] = i;
      row["values"] = std::move(values);
      row["label"] = r.dataset.Labels()[i];
      row["split"] = in_train[i] ? "train" : "test";
      rows.push_back(std::move(row));
    }
    ordered_json out;
    out["total"] = r.dataset.num_rows();
    out["instances"] = std::move(rows);
    return JsonResponse(200, out);
  });
}

Response ApiHandler::Predict(const std::string& body) const {
  return Guard([&] {
    const json req = ParseBody(body);
    const ModelKind kind = ParseModel(req);
    const Instance inst = ParseInstance(*registry_, req);
    return JsonResponse(200, PredictionJson(kind, inst,
                                            PredictWith(*registry_, kind, inst.x)));
  });
}

Response ApiHandler::Explain(const std::string& body) const {
  return Guard([&] {
    const ModelRegistry& r = *registry_;
    const json req = ParseBody(body);
    const ModelKind kind = ParseModel(req);
    const std::vector<std::string> methods = ParseMethods(req);
    for (const auto& m : methods) {
      if (m == "path" && kind != ModelKind::kTree) {
        throw HttpError(400, "validation_error",
                        "path is only available for the tree model", "methods");
      }
      if (m == "rules" && kind != ModelKind::kRuleFit) {
        throw HttpError(400, "validation_error",
                        "rules are only available for the rulefit model", "methods");
      }
      if (m == "shap" && kind == ModelKind::kRuleFit) {
        throw HttpError(400, "validation_error",
                        "shap is not available for the rulefit model", "methods");
      }
    }
    posthoc::LimeConfig lime = r.lime;
    if (req.contains("lime_seed")) {
      if (!req.at("lime_seed").is_number_unsigned()) {
        throw HttpError(400, "validation_error",
                        "lime_seed must be a non-negative integer", "lime_seed");
      }
      lime.seed = req.at("lime_seed").get<uint64_t>();
    }
    const Instance inst = ParseInstance(r, req);
    const Prediction pred = PredictWith(r, kind, inst.x);
    ordered_json out = PredictionJson(kind, inst, pred);

    std::vector<int> pos;
    std::vector<std::string> names;
    switch (kind) {
      case ModelKind::kComplex: names = r.complex.feature_names; break;
      case ModelKind::kTree: names = r.tree.feature_names; break;
      case ModelKind::kRuleFit: names = r.rulefit.feature_names; break;
    }
    pos = Positions(r, names);
    const std::vector<double> sub = Project(inst.x, pos);

    for (const auto& m : methods) {
      if (m == "shap") {
        const TreeEnsemble tree_ensemble =
            kind == ModelKind::kTree ? r.tree.AsEnsemble() : TreeEnsemble{};
        const TreeEnsemble& ensemble =
            kind == ModelKind::kTree ? tree_ensemble : r.complex.ensemble;
        const shap::ShapExplanation s =
            shap::TreeShap(ensemble, sub, static_cast<int>(sub.size()));
        ordered_json phi = ordered_json::array();
        for (size_t k = 0; k < sub.size(); ++k) {
          ordered_json e;
          e["feature"] = names[k];
          e["value"] = inst.shown[pos[k]];
          e["phi"] = s.phi[k];
          phi.push_back(std::move(e));
        }
        ordered_json block;
        block["base_value"] = s.base_value;
        block["margin"] = s.output_margin;
        block["phi"] = std::move(phi);
        out["shap"] = std::move(block);
      } else if (m == "lime") {
        std::vector<data::FeatureStats> stats;
        for (int p : pos) stats.push_back(r.stats[p]);
        posthoc::Predictor predict;
        if (kind == ModelKind::kComplex) {
          predict = posthoc::ProbabilityOf(r.complex);
        } else if (kind == ModelKind::kTree) {
          predict = [&r](std::span<const double> x) { return r.tree.Score(x); };
        } else {
          predict = [&r](std::span<const double> x) { return r.rulefit.PredictProba(x); };
        }
        const posthoc::LimeExplanation e =
            posthoc::LimeExplain(predict, sub, stats, lime);
        ordered_json weights = ordered_json::array();
        for (size_t k = 0; k < sub.size(); ++k) {
          weights.push_back({{"feature", names[k]}, {"weight", e.weights[k]}});
        }
        ordered_json block;
        block["seed"] = e.seed;
        block["n_samples"] = e.n_samples;
        block["kernel_width"] = e.kernel_width;
        block["intercept"] = e.intercept;
        block["local_fit_r2"] = e.local_fit_r2;
        block["local_prediction"] = e.local_prediction;
        block["weights"] = std::move(weights);
        out["lime"] = std::move(block);
      } else if (m == "path") {
        const surrogate::DecisionPath path = surrogate::DecisionPathOf(r.tree, sub);
        ordered_json steps = ordered_json::array();
        for (const auto& step : path.steps) {
          ordered_json e;
          e["feature"] = step.condition.name;
          e["op"] = "<=";
          e["threshold"] = step.condition.threshold;
          e["value"] = step.value;
          e["satisfied"] = step.satisfied;
          steps.push_back(std::move(e));
        }
        ordered_json block;
        block["steps"] = std::move(steps);
        block["leaf_counts"] = {path.leaf_counts[0], path.leaf_counts[1]};
        block["class"] = path.predicted_class;
        block["score"] = path.score;
        out["path"] = std::move(block);
      } else if (m == "rules") {
        ordered_json active = ordered_json::array();
        for (const auto& rule : r.rulefit.rules) {
          if (rule.coefficient == 0.0 || !rule.Matches(sub)) continue;
          ordered_json e;
          e["rule"] = rule.ToString();
          e["coefficient"] = rule.coefficient;
          e["support"] = rule.support;
          e["importance"] = rule.importance;
          active.push_back(std::move(e));
        }
        ordered_json linear = ordered_json::array();
        for (const auto& t : r.rulefit.linear_terms) {
          if (t.coefficient == 0.0) continue;
          linear.push_back({{"feature", t.name},
                            {"coefficient", t.coefficient},
                            {"contribution", t.coefficient * t.Transform(sub[t.feature])}});
        }
        ordered_json block;
        block["intercept"] = r.rulefit.intercept;
        block["active_rules"] = std::move(active);
        block["linear_terms"] = std::move(linear);
        out["rules"] = std::move(block);
      }
    }
    return JsonResponse(200, out);
  });
}

struct HttpServer::Impl {
  explicit Impl(std::shared_ptr<const ModelRegistry> registry)
      : handler(std::move(registry)) {}
  ApiHandler handler;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<const ModelRegistry> registry)
    : impl_(std::make_unique<Impl>(std::move(registry))) {
  httplib::Server& s = impl_->server;
  const ApiHandler& h = impl_->handler;
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  // No SO_REUSEPORT: a second server on a taken port must fail to bind.
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
               sizeof(yes));
  });
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type"}});
  s.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  s.Get("/api/v1/health", [&h, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, h.Health());
  });
  s.Get("/api/v1/schema", [&h, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, h.Schema());
  });
  s.Get("/api/v1/instances",
        [&h, reply](const httplib::Request& req, httplib::Response& res) {
          std::optional<std::string> limit;
          if (req.has_param("limit")) limit = req.get_param_value("limit");
          reply(res, h.Instances(limit));
        });
  s.Post("/api/v1/predict",
         [&h, reply](const httplib::Request& req, httplib::Response& res) {
           reply(res, h.Predict(req.body));
         });
  s.Post("/api/v1/explain",
         [&h, reply](const httplib::Request& req, httplib::Response& res) {
           reply(res, h.Explain(req.body));
         });
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) {
    throw Error(ErrorKind::kConfig, "invalid port " + std::to_string(port), "port");
  }
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw Error(ErrorKind::kConfig,
                "cannot bind " + host + ":" + std::to_string(port), "port");
  }
  return bound;
}

void HttpServer::Listen() { impl_->server.listen_after_bind(); }

void HttpServer::Stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace isar::service
