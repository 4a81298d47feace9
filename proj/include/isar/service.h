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

// HTTP JSON API over a read-only registry of trained models.

#ifndef ISAR_SERVICE_H_
#define ISAR_SERVICE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isar/data.h"
#include "isar/gbdt.h"
#include "isar/posthoc.h"
#include "isar/surrogate.h"
#include "json.hpp"

namespace isar::service {

inline constexpr char kRegistryFormat[] = "isar-registry/1";
inline constexpr char kComplexModelFile[] = "models/complex_model.json";
inline constexpr char kTreeModelFile[] = "models/tree_model.json";
inline constexpr char kRuleFitModelFile[] = "models/rulefit_model.json";
inline constexpr char kRegistryFile[] = "registry.json";

struct ModelRegistry {
  std::string version;
  gbdt::GbdtModel complex;
  surrogate::CartModel tree;
  surrogate::RuleFitModel rulefit;
  // Modeling features only, encoded and labelled.
  data::Dataset dataset;
  std::vector<int> train_idx;
  // Training statistics in dataset feature order.
  std::vector<data::FeatureStats> stats;
  posthoc::LimeConfig lime;
  uint64_t reference_seed = 0;
  // Model name -> SHA-256 of its serialized file.
  std::map<std::string, std::string> model_hashes;
};

// Writes the three model files and registry.json under dir, filling
// model_hashes.
void SaveRegistry(ModelRegistry& registry, const std::filesystem::path& dir);
// Throws kNotFound listing every missing artifact path.
ModelRegistry LoadRegistry(const std::filesystem::path& dir);
// Digest over the registry's serialized state.
std::string RegistryDigest(const ModelRegistry& registry);

struct Response {
  int status = 200;
  std::string body;
};

// Request handling without a socket; the HTTP server delegates here.
class ApiHandler {
 public:
  explicit ApiHandler(std::shared_ptr<const ModelRegistry> registry);

  Response Health() const;
  Response Schema() const;
  Response Instances(const std::optional<std::string>& limit) const;
  Response Predict(const std::string& body) const;
  Response Explain(const std::string& body) const;

 private:
  std::shared_ptr<const ModelRegistry> registry_;
};

class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const ModelRegistry> registry);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws kConfig when
  // the port is invalid or cannot be bound.
  int Bind(const std::string& host, int port);
  // Blocks until Stop().
  void Listen();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace isar::service

#endif  // ISAR_SERVICE_H_
