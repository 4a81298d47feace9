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

#ifndef ISAR_PIPELINE_H_
#define ISAR_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isar/data.h"
#include "isar/gbdt.h"
#include "isar/posthoc.h"
#include "isar/protocol.h"
#include "isar/service.h"
#include "isar/surrogate.h"
#include "json.hpp"

namespace isar::pipeline {

inline constexpr char kToolVersion[] = "0.3.0";
inline constexpr char kReportFormat[] = "isar-report/1";
inline constexpr char kReportFile[] = "report.json";
inline constexpr char kReportHashFile[] = "report.sha256";

struct SynthConfig {
  uint64_t seed = 1;
  int n = 200;
  double noise_sd = 0.5;
};

struct RunConfig {
  // Empty selects the synthetic generator.
  std::string dataset_path;
  SynthConfig synth;
  double correlation_threshold = data::kDefaultCorrelationThreshold;
  // Empty selects gbdt::DefaultGrid().
  std::vector<gbdt::Hyperparams> grid;
  gbdt::ProtocolOptions protocol;
  int top_k = 3;
  surrogate::CartConfig cart;
  surrogate::RuleFitConfig rulefit;
  posthoc::LimeConfig lime;
  int pdp_grid_points = posthoc::kDefaultGridPoints;
  int polynomial_degree = 3;
  // Row id for the local report; -1 picks the first test row of the
  // reference split.
  int explain_row = -1;
  std::string output_dir = "isar_out";

  // Throws kConfig naming the offending key.
  void Validate() const;
};

nlohmann::ordered_json ConfigToJson(const RunConfig& config);

struct PipelineResult {
  nlohmann::ordered_json report;
  service::ModelRegistry registry;
};

// Runs every stage in order. Errors keep their kind and carry a
// "[stage] " prefix.
PipelineResult RunPipeline(const RunConfig& config);

// Writes report.json, report.sha256, registry.json and models/ under dir.
// Files are staged first; nothing is left behind on failure.
void WriteOutputs(PipelineResult& result, const std::filesystem::path& dir);

// SHA-256 of the compact dump with generated_at removed.
std::string CanonicalReportHash(const nlohmann::ordered_json& report);

nlohmann::ordered_json LoadReport(const std::filesystem::path& path);

enum class RenderFormat { kJson, kText, kHtmlStatic };
RenderFormat ParseRenderFormat(const std::string& name);
std::string RenderReport(const nlohmann::ordered_json& report,
                         RenderFormat format);

}  // namespace isar::pipeline

#endif  // ISAR_PIPELINE_H_
