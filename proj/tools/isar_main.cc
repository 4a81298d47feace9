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

// isar command-line tool: generate, run, explain, serve, render.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include "CLI11.hpp"
#include "isar/error.h"
#include "isar/pipeline.h"
#include "isar/service.h"
#include "json.hpp"

namespace {

using isar::Error;
using isar::ErrorKind;
namespace pipeline = isar::pipeline;
namespace service = isar::service;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kTraining:
    case ErrorKind::kNumeric:
    case ErrorKind::kMetric:
      return kExitTraining;
    default:
      return kExitData;
  }
}

struct GridFlags {
  std::vector<int> num_trees = {50, 100, 200};
  std::vector<int> max_leaves = {4, 8, 16};
  std::vector<double> learning_rate = {0.05, 0.1};
  std::vector<int> min_rows_per_leaf = {2, 5};
  int max_depth = 6;
  bool set = false;
};

std::vector<isar::gbdt::Hyperparams> ExpandGrid(const GridFlags& g) {
  std::vector<isar::gbdt::Hyperparams> grid;
  for (int t : g.num_trees) {
    for (int l : g.max_leaves) {
      for (double lr : g.learning_rate) {
        for (int m : g.min_rows_per_leaf) {
          isar::gbdt::Hyperparams h;
          h.num_trees = t;
          h.max_leaves = l;
          h.learning_rate = lr;
          h.min_rows_per_leaf = m;
          h.max_depth = g.max_depth;
          grid.push_back(h);
        }
      }
    }
  }
  return grid;
}

uint64_t SeedOffset() {
  const char* env = std::getenv("ISAR_SEED_OFFSET");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') {
    throw Error(ErrorKind::kConfig, "ISAR_SEED_OFFSET must be a non-negative integer",
                "ISAR_SEED_OFFSET");
  }
  return v;
}

void WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::kData, "cannot write " + path);
}

// Blocks SIGINT/SIGTERM and stops the server when one arrives.
void ServeUntilSignal(service::HttpServer& server) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&server, set] {
    int sig = 0;
    sigwait(&set, &sig);
    server.Stop();
  });
  server.Listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable structure-activity modeling for nanopriming data"};
  app.set_config("--config", "", "Key-value configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  pipeline::RunConfig cfg;
  GridFlags grid;
  std::vector<uint64_t> seeds = cfg.protocol.seeds;
  std::string model_dir = "isar_out";
  std::string host = "127.0.0.1";
  int port = 8080;

  app.add_option("--dataset", cfg.dataset_path, "CSV dataset; synthetic data when empty");
  app.add_option("--synth_seed", cfg.synth.seed, "Synthetic generator seed")
      ->capture_default_str();
  app.add_option("--synth_n", cfg.synth.n, "Synthetic row count")->capture_default_str();
  app.add_option("--synth_noise_sd", cfg.synth.noise_sd, "Synthetic latent noise")
      ->capture_default_str();
  app.add_option("--correlation_threshold", cfg.correlation_threshold,
                 "Prune one of each feature pair with |r| at or above this")
      ->capture_default_str();
  auto* g1 = app.add_option("--grid_num_trees", grid.num_trees)->capture_default_str();
  auto* g2 = app.add_option("--grid_max_leaves", grid.max_leaves)->capture_default_str();
  auto* g3 =
      app.add_option("--grid_learning_rate", grid.learning_rate)->capture_default_str();
  auto* g4 = app.add_option("--grid_min_rows_per_leaf", grid.min_rows_per_leaf)
                 ->capture_default_str();
  auto* g5 = app.add_option("--grid_max_depth", grid.max_depth)->capture_default_str();
  app.add_option("--seeds", seeds, "Split seeds")->capture_default_str();
  app.add_option("--test_fraction", cfg.protocol.test_fraction)->capture_default_str();
  app.add_option("--cv_folds", cfg.protocol.cv_folds)->capture_default_str();
  app.add_option("--permutation_repeats", cfg.protocol.permutation_repeats)
      ->capture_default_str();
  app.add_option("--top_k", cfg.top_k, "Features kept for the surrogates")
      ->capture_default_str();
  app.add_option("--cart_max_depth", cfg.cart.max_depth)->capture_default_str();
  app.add_option("--cart_min_leaf", cfg.cart.min_leaf)->capture_default_str();
  app.add_option("--rulefit_n_trees", cfg.rulefit.n_trees)->capture_default_str();
  app.add_option("--rulefit_rule_depth", cfg.rulefit.rule_depth)->capture_default_str();
  app.add_option("--rulefit_path_length", cfg.rulefit.path_length)->capture_default_str();
  app.add_option("--rulefit_path_min_ratio", cfg.rulefit.path_min_ratio)
      ->capture_default_str();
  app.add_option("--rulefit_cv_folds", cfg.rulefit.cv_folds)->capture_default_str();
  app.add_option("--rulefit_seed", cfg.rulefit.seed)->capture_default_str();
  app.add_option("--lime_samples", cfg.lime.n_samples)->capture_default_str();
  app.add_option("--lime_kernel_width", cfg.lime.kernel_width, "0 picks 0.75*sqrt(d)")
      ->capture_default_str();
  app.add_option("--lime_top_k", cfg.lime.top_k)->capture_default_str();
  auto* lime_seed = app.add_option("--lime_seed", cfg.lime.seed)->capture_default_str();
  app.add_option("--pdp_grid_points", cfg.pdp_grid_points)->capture_default_str();
  app.add_option("--polynomial_degree", cfg.polynomial_degree)->capture_default_str();
  app.add_option("--explain_row", cfg.explain_row,
                 "Row for the local report; -1 picks the first test row")
      ->capture_default_str();
  app.add_option("-o,--output_dir", cfg.output_dir, "Run output directory")
      ->capture_default_str();
  app.add_option("--model_dir", model_dir, "Artifacts for serve and explain")
      ->envname("ISAR_MODEL_DIR")
      ->capture_default_str();
  app.add_option("--host", host)->capture_default_str();
  app.add_option("--port", port)->envname("ISAR_PORT")->capture_default_str();

  auto* generate = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  std::string csv_out = "-";
  generate->add_option("--out", csv_out, "CSV path, - for stdout");

  auto* run = app.add_subcommand("run", "Run the full pipeline");

  auto* explain = app.add_subcommand("explain", "Explain one instance from saved models");
  std::string model_name = "complex";
  std::vector<std::string> methods = {"shap"};
  std::optional<int> instance_id;
  std::string instance_json;
  explain->add_option("--model", model_name, "complex, tree or rulefit")
      ->capture_default_str();
  explain->add_option("--methods", methods, "shap, lime, path, rules")
      ->capture_default_str();
  auto* by_id = explain->add_option("--instance_id", instance_id, "Dataset row id");
  auto* by_map =
      explain->add_option("--instance", instance_json, "Feature map as a JSON object");
  by_id->excludes(by_map);

  auto* serve = app.add_subcommand("serve", "Serve saved models over HTTP");

  auto* render = app.add_subcommand("render", "Render a saved report");
  std::string report_path;
  std::string format = "text";
  std::string render_out = "-";
  render->add_option("--report", report_path, "report.json")->required();
  render->add_option("--format", format, "json, text or html-static")
      ->capture_default_str();
  render->add_option("--out", render_out, "Output path, - for stdout");

  for (auto* sub : {generate, run, explain, serve, render}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  grid.set = g1->count() + g2->count() + g3->count() + g4->count() + g5->count() > 0;

  try {
    const uint64_t offset = SeedOffset();
    cfg.protocol.seeds.clear();
    for (uint64_t s : seeds) cfg.protocol.seeds.push_back(s + offset);
    cfg.synth.seed += offset;
    if (grid.set) cfg.grid = ExpandGrid(grid);

    if (*generate) {
      cfg.Validate();
      isar::data::SynthRecipe recipe;
      recipe.noise_sd = cfg.synth.noise_sd;
      const isar::data::Dataset d =
          isar::data::SynthGenerate(cfg.synth.seed, cfg.synth.n, recipe);
      std::ostringstream csv;
      isar::data::WriteCsv(d, csv);
      WriteText(csv_out, csv.str());
    } else if (*run) {
      pipeline::PipelineResult result = pipeline::RunPipeline(cfg);
      pipeline::WriteOutputs(result, cfg.output_dir);
      const auto& agg = result.report.at("aggregate");
      std::cout << "report: "
                << (std::filesystem::path(cfg.output_dir) / pipeline::kReportFile).string()
                << "\ncanonical sha256: " << pipeline::CanonicalReportHash(result.report)
                << "\nreference split: " << result.registry.reference_seed
                << "\nmean test auroc: " << agg.at("test").at("auroc").get<double>()
                << "\n";
    } else if (*explain) {
      nlohmann::json request;
      request["model"] = model_name;
      request["methods"] = methods;
      if (instance_id) {
        request["instance_id"] = *instance_id;
      } else if (!instance_json.empty()) {
        try {
          request["instance"] = nlohmann::json::parse(instance_json);
        } catch (const nlohmann::json::parse_error& e) {
          throw Error(ErrorKind::kConfig, std::string("--instance: ") + e.what(),
                      "instance");
        }
      } else {
        throw Error(ErrorKind::kConfig, "give --instance_id or --instance", "instance");
      }
      if (lime_seed->count() > 0) request["lime_seed"] = cfg.lime.seed;
      auto registry =
          std::make_shared<const service::ModelRegistry>(service::LoadRegistry(model_dir));
      const service::Response r = service::ApiHandler(registry).Explain(request.dump());
      if (r.status != 200) {
        std::cerr << r.body << "\n";
        return r.status == 404 ? kExitData : kExitConfig;
      }
      std::cout << nlohmann::ordered_json::parse(r.body).dump(2) << "\n";
    } else if (*serve) {
      auto registry =
          std::make_shared<const service::ModelRegistry>(service::LoadRegistry(model_dir));
      service::HttpServer server(registry);
      const int bound = server.Bind(host, port);
      std::cout << "listening on http://" << host << ":" << bound << "/api/v1\n"
                << std::flush;
      ServeUntilSignal(server);
    } else if (*render) {
      const auto report = pipeline::LoadReport(report_path);
      WriteText(render_out,
                pipeline::RenderReport(report, pipeline::ParseRenderFormat(format)));
    }
  } catch (const Error& e) {
    std::cerr << "isar: " << isar::ErrorKindName(e.kind()) << ": " << e.what();
    if (!e.field().empty()) std::cerr << " (field " << e.field() << ")";
    std::cerr << "\n";
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "isar: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
