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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "httplib.h"
#include "isar/error.h"
#include "isar/json_util.h"
#include "isar/pipeline.h"
#include "test_util.h"

namespace isar::service {
namespace {

using json = nlohmann::json;

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("service");
    pipeline::PipelineResult result = pipeline::RunPipeline(testing::SmallRunConfig());
    pipeline::WriteOutputs(result, dir_->path());
    registry_ = std::make_shared<const ModelRegistry>(LoadRegistry(dir_->path()));
  }
  static void TearDownTestSuite() {
    registry_.reset();
    delete dir_;
  }

  static json Body(const Response& r) { return json::parse(r.body); }

  static json RowInstance(int id) {
    json m;
    const data::Dataset& d = registry_->dataset;
    for (size_t j = 0; j < d.num_features(); ++j) {
      if (d.schema[j].is_categorical()) {
        m[d.schema[j].name] = d.labels[id][j];
      } else {
        m[d.schema[j].name] = d.rows[id][j];
      }
    }
    return m;
  }

  static json RandomInstance(std::mt19937_64& rng) {
    json m;
    for (const auto& f : registry_->dataset.schema) {
      if (f.is_categorical()) {
        std::uniform_int_distribution<size_t> pick(0, f.categories.size() - 1);
        m[f.name] = f.categories[pick(rng)];
      } else {
        std::uniform_real_distribution<double> u(f.min_value, f.max_value);
        m[f.name] = u(rng);
      }
    }
    return m;
  }

  static testing::TempDir* dir_;
  static std::shared_ptr<const ModelRegistry> registry_;
};

testing::TempDir* ServiceTest::dir_ = nullptr;
std::shared_ptr<const ModelRegistry> ServiceTest::registry_;

std::string ReadBytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST_F(ServiceTest, HealthReportsVersionAndFileHashes) {
  const Response r = ApiHandler(registry_).Health();
  ASSERT_EQ(r.status, 200);
  const json b = Body(r);
  EXPECT_EQ(b["version"], pipeline::kToolVersion);
  EXPECT_EQ(b["models"]["complex"], Sha256Hex(ReadBytes(dir_->path() / kComplexModelFile)));
  EXPECT_EQ(b["models"]["tree"], Sha256Hex(ReadBytes(dir_->path() / kTreeModelFile)));
  EXPECT_EQ(b["models"]["rulefit"], Sha256Hex(ReadBytes(dir_->path() / kRuleFitModelFile)));
}

TEST_F(ServiceTest, RegistryRoundTripsThroughDisk) {
  testing::TempDir other("service-copy");
  ModelRegistry copy = *registry_;
  SaveRegistry(copy, other.path());
  EXPECT_EQ(copy.model_hashes, registry_->model_hashes);
  const ModelRegistry again = LoadRegistry(other.path());
  EXPECT_EQ(RegistryDigest(again), RegistryDigest(*registry_));
}

TEST(Registry, MissingArtifactsAreListed) {
  testing::TempDir empty("service-empty");
  try {
    LoadRegistry(empty.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("registry.json"), std::string::npos);
    EXPECT_NE(msg.find("complex_model.json"), std::string::npos);
    EXPECT_NE(msg.find("tree_model.json"), std::string::npos);
    EXPECT_NE(msg.find("rulefit_model.json"), std::string::npos);
  }
}

TEST_F(ServiceTest, CorruptModelFileIsRejected) {
  testing::TempDir other("service-corrupt");
  ModelRegistry copy = *registry_;
  SaveRegistry(copy, other.path());
  std::ofstream(other.path() / kTreeModelFile) << "{\"format\": \"isar-cart/1\"}";
  try {
    LoadRegistry(other.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kModelIntegrity);
  }
}

TEST_F(ServiceTest, SchemaListsModelingFeatures) {
  const ApiHandler api(registry_);
  const Response r = api.Schema();
  ASSERT_EQ(r.status, 200);
  const json b = Body(r);
  ASSERT_EQ(b["features"].size(), 7u);
  for (const auto& f : b["features"]) {
    EXPECT_NE(f["name"], "pdi");
    if (f["kind"] == "categorical") {
      const auto& schema =
          registry_->dataset.schema[registry_->dataset.FeatureIndex(f["name"])];
      EXPECT_EQ(f["categories"].get<std::vector<std::string>>(), schema.categories);
    }
  }
  EXPECT_EQ(api.Schema().body, r.body);
}

TEST_F(ServiceTest, InstancesHonourLimit) {
  const ApiHandler api(registry_);
  const json five = Body(api.Instances("5"));
  ASSERT_EQ(five["instances"].size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(five["instances"][i]["id"], i);
  const json all = Body(api.Instances("100000"));
  EXPECT_EQ(all["instances"].size(), registry_->dataset.num_rows());
  EXPECT_EQ(Body(api.Instances(std::nullopt))["instances"].size(),
            registry_->dataset.num_rows());
  for (const char* bad : {"0", "-3", "abc", "2x", ""}) {
    const Response r = api.Instances(std::string(bad));
    EXPECT_EQ(r.status, 400) << bad;
    EXPECT_EQ(Body(r)["field"], "limit");
  }
}

TEST_F(ServiceTest, InstanceIdsRoundTripIntoExplain) {
  const ApiHandler api(registry_);
  for (const auto& row : Body(api.Instances("4"))["instances"]) {
    json req = {{"model", "complex"}, {"instance_id", row["id"]}};
    const Response by_id = api.Explain(req.dump());
    req.erase("instance_id");
    req["instance"] = row["values"];
    const Response by_map = api.Explain(req.dump());
    ASSERT_EQ(by_id.status, 200);
    ASSERT_EQ(by_map.status, 200);
    EXPECT_EQ(Body(by_id)["shap"], Body(by_map)["shap"]);
  }
}

TEST_F(ServiceTest, PredictMatchesInProcessModels) {
  const ApiHandler api(registry_);
  const ModelRegistry& r = *registry_;
  std::vector<int> tree_cols, rf_cols;
  for (const auto& n : r.tree.feature_names) tree_cols.push_back(r.dataset.FeatureIndex(n));
  for (const auto& n : r.rulefit.feature_names) rf_cols.push_back(r.dataset.FeatureIndex(n));
  for (size_t i = 0; i < r.dataset.num_rows(); ++i) {
    const auto& x = r.dataset.rows[i];
    std::vector<double> xt, xr;
    for (int c : tree_cols) xt.push_back(x[c]);
    for (int c : rf_cols) xr.push_back(x[c]);
    const json c = Body(api.Predict(json{{"instance_id", i}}.dump()));
    EXPECT_EQ(c["model"], "complex");
    EXPECT_DOUBLE_EQ(c["probability"], r.complex.PredictProba(x));
    EXPECT_GT(c["probability"].get<double>(), 0.0);
    EXPECT_LT(c["probability"].get<double>(), 1.0);
    EXPECT_EQ(c["class"], c["probability"].get<double>() >= 0.5 ? 1 : 0);
    const json t = Body(api.Predict(json{{"model", "tree"}, {"instance_id", i}}.dump()));
    EXPECT_DOUBLE_EQ(t["probability"], r.tree.Score(xt));
    EXPECT_EQ(t["class"], r.tree.Predict(xt));
    const json f = Body(api.Predict(json{{"model", "rulefit"}, {"instance_id", i}}.dump()));
    EXPECT_DOUBLE_EQ(f["probability"], r.rulefit.PredictProba(xr));
  }
}

TEST_F(ServiceTest, RequestErrorsNameTheField) {
  const ApiHandler api(registry_);
  auto check = [&](const json& req, int status, const std::string& field) {
    const Response r = api.Predict(req.dump());
    EXPECT_EQ(r.status, status) << req.dump();
    const json b = Body(r);
    EXPECT_TRUE(b["code"].is_string());
    EXPECT_TRUE(b["message"].is_string());
    EXPECT_EQ(b["field"], field) << req.dump();
  };
  json pruned = RowInstance(0);
  pruned["pdi"] = 0.3;
  check({{"instance", pruned}}, 400, "pdi");
  json missing = RowInstance(0);
  missing.erase("zeta_potential_mv");
  check({{"instance", missing}}, 400, "zeta_potential_mv");
  json unknown = RowInstance(0);
  unknown["composition"] = "Unobtainium";
  check({{"instance", unknown}}, 400, "composition");
  EXPECT_EQ(Body(api.Predict(json{{"instance", unknown}}.dump()))["code"],
            "unknown_category");
  json out_of_schema = RowInstance(0);
  out_of_schema["zeta_potential_mv"] = 250.0;
  check({{"instance", out_of_schema}}, 400, "zeta_potential_mv");
  json wrong_type = RowInstance(0);
  wrong_type["tem_size_nm"] = "big";
  check({{"instance", wrong_type}}, 400, "tem_size_nm");
  check({{"model", "forest"}, {"instance_id", 0}}, 404, "model");
  check({{"instance_id", 100000}}, 404, "instance_id");
  check({{"instance_id", 0}, {"instance", RowInstance(0)}}, 400, "instance");
  check(json::object(), 400, "instance");
  const Response malformed = api.Predict("{not json");
  EXPECT_EQ(malformed.status, 400);
}

TEST_F(ServiceTest, OutOfDistributionFlagTracksTrainingRange) {
  const ApiHandler api(registry_);
  const ModelRegistry& r = *registry_;
  const int base = r.train_idx.front();
  const json inside = Body(api.Predict(json{{"instance_id", base}}.dump()));
  EXPECT_FALSE(inside["out_of_distribution"]);
  for (size_t j = 0; j < r.dataset.num_features(); ++j) {
    const data::FeatureSchema& f = r.dataset.schema[j];
    if (f.is_categorical()) continue;
    const data::FeatureStats& s = r.stats[j];
    for (double v : {s.min, s.max}) {
      json m = RowInstance(base);
      m[f.name] = v;
      EXPECT_FALSE(Body(api.Predict(json{{"instance", m}}.dump()))["out_of_distribution"]);
    }
    for (double v : {std::nextafter(s.max, f.max_value), std::nextafter(s.min, f.min_value)}) {
      if (v > f.max_value || v < f.min_value) continue;
      json m = RowInstance(base);
      m[f.name] = v;
      const json b = Body(api.Predict(json{{"instance", m}}.dump()));
      EXPECT_TRUE(b["out_of_distribution"]) << f.name;
      EXPECT_EQ(b["ood_features"], json::array({f.name}));
    }
  }
  json high = RowInstance(base);
  high["concentration_mg_l"] = 500.0;
  const Response r500 = api.Predict(json{{"instance", high}}.dump());
  EXPECT_EQ(r500.status, 200);
  EXPECT_TRUE(Body(r500)["out_of_distribution"]);
}

TEST_F(ServiceTest, UnseenSchemaCategoryIsPredictedAndFlagged) {
  ModelRegistry copy = *registry_;
  auto& codes = copy.dataset.encoding.at("composition");
  const std::string dropped = codes.begin()->first;
  const int dropped_code = codes.begin()->second;
  codes.erase(codes.begin());
  const int f = copy.dataset.FeatureIndex("composition");
  copy.stats[f].frequencies.erase(dropped_code);
  const ApiHandler api(std::make_shared<const ModelRegistry>(std::move(copy)));
  json m = RowInstance(registry_->train_idx.front());
  m["composition"] = dropped;
  const Response r = api.Predict(json{{"instance", m}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_TRUE(Body(r)["out_of_distribution"]);
  EXPECT_EQ(Body(r)["ood_features"], json::array({"composition"}));
}

TEST_F(ServiceTest, ShapBlocksAreEfficient) {
  const ApiHandler api(registry_);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const json inst = RandomInstance(rng);
    for (const char* model : {"complex", "tree"}) {
      const Response r =
          api.Explain(json{{"model", model}, {"instance", inst}, {"methods", {"shap"}}}.dump());
      ASSERT_EQ(r.status, 200) << r.body;
      const json b = Body(r);
      double total = b["shap"]["base_value"];
      for (const auto& p : b["shap"]["phi"]) total += p["phi"].get<double>();
      EXPECT_NEAR(total, b["margin"].get<double>(), 1e-6);
      EXPECT_NEAR(b["shap"]["margin"].get<double>(), b["margin"].get<double>(), 1e-12);
    }
  }
}

TEST_F(ServiceTest, ExplainReturnsOnlyRequestedMethods) {
  const ApiHandler api(registry_);
  const json shap_only = Body(api.Explain(
      json{{"model", "tree"}, {"instance_id", 1}, {"methods", {"shap"}}}.dump()));
  EXPECT_TRUE(shap_only.contains("shap"));
  EXPECT_FALSE(shap_only.contains("lime"));
  EXPECT_FALSE(shap_only.contains("path"));
  const json path = Body(api.Explain(
      json{{"model", "tree"}, {"instance_id", 1}, {"methods", {"path", "lime"}}}.dump()));
  EXPECT_TRUE(path.contains("path"));
  EXPECT_TRUE(path.contains("lime"));
  EXPECT_FALSE(path.contains("shap"));
  EXPECT_EQ(path["path"]["class"], path["class"]);
  const json rules = Body(api.Explain(
      json{{"model", "rulefit"}, {"instance_id", 1}, {"methods", {"rules"}}}.dump()));
  ASSERT_TRUE(rules.contains("rules"));
  double margin = rules["rules"]["intercept"];
  for (const auto& r : rules["rules"]["active_rules"]) margin += r["coefficient"].get<double>();
  for (const auto& t : rules["rules"]["linear_terms"]) margin += t["contribution"].get<double>();
  EXPECT_NEAR(margin, rules["margin"].get<double>(), 1e-9);

  for (const json& bad :
       {json{{"model", "complex"}, {"instance_id", 1}, {"methods", {"path"}}},
        json{{"model", "complex"}, {"instance_id", 1}, {"methods", {"rules"}}},
        json{{"model", "rulefit"}, {"instance_id", 1}, {"methods", {"shap"}}},
        json{{"model", "complex"}, {"instance_id", 1}, {"methods", {"anchors"}}},
        json{{"model", "complex"}, {"instance_id", 1}, {"methods", json::array()}}}) {
    const Response r = api.Explain(bad.dump());
    EXPECT_EQ(r.status, 400) << bad.dump();
    EXPECT_EQ(Body(r)["field"], "methods");
  }
}

TEST_F(ServiceTest, LimeSeedMakesResponsesIdentical) {
  const ApiHandler api(registry_);
  const json req = {{"model", "complex"}, {"instance_id", 2}, {"methods", {"lime"}},
                    {"lime_seed", 99}};
  const Response a = api.Explain(req.dump());
  const Response b = api.Explain(req.dump());
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(Body(a)["lime"]["seed"], 99);
  json other = req;
  other["lime_seed"] = 100;
  EXPECT_NE(Body(api.Explain(other.dump()))["lime"], Body(a)["lime"]);
  other["lime_seed"] = -1;
  EXPECT_EQ(api.Explain(other.dump()).status, 400);
}

TEST_F(ServiceTest, RequestsNeverMutateTheRegistry) {
  const std::string before = RegistryDigest(*registry_);
  const ApiHandler api(registry_);
  std::mt19937_64 rng(9);
  std::vector<std::thread> threads;
  std::vector<std::string> bodies(4);
  const json req = {{"model", "complex"}, {"instance", RandomInstance(rng)},
                    {"methods", {"shap", "lime"}}};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 5; ++k) {
        api.Health();
        api.Schema();
        api.Instances("3");
        api.Predict(req.dump());
        bodies[t] = api.Explain(req.dump()).body;
      }
    });
  }
  for (auto& th : threads) th.join();
  for (const auto& b : bodies) EXPECT_EQ(b, bodies[0]);
  EXPECT_EQ(RegistryDigest(*registry_), before);
}

TEST_F(ServiceTest, HttpServerServesTheApi) {
  HttpServer server(registry_);
  const int port = server.Bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.Listen(); });
  httplib::Client client("127.0.0.1", port);
  for (int i = 0; i < 100; ++i) {
    if (client.Get("/api/v1/health")) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  auto health = client.Get("/api/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(health->body, ApiHandler(registry_).Health().body);

  auto instances = client.Get("/api/v1/instances?limit=3");
  ASSERT_TRUE(instances);
  EXPECT_EQ(json::parse(instances->body)["instances"].size(), 3u);
  EXPECT_EQ(client.Get("/api/v1/instances?limit=0")->status, 400);

  const std::string body = json{{"model", "complex"}, {"instance_id", 4}}.dump();
  auto predict = client.Post("/api/v1/predict", body, "application/json");
  ASSERT_TRUE(predict);
  EXPECT_EQ(predict->status, 200);
  EXPECT_DOUBLE_EQ(json::parse(predict->body)["probability"],
                   registry_->complex.PredictProba(registry_->dataset.rows[4]));
  auto unknown = client.Post("/api/v1/predict",
                             json{{"model", "nope"}, {"instance_id", 4}}.dump(),
                             "application/json");
  EXPECT_EQ(unknown->status, 404);
  auto preflight = client.Options("/api/v1/explain");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);

  server.Stop();
  loop.join();
}

TEST_F(ServiceTest, BadPortsFailAtStartup) {
  HttpServer server(registry_);
  for (int port : {-1, 70000}) {
    try {
      server.Bind("127.0.0.1", port);
      FAIL() << port;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig);
      EXPECT_EQ(e.field(), "port");
    }
  }
  HttpServer first(registry_);
  const int taken = first.Bind("127.0.0.1", 0);
  HttpServer second(registry_);
  EXPECT_THROW(second.Bind("127.0.0.1", taken), Error);
}

}  // namespace
}  // namespace isar::service
