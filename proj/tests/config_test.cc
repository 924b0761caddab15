/* Copyright 2026 The Meshplan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cstdio>
#include <filesystem>
#include <string>

#include "gtest/gtest.h"
#include "meshplan/config.h"
#include "meshplan/graph_json.h"

namespace meshplan {
namespace {

using nlohmann::json;

TEST(TomlTest, SectionsCommentsArrays) {
  auto doc = ParseTomlSubset(R"(# run
b = [1, 2, 4]
schedule = "gpipe"   # trailing
label = "a # not a comment"
delta = 0.25
seed = 1_000
on = true

[cluster]
hosts = 2
devices_per_host = 4
intra_bw = 1.5e11
)");
  ASSERT_TRUE(doc.ok()) << doc.status();
  EXPECT_EQ((*doc)["b"], json::array({1, 2, 4}));
  EXPECT_EQ((*doc)["schedule"], "gpipe");
  EXPECT_EQ((*doc)["label"], "a # not a comment");
  EXPECT_DOUBLE_EQ((*doc)["delta"].get<double>(), 0.25);
  EXPECT_EQ((*doc)["seed"], 1000);
  EXPECT_EQ((*doc)["on"], true);
  EXPECT_EQ((*doc)["cluster"]["hosts"], 2);
  EXPECT_DOUBLE_EQ((*doc)["cluster"]["intra_bw"].get<double>(), 1.5e11);
}

TEST(TomlTest, Errors) {
  for (const char* text :
       {"a = 1\na = 2", "[x\n", "[x]\n[x]\n", "justakey", " = 3",
        "a = [1, 2", "a = \"open", "a = what"}) {
    auto doc = ParseTomlSubset(text);
    EXPECT_EQ(doc.status().code(), absl::StatusCode::kInvalidArgument) << text;
  }
  EXPECT_NE(ParseTomlSubset("a = 1\n\nb = ?").status().message().find("line 3"),
            std::string::npos);
}

TEST(ConfigTextTest, JsonOrToml) {
  EXPECT_EQ((*ParseConfigText("  {\"b\": 3}"))["b"], 3);
  EXPECT_EQ((*ParseConfigText("b = 3"))["b"], 3);
  EXPECT_FALSE(ParseConfigText("{\"b\": ").ok());
}

TEST(ClusterConfigTest, KeysAndAliases) {
  auto c = ClusterFromJson(json{{"cluster",
                                 {{"hosts", 2},
                                  {"devices_per_host", 8},
                                  {"intra_bw", 1e11},
                                  {"inter_bw", 1e10},
                                  {"alpha", 2e-6},
                                  {"device_flops", 1e12},
                                  {"device_memory", 1 << 20}}}});
  ASSERT_TRUE(c.ok()) << c.status();
  EXPECT_EQ(c->num_hosts, 2);
  EXPECT_EQ(c->devices_per_host, 8);
  EXPECT_EQ(c->intra_host_bandwidth, 1e11);
  EXPECT_EQ(c->inter_host_bandwidth, 1e10);
  EXPECT_EQ(c->alpha_latency, 2e-6);
  EXPECT_EQ(c->device_memory, 1 << 20);
}

TEST(ClusterConfigTest, Rejects) {
  EXPECT_FALSE(ClusterFromJson(json{{"gpus", 4}}).ok());
  EXPECT_FALSE(ClusterFromJson(json{{"hosts", 1}, {"num_hosts", 2}}).ok());
  EXPECT_FALSE(ClusterFromJson(json{{"devices_per_host", 3}}).ok());
  EXPECT_FALSE(ClusterFromJson(json{{"hosts", 1.5}}).ok());
  EXPECT_FALSE(ClusterFromJson(json{{"hosts", 0}}).ok());
  EXPECT_FALSE(ClusterFromJson(json{{"intra_bw", "fast"}}).ok());
  EXPECT_FALSE(
      ClusterFromJson(json{{"intra_bw", 1e9}, {"inter_bw", 2e9}}).ok());
  EXPECT_FALSE(ClusterFromJson(json::array()).ok());
}

TEST(CostConfigTest, Factors) {
  auto c = CostConstantsFromJson(
      json{{"all_reduce_factor", 1.5}, {"alpha", 0.0}});
  ASSERT_TRUE(c.ok());
  EXPECT_EQ(c->all_reduce_factor, 1.5);
  EXPECT_FALSE(CostConstantsFromJson(json{{"broadcast_factor", 1}}).ok());
  EXPECT_FALSE(CostConstantsFromJson(json{{"alpha", -1}}).ok());
}

TEST(RunConfigTest, ApplyAndValidate) {
  RunConfig c;
  auto doc = ParseConfigText(R"(builder = "mlp:layers=2"
b = [2, 8]
layers = 2
schedule = "gpipe"
workers = 3
[cost]
all_gather_factor = 2.0
)");
  ASSERT_TRUE(doc.ok());
  ASSERT_TRUE(ApplyConfig(*doc, c).ok());
  EXPECT_EQ(c.b_list, (std::vector<int>{2, 8}));
  EXPECT_EQ(c.schedule, Schedule::kGpipe);
  EXPECT_EQ(c.cost.all_gather_factor, 2.0);
  EXPECT_TRUE(c.Validate().ok());
  const PlanOptions o = c.ToPlanOptions(8);
  EXPECT_EQ(o.num_microbatches, 8);
  EXPECT_EQ(o.num_layers, 2);
  EXPECT_EQ(o.workers, 3);

  RunConfig both = c;
  both.graph_path = "g.json";
  EXPECT_FALSE(both.Validate().ok());
  RunConfig zero_b = c;
  zero_b.b_list = {0};
  EXPECT_FALSE(zero_b.Validate().ok());
  RunConfig unknown;
  EXPECT_FALSE(ApplyConfig(json{{"microbatches", 4}}, unknown).ok());
  EXPECT_FALSE(ApplyConfig(json{{"schedule", "zigzag"}}, unknown).ok());
}

TEST(IntListTest, Parse) {
  EXPECT_EQ(*ParseIntList("4"), std::vector<int>{4});
  EXPECT_EQ(*ParseIntList("1, 2,8"), (std::vector<int>{1, 2, 8}));
  EXPECT_FALSE(ParseIntList("1,,2").ok());
  EXPECT_FALSE(ParseIntList("x").ok());
}

TEST(BuilderSpecTest, Builders) {
  auto mlp = BuildFromSpec("mlp:layers=3,batch=4,hidden=8", 0);
  ASSERT_TRUE(mlp.ok());
  EXPECT_EQ(Serialize(*mlp), Serialize(*BuildMlp(3, 4, 8)));
  auto back = BuildFromSpec("mlp:layers=2,batch=4,hidden=8,backward=1", 0);
  ASSERT_TRUE(back.ok());
  EXPECT_TRUE(back->HasBackward());
  EXPECT_TRUE(BuildFromSpec("transformer:blocks=1,seq=4,hidden=8,heads=2", 0)
                  .ok());
  auto r1 = BuildFromSpec("random:layers=3", 5);
  auto r2 = BuildFromSpec("random:layers=3", 5);
  ASSERT_TRUE(r1.ok() && r2.ok());
  EXPECT_EQ(Serialize(*r1), Serialize(*r2));
  EXPECT_FALSE(BuildFromSpec("conv:layers=2", 0).ok());
  EXPECT_FALSE(BuildFromSpec("mlp:depth=2", 0).ok());
  EXPECT_FALSE(BuildFromSpec("mlp:layers=two", 0).ok());
}

TEST(FilesTest, RoundTripAndMissing) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "meshplan_config_test.toml")
          .string();
  ASSERT_TRUE(WriteFile(path, "hosts = 1\ndevices_per_host = 2\n").ok());
  auto doc = LoadConfigFile(path);
  ASSERT_TRUE(doc.ok());
  EXPECT_EQ(ClusterFromJson(*doc)->devices_per_host, 2);
  std::remove(path.c_str());
  EXPECT_EQ(LoadConfigFile(path).status().code(), absl::StatusCode::kNotFound);

  RunConfig c;
  c.graph_path = path;
  EXPECT_EQ(LoadGraph(c).status().code(), absl::StatusCode::kNotFound);
}

}  // namespace
}  // namespace meshplan
