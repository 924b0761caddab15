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

// Run and cluster configuration, read from JSON or a flat TOML subset.
//
// TOML subset: `key = value` lines, `[section]` headers one level deep,
// `#` comments, values that are quoted strings, integers (underscores
// allowed), floats, booleans, or one-line arrays of those.

#ifndef MESHPLAN_CONFIG_H_
#define MESHPLAN_CONFIG_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "meshplan/cost_model.h"
#include "meshplan/graph.h"
#include "meshplan/inter_op.h"
#include "meshplan/mesh.h"

namespace meshplan {

absl::StatusOr<nlohmann::json> ParseTomlSubset(std::string_view text);

// JSON when the first non-blank character is '{', TOML otherwise.
absl::StatusOr<nlohmann::json> ParseConfigText(std::string_view text);
absl::StatusOr<nlohmann::json> LoadConfigFile(const std::string& path);

// Cluster keys, either at top level or under "cluster": num_hosts (hosts),
// devices_per_host, intra_host_bandwidth (intra_bw), inter_host_bandwidth
// (inter_bw), alpha_latency (alpha), device_flops, device_memory. Unknown
// keys are errors.
absl::StatusOr<ClusterMesh> ClusterFromJson(const nlohmann::json& doc);

// all_reduce_factor, all_gather_factor, all_to_all_factor,
// reduce_scatter_factor, alpha.
absl::StatusOr<CostConstants> CostConstantsFromJson(const nlohmann::json& doc);

struct RunConfig {
  std::optional<std::string> graph_path;
  // "mlp:layers=4,batch=8,hidden=64,backward=0",
  // "transformer:blocks=2,batch=2,seq=16,hidden=64,heads=4,backward=0",
  // "random:layers=4,width=3".
  std::optional<std::string> builder;
  ClusterMesh cluster;
  CostConstants cost;
  std::vector<int> b_list = {1};
  int layers = 0;
  double delta = 0.1;
  double epsilon = 1e-6;
  Schedule schedule = Schedule::k1F1B;
  std::string out;
  uint64_t seed = 0;
  int workers = 1;

  absl::Status Validate() const;
  PlanOptions ToPlanOptions(int num_microbatches) const;
};

// Applies run keys (graph, builder, b, layers, delta, epsilon, schedule,
// out, seed, workers, cluster, cost) from a config document onto `config`.
absl::Status ApplyConfig(const nlohmann::json& doc, RunConfig& config);

// "4" or "1,2,4,8".
absl::StatusOr<std::vector<int>> ParseIntList(std::string_view text);

absl::StatusOr<OpGraph> BuildFromSpec(std::string_view spec, uint64_t seed);

// Exactly one of graph_path / builder must be set.
absl::StatusOr<OpGraph> LoadGraph(const RunConfig& config);

absl::StatusOr<std::string> ReadFile(const std::string& path);
absl::Status WriteFile(const std::string& path, std::string_view contents);

}  // namespace meshplan

#endif  // MESHPLAN_CONFIG_H_
