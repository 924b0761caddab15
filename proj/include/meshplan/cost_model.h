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

// Analytic cost model: collective and compute time, stage memory.

#ifndef MESHPLAN_COST_MODEL_H_
#define MESHPLAN_COST_MODEL_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/graph.h"
#include "meshplan/mesh.h"
#include "meshplan/seconds.h"
#include "meshplan/sharding.h"

namespace meshplan {

// Ring volume factors: a collective over d devices moves
// factor * (d - 1) / d * bytes through the slowest participating link.
struct CostConstants {
  double all_reduce_factor = 2.0;
  double all_gather_factor = 1.0;
  double all_to_all_factor = 1.0;
  double reduce_scatter_factor = 1.0;
  // Overrides ClusterMesh::alpha_latency when set.
  std::optional<double> alpha;
};

class CostModel {
 public:
  explicit CostModel(ClusterMesh cluster, CostConstants constants = {});

  const ClusterMesh& cluster() const { return cluster_; }
  const CostConstants& constants() const { return constants_; }
  double alpha() const;

  // alpha + volume / min(axis bandwidth); 0 when the group is one device.
  absl::StatusOr<Seconds> CollectiveTime(const Collective& c,
                                         const LogicalMesh& mesh) const;
  absl::StatusOr<Seconds> CollectivesTime(std::span<const Collective> cs,
                                          const LogicalMesh& mesh) const;

  // flop / (device_count * device_flops).
  Seconds ComputeTime(int64_t flop, int device_count) const;

  // Point-to-point transfer over the inter-host network.
  Seconds TransferTime(int64_t bytes) const;

 private:
  ClusterMesh cluster_;
  CostConstants constants_;
};

// Concrete layout an operator runs with inside a stage.
struct OpLayout {
  int op = 0;
  std::string algorithm;
  ShardingSpec output;
  std::vector<ShardingSpec> inputs;
  std::vector<Collective> comm;
};

struct StageCostReport {
  Seconds t_compute;
  Seconds t_comm;
  Seconds t_total;  // t_compute + t_comm
  // Split of t_total between forward and backward ops.
  Seconds t_forward;
  Seconds t_backward;
  int64_t mem_stage = 0;
  int64_t mem_act = 0;
};

struct StageMemoryReport {
  int64_t mem_stage = 0;
  int64_t mem_act = 0;
  bool feasible = false;
};

// mem_stage + inflight * mem_act <= mem_device.
bool MemoryFits(int64_t mem_stage, int64_t mem_act, int inflight,
                int64_t mem_device);

// mem_stage: per-device parameter bytes plus the largest single-op working
// set (operand shards + output shard). mem_act: per-device bytes of forward
// outputs that must be kept per microbatch (consumed outside the stage, by a
// backward op, or graph outputs). `layouts` is index-aligned with `ops`.
StageMemoryReport StageMemory(const OpGraph& graph, std::span<const int> ops,
                              std::span<const OpLayout> layouts,
                              const LogicalMesh& mesh, int inflight,
                              int64_t mem_device);

}  // namespace meshplan

#endif  // MESHPLAN_COST_MODEL_H_
