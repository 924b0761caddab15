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

// Inter-operator planning: stage slicing, submesh selection and device
// assignment for a synchronous pipeline.

#ifndef MESHPLAN_INTER_OP_H_
#define MESHPLAN_INTER_OP_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/clustering.h"
#include "meshplan/cost_model.h"
#include "meshplan/graph.h"
#include "meshplan/intra_op.h"
#include "meshplan/mesh.h"

namespace meshplan {

enum class Schedule { kGpipe, k1F1B };

std::string_view ScheduleName(Schedule s);
absl::StatusOr<Schedule> ParseSchedule(std::string_view text);

// Microbatches whose activations a stage holds at once. 1F1B: the number
// of stages from this one to the last, inclusive. GPipe: B.
int Inflight(Schedule schedule, int stages_to_end, int num_microbatches);

// sum(t) + (B - 1) * max(t).
Seconds PipelineLatency(std::span<const Seconds> stage_latency,
                        int num_microbatches);

struct PlanOptions {
  int num_microbatches = 1;
  int num_layers = 0;  // 0: automatic, see PlanPipeline
  double delta = 0.1;
  double epsilon = 1e-6;  // seconds
  Schedule schedule = Schedule::k1F1B;
  bool prune = true;
  int workers = 1;
  IntraOptions intra;
};

struct StagePlan {
  int layer_begin = 0;
  int layer_end = 0;  // exclusive
  std::vector<int> ops;
  SubmeshShape shape;
  SubmeshAssignment assignment;
  PlacedMesh placed;
  IntraPlan intra;
  StageCostReport report;
  int inflight = 1;

  Seconds latency() const { return report.t_total; }
};

struct PlanStats {
  int t_max_candidates = 0;
  int t_max_evaluated = 0;
  int64_t stage_evaluations = 0;  // (range, shape, view) ILP solves
  int64_t solver_nodes = 0;
  bool all_certified = true;
};

struct PipelinePlan {
  std::vector<StagePlan> stages;
  int num_microbatches = 1;
  Schedule schedule = Schedule::k1F1B;
  Seconds t_star;
  Seconds t_max;
  LayerClustering clustering;
  PlanStats stats;
};

// Stage-slicing DP over pre-clustered layers. `layers[r]` holds the node ids
// of layer r. Infeasible configurations yield ResourceExhausted naming the
// tightest memory violation.
absl::StatusOr<PipelinePlan> PlanLayers(
    const OpGraph& graph, const std::vector<std::vector<int>>& layers,
    const CostModel& cost_model, const PlanOptions& options);

// Clustering, then PlanLayers. With num_layers == 0 the layer count starts
// at DefaultLayerCount and drops until the FLOP cap can be met.
absl::StatusOr<PipelinePlan> PlanPipeline(const OpGraph& graph,
                                          const CostModel& cost_model,
                                          const PlanOptions& options);

int DefaultLayerCount(const OpGraph& graph, const ClusterMesh& cluster);

struct SweepEntry {
  int num_microbatches = 0;
  absl::StatusOr<PipelinePlan> plan;
};

std::vector<SweepEntry> SweepMicrobatches(const OpGraph& graph,
                                          const CostModel& cost_model,
                                          PlanOptions options,
                                          const std::vector<int>& b_list);

}  // namespace meshplan

#endif  // MESHPLAN_INTER_OP_H_
