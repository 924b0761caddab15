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

// Intra-operator planning: sharding strategy selection for one stage on one
// logical mesh, and the stage latency search over logical views.

#ifndef MESHPLAN_INTRA_OP_H_
#define MESHPLAN_INTRA_OP_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/cost_model.h"
#include "meshplan/graph.h"
#include "meshplan/ilp.h"
#include "meshplan/mesh.h"
#include "meshplan/sharding.h"

namespace meshplan {

// Merge map over a stage's ops. Every vector is index-aligned with `ops`.
struct MergeMap {
  std::vector<int> ops;     // stage op ids, ascending
  std::vector<int> depth;   // BFS depth inside the stage
  std::vector<int> parent;  // op id a trivial op follows, or -1
  std::vector<int> slot;    // operand slot through which it follows parent
  std::vector<int> root;    // op id owning the ILP variable

  int IndexOf(int op) const;
  int num_groups() const;
};

// Folds Elementwise, Reduction and Reshape ops into the operand with the
// greatest BFS depth (lowest slot on ties). Operands outside the stage do
// not count; trivial ops with no in-stage operand stay on their own.
MergeMap MergeTrivial(const OpGraph& graph, std::span<const int> ops,
                      bool enabled = true);

struct StrategyTable {
  MergeMap merge;
  IlpProblem problem;              // one ILP node per merge group
  std::vector<int> group_root;     // ILP node -> root op id
  std::vector<int> group_of;       // stage op index -> ILP node
  // Candidate algorithms per stage op index.
  std::vector<std::vector<ParallelAlgorithm>> algorithms;
  // member_choice[i][j]: algorithm of stage op i when its group takes
  // strategy j.
  std::vector<std::vector<int>> member_choice;
  // Compute cost vectors d_v; all zero, compute is charged per view.
  std::vector<std::vector<Seconds>> compute_costs;
};

struct IntraOptions {
  bool merge_trivial = true;
  int64_t solver_budget = kDefaultSolverBudget;
  bool rewrite_all_reduce = true;
};

absl::StatusOr<StrategyTable> BuildIlp(const OpGraph& graph,
                                       std::span<const int> ops,
                                       const LogicalMesh& mesh,
                                       const CostModel& cost_model,
                                       const IntraOptions& options = {});

struct EdgeReshard {
  int producer = 0;
  int consumer = 0;
  int slot = 0;
  std::vector<Collective> collectives;
};

// all_reduce replaced by reduce_scatter then all_gather of the same bytes.
struct RewriteNote {
  int op = 0;
  Collective original;
  Collective reduce_scatter;
  Collective all_gather;
};

struct IntraPlan {
  LogicalMesh mesh;
  std::vector<int> ops;
  std::vector<int> group_choice;   // chosen strategy per ILP node
  std::vector<OpLayout> layouts;   // index-aligned with ops
  // Communication seconds charged to each op: its own collectives plus the
  // resharding of its in-stage operands.
  std::vector<Seconds> op_comm;
  std::vector<EdgeReshard> reshards;
  std::vector<RewriteNote> rewrites;
  Seconds objective;
  bool certified = true;
  int64_t explored = 0;
  int ilp_nodes = 0;
  int ilp_edges = 0;
};

absl::StatusOr<IntraPlan> SolveIntra(const OpGraph& graph,
                                     const StrategyTable& table,
                                     const LogicalMesh& mesh,
                                     const CostModel& cost_model,
                                     int64_t budget = kDefaultSolverBudget);

// Annotates all_reduce on parameter-gradient ops as reduce_scatter plus
// all_gather. Modeled seconds are unchanged.
IntraPlan PostIlpRewrite(const OpGraph& graph, IntraPlan plan);

// Per-device bytes of tensors left replicated by an all_reduce; a rewritten
// all_reduce leaves only the 1/d shard each device updates.
int64_t ReplicatedBytes(const OpGraph& graph, const IntraPlan& plan);

// BuildIlp + SolveIntra + optional rewrite.
absl::StatusOr<IntraPlan> PlanIntraOp(const OpGraph& graph,
                                      std::span<const int> ops,
                                      const LogicalMesh& mesh,
                                      const CostModel& cost_model,
                                      const IntraOptions& options = {});

struct ViewResult {
  LogicalMesh view;
  IntraPlan plan;
  StageCostReport report;
};

struct IntraStageResult {
  // Feasible views in LogicalViews order; only the memory test depends on
  // the subsequent-stage count, so callers can re-filter cheaply.
  std::vector<ViewResult> views;
};

// Plans `ops` on every logical view of `shape`. Infeasibility is decided
// later by StageLatency.
absl::StatusOr<IntraStageResult> EvaluateStageViews(
    const OpGraph& graph, std::span<const int> ops, const SubmeshShape& shape,
    const CostModel& cost_model, const IntraOptions& options = {});

struct StageLatency {
  bool feasible = false;
  int view_index = -1;  // into IntraStageResult::views
  StageCostReport report;
};

// Lowest t_total among views with mem_stage + inflight * mem_act within
// device memory. Ties go to the earliest view.
StageLatency PickView(const IntraStageResult& result, int inflight,
                      int64_t mem_device);

// Convenience: t_intra for a stage given the activation multiplicity.
absl::StatusOr<StageLatency> TIntra(const OpGraph& graph,
                                    std::span<const int> ops,
                                    const SubmeshShape& shape, int inflight,
                                    const CostModel& cost_model,
                                    const IntraOptions& options = {});

}  // namespace meshplan

#endif  // MESHPLAN_INTRA_OP_H_
