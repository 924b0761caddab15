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

#include "meshplan/intra_op.h"

#include <algorithm>
#include <map>
#include <tuple>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace meshplan {
namespace {

// Memoized resharding seconds for one (mesh, cost model) pair.
class ReshardCache {
 public:
  ReshardCache(const OpGraph& graph, const LogicalMesh& mesh,
               const CostModel& cost_model)
      : graph_(graph), mesh_(mesh), cost_model_(cost_model) {}

  absl::StatusOr<Seconds> Time(int producer, const ShardingSpec& src,
                               const ShardingSpec& dst) {
    if (src == dst) return Seconds::Zero();
    auto key = std::make_tuple(producer, src.dims(), dst.dims());
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    auto plan = Collectives(producer, src, dst);
    if (!plan.ok()) return plan.status();
    auto t = cost_model_.CollectivesTime(*plan, mesh_);
    if (!t.ok()) return t.status();
    cache_.emplace(std::move(key), *t);
    return *t;
  }

  absl::StatusOr<std::vector<Collective>> Collectives(int producer,
                                                      const ShardingSpec& src,
                                                      const ShardingSpec& dst) {
    return ReshardingCost(src, dst, graph_.node(producer).out_shape, mesh_);
  }

 private:
  const OpGraph& graph_;
  const LogicalMesh& mesh_;
  const CostModel& cost_model_;
  std::map<std::tuple<int, std::vector<AxisSet>, std::vector<AxisSet>>,
           Seconds>
      cache_;
};

}  // namespace

int MergeMap::IndexOf(int op) const {
  auto it = std::lower_bound(ops.begin(), ops.end(), op);
  return it != ops.end() && *it == op ? int(it - ops.begin()) : -1;
}

int MergeMap::num_groups() const {
  int n = 0;
  for (size_t i = 0; i < ops.size(); ++i) n += root[i] == ops[i];
  return n;
}

MergeMap MergeTrivial(const OpGraph& graph, std::span<const int> ops,
                      bool enabled) {
  MergeMap m;
  m.ops.assign(ops.begin(), ops.end());
  std::sort(m.ops.begin(), m.ops.end());
  const size_t n = m.ops.size();
  m.depth.assign(n, 0);
  m.parent.assign(n, -1);
  m.slot.assign(n, -1);
  m.root.assign(n, -1);
  for (size_t i = 0; i < n; ++i) {
    const OpNode& node = graph.node(m.ops[i]);
    int best_slot = -1;
    int best_depth = -1;
    int min_depth = -1;
    for (size_t k = 0; k < node.inputs.size(); ++k) {
      const int p = m.IndexOf(node.inputs[k].node);
      if (p < 0) continue;
      if (min_depth < 0 || m.depth[p] < min_depth) min_depth = m.depth[p];
      if (m.depth[p] > best_depth) {
        best_depth = m.depth[p];
        best_slot = static_cast<int>(k);
      }
    }
    // Multi-source BFS: one hop past the nearest in-stage operand.
    m.depth[i] = min_depth < 0 ? 0 : min_depth + 1;
    if (enabled && node.kind.IsTrivial() && best_slot >= 0) {
      m.parent[i] = node.inputs[best_slot].node;
      m.slot[i] = best_slot;
      m.root[i] = m.root[m.IndexOf(m.parent[i])];
    } else {
      m.root[i] = m.ops[i];
    }
  }
  return m;
}

absl::StatusOr<StrategyTable> BuildIlp(const OpGraph& graph,
                                       std::span<const int> ops,
                                       const LogicalMesh& mesh,
                                       const CostModel& cost_model,
                                       const IntraOptions& options) {
  StrategyTable t;
  t.merge = MergeTrivial(graph, ops, options.merge_trivial);
  const MergeMap& mm = t.merge;
  const size_t n = mm.ops.size();

  std::vector<int> unsupported;
  t.algorithms.resize(n);
  for (size_t i = 0; i < n; ++i) {
    auto algs = EnumerateAlgorithms(graph, mm.ops[i], mesh);
    if (!algs.ok() || algs->empty()) {
      unsupported.push_back(mm.ops[i]);
      continue;
    }
    t.algorithms[i] = *std::move(algs);
  }
  if (!unsupported.empty()) {
    return absl::UnimplementedError(absl::StrCat(
        "no parallel algorithms for nodes ", absl::StrJoin(unsupported, ", ")));
  }

  std::unordered_map<int, int> group_index;
  t.group_of.assign(n, -1);
  for (size_t i = 0; i < n; ++i) {
    if (mm.root[i] != mm.ops[i]) continue;
    group_index[mm.ops[i]] = static_cast<int>(t.group_root.size());
    t.group_root.push_back(mm.ops[i]);
  }
  for (size_t i = 0; i < n; ++i) t.group_of[i] = group_index.at(mm.root[i]);

  ReshardCache cache(graph, mesh, cost_model);
  const int groups = static_cast<int>(t.group_root.size());
  std::vector<int> k(groups);
  for (int g = 0; g < groups; ++g) {
    k[g] = static_cast<int>(t.algorithms[mm.IndexOf(t.group_root[g])].size());
  }

  // Member algorithms follow their parent's output spec.
  t.member_choice.assign(n, {});
  for (size_t i = 0; i < n; ++i) {
    const int g = t.group_of[i];
    std::vector<int>& mc = t.member_choice[i];
    mc.resize(k[g]);
    if (mm.parent[i] < 0) {
      for (int j = 0; j < k[g]; ++j) mc[j] = j;
      continue;
    }
    const int p = mm.IndexOf(mm.parent[i]);
    for (int j = 0; j < k[g]; ++j) {
      const ShardingSpec& want =
          t.algorithms[p][t.member_choice[p][j]].output_spec;
      int pick = -1;
      Seconds best = Seconds::Infinity();
      for (size_t a = 0; a < t.algorithms[i].size(); ++a) {
        const ShardingSpec& got = t.algorithms[i][a].input_specs[mm.slot[i]];
        if (got == want) {
          pick = static_cast<int>(a);
          break;
        }
        auto r = cache.Time(mm.parent[i], want, got);
        if (!r.ok()) return r.status();
        if (*r < best) best = *r, pick = static_cast<int>(a);
      }
      mc[j] = pick;
    }
  }

  t.problem.node_costs.assign(groups, {});
  t.compute_costs.assign(groups, {});
  for (int g = 0; g < groups; ++g) {
    t.problem.node_costs[g].assign(k[g], Seconds::Zero());
    t.compute_costs[g].assign(k[g], Seconds::Zero());
  }
  for (size_t i = 0; i < n; ++i) {
    const int g = t.group_of[i];
    for (int j = 0; j < k[g]; ++j) {
      auto c = cost_model.CollectivesTime(
          t.algorithms[i][t.member_choice[i][j]].comm, mesh);
      if (!c.ok()) return c.status();
      t.problem.node_costs[g][j] += *c;
    }
  }

  std::map<std::pair<int, int>, size_t> edge_index;
  for (size_t i = 0; i < n; ++i) {
    const OpNode& node = graph.node(mm.ops[i]);
    const int gc = t.group_of[i];
    for (size_t s = 0; s < node.inputs.size(); ++s) {
      const int p = mm.IndexOf(node.inputs[s].node);
      if (p < 0) continue;
      const int gp = t.group_of[p];
      if (gp == gc) {
        for (int j = 0; j < k[gc]; ++j) {
          auto r = cache.Time(
              mm.ops[p], t.algorithms[p][t.member_choice[p][j]].output_spec,
              t.algorithms[i][t.member_choice[i][j]].input_specs[s]);
          if (!r.ok()) return r.status();
          t.problem.node_costs[gc][j] += *r;
        }
        continue;
      }
      const int u = std::min(gp, gc);
      const int v = std::max(gp, gc);
      auto [it, inserted] =
          edge_index.try_emplace({u, v}, t.problem.edges.size());
      if (inserted) {
        t.problem.edges.push_back(
            {u, v, std::vector<Seconds>(size_t(k[u]) * k[v], Seconds::Zero())});
      }
      IlpEdge& e = t.problem.edges[it->second];
      for (int a = 0; a < k[gp]; ++a) {
        for (int b = 0; b < k[gc]; ++b) {
          auto r = cache.Time(
              mm.ops[p], t.algorithms[p][t.member_choice[p][a]].output_spec,
              t.algorithms[i][t.member_choice[i][b]].input_specs[s]);
          if (!r.ok()) return r.status();
          const size_t at = gp == u ? size_t(a) * k[v] + b : size_t(b) * k[v] + a;
          e.cost[at] += *r;
        }
      }
    }
  }
  return t;
}

absl::StatusOr<IntraPlan> SolveIntra(const OpGraph& graph,
                                     const StrategyTable& table,
                                     const LogicalMesh& mesh,
                                     const CostModel& cost_model,
                                     int64_t budget) {
  if (auto st = table.problem.Validate(); !st.ok()) return st;
  const IlpSolution sol = SolveIlp(table.problem, budget);
  const MergeMap& mm = table.merge;
  const size_t n = mm.ops.size();

  IntraPlan plan;
  plan.mesh = mesh;
  plan.ops = mm.ops;
  plan.group_choice = sol.choice;
  plan.objective = sol.objective;
  plan.certified = sol.certified;
  plan.explored = sol.explored;
  plan.ilp_nodes = table.problem.num_nodes();
  plan.ilp_edges = static_cast<int>(table.problem.edges.size());
  plan.layouts.resize(n);
  plan.op_comm.assign(n, Seconds::Zero());
  for (size_t i = 0; i < n; ++i) {
    const int j = sol.choice[table.group_of[i]];
    const ParallelAlgorithm& alg =
        table.algorithms[i][table.member_choice[i][j]];
    plan.layouts[i] = {mm.ops[i], alg.name, alg.output_spec, alg.input_specs,
                       alg.comm};
    auto c = cost_model.CollectivesTime(alg.comm, mesh);
    if (!c.ok()) return c.status();
    plan.op_comm[i] += *c;
  }
  ReshardCache cache(graph, mesh, cost_model);
  for (size_t i = 0; i < n; ++i) {
    const OpNode& node = graph.node(mm.ops[i]);
    for (size_t s = 0; s < node.inputs.size(); ++s) {
      const int p = mm.IndexOf(node.inputs[s].node);
      if (p < 0) continue;
      const ShardingSpec& src = plan.layouts[p].output;
      const ShardingSpec& dst = plan.layouts[i].inputs[s];
      auto r = cache.Time(mm.ops[p], src, dst);
      if (!r.ok()) return r.status();
      plan.op_comm[i] += *r;
      if (src == dst) continue;
      auto cs = cache.Collectives(mm.ops[p], src, dst);
      if (!cs.ok()) return cs.status();
      if (cs->empty()) continue;
      plan.reshards.push_back(
          {mm.ops[p], mm.ops[i], static_cast<int>(s), *std::move(cs)});
    }
  }
  return plan;
}

IntraPlan PostIlpRewrite(const OpGraph& graph, IntraPlan plan) {
  for (const OpLayout& layout : plan.layouts) {
    if (!graph.node(layout.op).grad_of.has_value()) continue;
    for (const Collective& c : layout.comm) {
      if (c.kind != CollectiveKind::kAllReduce) continue;
      if (AxisProduct(c.axes, plan.mesh) == 1) continue;
      plan.rewrites.push_back(
          {layout.op, c, {CollectiveKind::kReduceScatter, c.bytes, c.axes},
           {CollectiveKind::kAllGather, c.bytes, c.axes}});
    }
  }
  return plan;
}

int64_t ReplicatedBytes(const OpGraph& graph, const IntraPlan& plan) {
  (void)graph;
  int64_t total = 0;
  for (const OpLayout& layout : plan.layouts) {
    for (const Collective& c : layout.comm) {
      if (c.kind != CollectiveKind::kAllReduce) continue;
      const int d = AxisProduct(c.axes, plan.mesh);
      if (d == 1) continue;
      const bool rewritten =
          std::any_of(plan.rewrites.begin(), plan.rewrites.end(),
                      [&](const RewriteNote& r) {
                        return r.op == layout.op && r.original == c;
                      });
      total += rewritten ? c.bytes / d : c.bytes;
    }
  }
  return total;
}

absl::StatusOr<IntraPlan> PlanIntraOp(const OpGraph& graph,
                                      std::span<const int> ops,
                                      const LogicalMesh& mesh,
                                      const CostModel& cost_model,
                                      const IntraOptions& options) {
  auto table = BuildIlp(graph, ops, mesh, cost_model, options);
  if (!table.ok()) return table.status();
  auto plan =
      SolveIntra(graph, *table, mesh, cost_model, options.solver_budget);
  if (!plan.ok()) return plan.status();
  if (options.rewrite_all_reduce) return PostIlpRewrite(graph, *std::move(plan));
  return plan;
}

absl::StatusOr<IntraStageResult> EvaluateStageViews(
    const OpGraph& graph, std::span<const int> ops, const SubmeshShape& shape,
    const CostModel& cost_model, const IntraOptions& options) {
  int64_t fwd_flop = 0;
  int64_t bwd_flop = 0;
  for (int op : ops) {
    const OpNode& node = graph.node(op);
    (node.is_backward() ? bwd_flop : fwd_flop) += node.flop;
  }
  const int devices = shape.num_devices();
  const Seconds compute_fwd = cost_model.ComputeTime(fwd_flop, devices);
  const Seconds compute_bwd = cost_model.ComputeTime(bwd_flop, devices);

  IntraStageResult result;
  for (const LogicalMesh& view : LogicalViews(shape, cost_model.cluster())) {
    auto plan = PlanIntraOp(graph, ops, view, cost_model, options);
    if (!plan.ok()) return plan.status();
    ViewResult vr;
    vr.view = view;
    StageCostReport& rep = vr.report;
    rep.t_compute = compute_fwd + compute_bwd;
    rep.t_comm = plan->objective;
    Seconds comm_fwd = Seconds::Zero();
    Seconds comm_bwd = Seconds::Zero();
    for (size_t i = 0; i < plan->ops.size(); ++i) {
      (graph.node(plan->ops[i]).is_backward() ? comm_bwd : comm_fwd) +=
          plan->op_comm[i];
    }
    rep.t_forward = compute_fwd + comm_fwd;
    rep.t_backward = compute_bwd + comm_bwd;
    rep.t_total = rep.t_forward + rep.t_backward;
    const StageMemoryReport mem =
        StageMemory(graph, plan->ops, plan->layouts, view, 1,
                    cost_model.cluster().device_memory);
    rep.mem_stage = mem.mem_stage;
    rep.mem_act = mem.mem_act;
    vr.plan = *std::move(plan);
    result.views.push_back(std::move(vr));
  }
  return result;
}

StageLatency PickView(const IntraStageResult& result, int inflight,
                      int64_t mem_device) {
  StageLatency best;
  for (size_t v = 0; v < result.views.size(); ++v) {
    const StageCostReport& rep = result.views[v].report;
    if (!MemoryFits(rep.mem_stage, rep.mem_act, inflight, mem_device)) continue;
    if (!best.feasible || rep.t_total < best.report.t_total) {
      best.feasible = true;
      best.view_index = static_cast<int>(v);
      best.report = rep;
    }
  }
  if (!best.feasible) {
    best.report.t_total = Seconds::Infinity();
    best.report.t_compute = Seconds::Infinity();
    best.report.t_comm = Seconds::Infinity();
    best.report.t_forward = Seconds::Infinity();
    best.report.t_backward = Seconds::Infinity();
  }
  return best;
}

absl::StatusOr<StageLatency> TIntra(const OpGraph& graph,
                                    std::span<const int> ops,
                                    const SubmeshShape& shape, int inflight,
                                    const CostModel& cost_model,
                                    const IntraOptions& options) {
  auto result = EvaluateStageViews(graph, ops, shape, cost_model, options);
  if (!result.ok()) return result.status();
  return PickView(*result, inflight, cost_model.cluster().device_memory);
}

}  // namespace meshplan
