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

#include <chrono>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "meshplan/clustering.h"
#include "meshplan/graph.h"
#include "meshplan/inter_op.h"
#include "oracles.h"

namespace meshplan {
namespace {

ClusterMesh Cluster(int n, int m) {
  ClusterMesh c;
  c.num_hosts = n;
  c.devices_per_host = m;
  c.intra_host_bandwidth = 4e9;
  c.inter_host_bandwidth = 1e9;
  c.alpha_latency = 1e-6;
  c.device_flops = 1e9;
  c.device_memory = int64_t{1} << 30;
  return c;
}

std::string Join(const std::vector<std::string>& v) {
  std::string out;
  for (const std::string& s : v) out += s + "; ";
  return out;
}

struct Case {
  OpGraph graph;
  int layers;
};

std::vector<Case> OracleGraphs() {
  std::vector<Case> out;
  out.push_back({*BuildMlp(4, 8, 16), 4});
  out.push_back({*BuildMlp(3, 16, 8), 6});
  out.push_back({*BuildTransformerBlocks(1, 2, 4, 8, 2), 5});
  out.push_back({*BuildRandomGraph(3, 2, 7), 3});
  return out;
}

TEST(PipelineLatencyTest, StageDecomposition) {
  std::vector<Seconds> t = {Seconds::FromWhole(2), Seconds::FromWhole(2),
                            Seconds::FromWhole(4), Seconds::FromWhole(2)};
  EXPECT_EQ(PipelineLatency(t, 3), Seconds::FromWhole(18));
  EXPECT_EQ(PipelineLatency(t, 1), Seconds::FromWhole(10));
  for (int b = 1; b < 10; ++b) {
    EXPECT_LT(PipelineLatency(t, b), PipelineLatency(t, b + 1));
    EXPECT_EQ(PipelineLatency(t, b), testing::ReferenceLatency(t, b));
  }
}

TEST(InflightTest, Schedules) {
  EXPECT_EQ(Inflight(Schedule::k1F1B, 3, 8), 3);
  EXPECT_EQ(Inflight(Schedule::kGpipe, 3, 8), 8);
  EXPECT_EQ(ParseSchedule("gpipe").value(), Schedule::kGpipe);
  EXPECT_EQ(ParseSchedule("1f1b").value(), Schedule::k1F1B);
  EXPECT_FALSE(ParseSchedule("zigzag").ok());
}

TEST(PlanLayersTest, MatchesExhaustiveSearch) {
  for (auto [n, m] : {std::pair{1, 2}, {1, 4}, {2, 2}, {2, 4}}) {
    CostModel model(Cluster(n, m));
    for (const Case& c : OracleGraphs()) {
      auto clustering = ClusterOperators(c.graph, c.layers, 3.0);
      ASSERT_TRUE(clustering.ok()) << clustering.status();
      for (Schedule sched : {Schedule::kGpipe, Schedule::k1F1B}) {
        for (int b : {1, 4}) {
          PlanOptions opt;
          opt.num_microbatches = b;
          opt.epsilon = 0;
          opt.schedule = sched;
          auto plan = PlanLayers(c.graph, clustering->layer_ops, model, opt);
          auto want = testing::BruteForcePipeline(
              c.graph, clustering->layer_ops, model, b, sched);
          ASSERT_EQ(plan.ok(), want.feasible);
          if (!want.feasible) continue;
          EXPECT_EQ(plan->t_star, want.t_star)
              << n << "x" << m << " B=" << b;
          auto errors =
              testing::CheckPlanInvariants(*plan, model.cluster(), c.layers);
          EXPECT_TRUE(errors.empty()) << Join(errors);
        }
      }
    }
  }
}

TEST(PlanLayersTest, EpsilonGapIsBounded) {
  CostModel model(Cluster(2, 4));
  for (const Case& c : OracleGraphs()) {
    auto clustering = ClusterOperators(c.graph, c.layers, 3.0);
    ASSERT_TRUE(clustering.ok());
    const int b = 4;
    auto want = testing::BruteForcePipeline(c.graph, clustering->layer_ops,
                                            model, b, Schedule::k1F1B);
    ASSERT_TRUE(want.feasible);
    for (double eps : {1e-7, 1e-6, 1e-5, 1e-4}) {
      PlanOptions opt;
      opt.num_microbatches = b;
      opt.epsilon = eps;
      auto plan = PlanLayers(c.graph, clustering->layer_ops, model, opt);
      ASSERT_TRUE(plan.ok());
      EXPECT_GE(plan->t_star, want.t_star);
      EXPECT_LE(plan->t_star, want.t_star + Seconds::FromDouble(b * eps));
      EXPECT_LE(plan->stats.t_max_evaluated, plan->stats.t_max_candidates);
    }
  }
}

TEST(PlanLayersTest, PruningKeepsTheOptimum) {
  for (auto [n, m] : {std::pair{1, 2}, {1, 4}, {2, 2}, {2, 4}}) {
    CostModel model(Cluster(n, m));
    for (const Case& c : OracleGraphs()) {
      auto clustering = ClusterOperators(c.graph, c.layers, 3.0);
      for (int b : {1, 2, 8}) {
        PlanOptions opt;
        opt.num_microbatches = b;
        opt.epsilon = 0;
        auto pruned = PlanLayers(c.graph, clustering->layer_ops, model, opt);
        opt.prune = false;
        auto full = PlanLayers(c.graph, clustering->layer_ops, model, opt);
        ASSERT_TRUE(pruned.ok() && full.ok());
        EXPECT_EQ(pruned->t_star, full->t_star);
        EXPECT_EQ(full->stats.t_max_evaluated, full->stats.t_max_candidates);
        EXPECT_LE(pruned->stats.t_max_evaluated,
                  full->stats.t_max_evaluated);
      }
    }
  }
}

int64_t PeakStageMemory(const PipelinePlan& plan) {
  int64_t peak = 0;
  for (const StagePlan& s : plan.stages) {
    peak = std::max(peak, s.report.mem_stage + s.inflight * s.report.mem_act);
  }
  return peak;
}

// Lowering device memory below a plan's peak either yields another plan
// that fits or a clean infeasibility report. Both outcomes must occur.
TEST(PlanPipelineTest, ShrinkingMemoryChangesPlanOrFails) {
  bool saw_replan = false, saw_infeasible = false;
  for (auto [n, m] : {std::pair{1, 2}, {1, 4}, {2, 4}}) {
    for (int b : {1, 4}) {
      ClusterMesh cluster = Cluster(n, m);
      auto g = BuildMlp(4, 32, 32);
      PlanOptions opt;
      opt.num_microbatches = b;
      opt.num_layers = 4;
      auto plan = PlanPipeline(*g, CostModel(cluster), opt);
      ASSERT_TRUE(plan.ok());
      for (int step = 0; step < 12; ++step) {
        cluster.device_memory = PeakStageMemory(*plan) - 1;
        auto next = PlanPipeline(*g, CostModel(cluster), opt);
        if (!next.ok()) {
          EXPECT_EQ(next.status().code(),
                    absl::StatusCode::kResourceExhausted);
          EXPECT_NE(std::string(next.status().message()).find("device memory"),
                    std::string::npos);
          saw_infeasible = true;
          break;
        }
        saw_replan = true;
        auto errors = testing::CheckPlanInvariants(*next, cluster, 4);
        EXPECT_TRUE(errors.empty()) << Join(errors);
        EXPECT_LT(PeakStageMemory(*next), PeakStageMemory(*plan));
        EXPECT_GE(next->t_star, plan->t_star);
        plan = std::move(next);
      }
    }
  }
  EXPECT_TRUE(saw_replan);
  EXPECT_TRUE(saw_infeasible);
}

TEST(PlanPipelineTest, AutomaticLayerCount) {
  auto g = BuildTransformerBlocks(2, 2, 8, 16, 2);
  CostModel model(Cluster(1, 4));
  PlanOptions opt;
  auto plan = PlanPipeline(*g, model, opt);
  ASSERT_TRUE(plan.ok()) << plan.status();
  const int L = plan->clustering.num_layers();
  EXPECT_GE(L, 1);
  EXPECT_LE(L, DefaultLayerCount(*g, model.cluster()));
  EXPECT_TRUE(
      testing::CheckPlanInvariants(*plan, model.cluster(), L).empty());
  // An explicit count that the FLOP cap rules out is an error.
  opt.num_layers = static_cast<int>(ForwardChain(*g).size());
  opt.delta = 0;
  EXPECT_FALSE(PlanPipeline(*g, model, opt).ok());
}

TEST(PlanPipelineTest, WorkersDoNotChangeThePlan) {
  auto g = BuildTransformerBlocks(1, 2, 4, 8, 2, true);
  CostModel model(Cluster(2, 2));
  PlanOptions opt;
  opt.num_microbatches = 4;
  opt.num_layers = 4;
  opt.delta = 2;
  auto one = PlanPipeline(*g, model, opt);
  opt.workers = 4;
  auto four = PlanPipeline(*g, model, opt);
  ASSERT_TRUE(one.ok() && four.ok());
  EXPECT_EQ(one->t_star, four->t_star);
  ASSERT_EQ(one->stages.size(), four->stages.size());
  for (size_t k = 0; k < one->stages.size(); ++k) {
    EXPECT_EQ(one->stages[k].assignment, four->stages[k].assignment);
    EXPECT_EQ(one->stages[k].placed.mesh, four->stages[k].placed.mesh);
  }
}

TEST(PlanPipelineTest, BackwardGraphsKeepColocation) {
  auto g = BuildMlp(4, 8, 8, true);
  CostModel model(Cluster(1, 4));
  PlanOptions opt;
  opt.num_microbatches = 2;
  opt.num_layers = 4;
  opt.delta = 1;
  auto plan = PlanPipeline(*g, model, opt);
  ASSERT_TRUE(plan.ok());
  std::vector<int> stage_of(g->size(), -1);
  for (size_t k = 0; k < plan->stages.size(); ++k) {
    for (int op : plan->stages[k].ops) stage_of[op] = static_cast<int>(k);
  }
  for (const OpNode& n : g->nodes()) {
    EXPECT_GE(stage_of[n.id], 0);
    if (n.colocate_with) {
      EXPECT_EQ(stage_of[n.id], stage_of[*n.colocate_with]);
    }
  }
}

TEST(SweepTest, MatchesIndividualPlans) {
  auto g = BuildMlp(4, 8, 16);
  CostModel model(Cluster(1, 4));
  PlanOptions opt;
  opt.num_layers = 4;
  auto sweep = SweepMicrobatches(*g, model, opt, {1, 2, 4, 8});
  ASSERT_EQ(sweep.size(), 4u);
  Seconds prev = Seconds::Zero();
  for (const SweepEntry& e : sweep) {
    ASSERT_TRUE(e.plan.ok());
    PlanOptions single = opt;
    single.num_microbatches = e.num_microbatches;
    auto again = PlanPipeline(*g, model, single);
    ASSERT_TRUE(again.ok());
    EXPECT_EQ(e.plan->t_star, again->t_star);
    EXPECT_EQ(e.plan->num_microbatches, e.num_microbatches);
    EXPECT_GE(e.plan->t_star, prev);
    prev = e.plan->t_star;
  }
  EXPECT_EQ(SweepMicrobatches(*g, model, opt, {1}).size(), 1u);
}

TEST(PlanPipelineTest, EightLayersOnTwoByFourIsQuick) {
  auto g = BuildMlp(8, 16, 32);
  CostModel model(Cluster(2, 4));
  PlanOptions opt;
  opt.num_layers = 8;
  opt.num_microbatches = 4;
  const auto start = std::chrono::steady_clock::now();
  auto plan = PlanPipeline(*g, model, opt);
  ASSERT_TRUE(plan.ok());
  EXPECT_LT(std::chrono::steady_clock::now() - start,
            std::chrono::seconds(30));
  EXPECT_TRUE(
      testing::CheckPlanInvariants(*plan, model.cluster(), 8).empty());
}

TEST(PlanLayersTest, RejectsBadOptions) {
  auto g = BuildMlp(2, 4, 4);
  CostModel model(Cluster(1, 2));
  auto c = ClusterOperators(*g, 2, 1.0);
  PlanOptions opt;
  opt.num_microbatches = 0;
  EXPECT_EQ(PlanLayers(*g, c->layer_ops, model, opt).status().code(),
            absl::StatusCode::kInvalidArgument);
  opt.num_microbatches = 1;
  opt.epsilon = -1;
  EXPECT_FALSE(PlanLayers(*g, c->layer_ops, model, opt).ok());
}

}  // namespace
}  // namespace meshplan
