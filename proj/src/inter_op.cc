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

#include "meshplan/inter_op.h"

#include <algorithm>
#include <atomic>
#include <optional>
#include <thread>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace meshplan {
namespace {

struct Choice {
  int end = -1;
  int shape = -1;
};

struct Violation {
  int64_t overshoot = 0;
  std::string text;
};

}  // namespace

std::string_view ScheduleName(Schedule s) {
  return s == Schedule::kGpipe ? "gpipe" : "1f1b";
}

absl::StatusOr<Schedule> ParseSchedule(std::string_view text) {
  if (text == "gpipe" || text == "GPipe") return Schedule::kGpipe;
  if (text == "1f1b" || text == "1F1B") return Schedule::k1F1B;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown schedule '", std::string(text),
                   "' (expected gpipe or 1f1b)"));
}

int Inflight(Schedule schedule, int stages_to_end, int num_microbatches) {
  return schedule == Schedule::kGpipe ? num_microbatches : stages_to_end;
}

Seconds PipelineLatency(std::span<const Seconds> stage_latency,
                        int num_microbatches) {
  Seconds sum = Seconds::Zero();
  Seconds worst = Seconds::Zero();
  for (Seconds t : stage_latency) {
    sum += t;
    worst = Max(worst, t);
  }
  return sum + worst * int64_t{num_microbatches - 1};
}

int DefaultLayerCount(const OpGraph& graph, const ClusterMesh& cluster) {
  const int k = static_cast<int>(ForwardChain(graph).size());
  return std::max(1, std::min(k, 2 * cluster.num_devices()));
}

absl::StatusOr<PipelinePlan> PlanLayers(
    const OpGraph& graph, const std::vector<std::vector<int>>& layers,
    const CostModel& cost_model, const PlanOptions& options) {
  const ClusterMesh& cluster = cost_model.cluster();
  const int L = static_cast<int>(layers.size());
  const int B = options.num_microbatches;
  const int D = cluster.num_devices();
  if (B < 1) return absl::InvalidArgumentError("B must be >= 1");
  if (L < 1) return absl::InvalidArgumentError("need at least one layer");
  if (!(options.epsilon >= 0)) {
    return absl::InvalidArgumentError("epsilon must be >= 0");
  }
  const std::vector<SubmeshShape> shapes = AdmissibleShapes(cluster);
  const int H = static_cast<int>(shapes.size());

  // Stage evaluation per (range, shape); each range is [i, j).
  auto slot = [&](int i, int j, int h) {
    return (size_t(i) * (L + 1) + j) * H + h;
  };
  std::vector<std::optional<absl::StatusOr<IntraStageResult>>> evals(
      size_t(L + 1) * (L + 1) * H);
  std::vector<std::tuple<int, int, int>> tasks;
  for (int i = 0; i < L; ++i) {
    for (int j = i + 1; j <= L; ++j) {
      for (int h = 0; h < H; ++h) tasks.emplace_back(i, j, h);
    }
  }
  auto stage_ops = [&](int i, int j) {
    std::vector<int> ops;
    for (int r = i; r < j; ++r) {
      ops.insert(ops.end(), layers[r].begin(), layers[r].end());
    }
    std::sort(ops.begin(), ops.end());
    return ops;
  };
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t t = next++; t < tasks.size(); t = next++) {
      const auto [i, j, h] = tasks[t];
      const std::vector<int> ops = stage_ops(i, j);
      evals[slot(i, j, h)] =
          EvaluateStageViews(graph, ops, shapes[h], cost_model, options.intra);
    }
  };
  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }

  PipelinePlan plan;
  plan.num_microbatches = B;
  plan.schedule = options.schedule;
  for (const auto& [i, j, h] : tasks) {
    const auto& e = *evals[slot(i, j, h)];
    if (!e.ok()) return e.status();
    for (const ViewResult& v : e->views) {
      ++plan.stats.stage_evaluations;
      plan.stats.solver_nodes += v.plan.explored;
      plan.stats.all_certified = plan.stats.all_certified && v.plan.certified;
    }
  }

  // lat[(slot, s)]: t_intra with s stages from this one to the end.
  const int64_t mem = cluster.device_memory;
  std::vector<StageLatency> lat(evals.size() * (L + 1));
  auto lat_at = [&](int i, int j, int h, int s) -> StageLatency& {
    return lat[slot(i, j, h) * (L + 1) + s];
  };
  std::vector<Seconds> candidates;
  std::optional<Violation> tightest;
  for (const auto& [i, j, h] : tasks) {
    const IntraStageResult& r = **evals[slot(i, j, h)];
    for (int s = 1; s <= L - i; ++s) {
      const int inflight = Inflight(options.schedule, s, B);
      StageLatency& sl = lat_at(i, j, h, s);
      sl = PickView(r, inflight, mem);
      if (sl.feasible) {
        candidates.push_back(sl.report.t_total);
        continue;
      }
      for (const ViewResult& v : r.views) {
        const int64_t need =
            v.report.mem_stage + int64_t{inflight} * v.report.mem_act;
        if (tightest && need - mem >= tightest->overshoot) continue;
        tightest = Violation{
            need - mem,
            absl::StrFormat(
                "layers [%d, %d) on submesh %s view %s with %d stages to the "
                "end needs %d bytes per device (%d parameters and working "
                "set + %d x %d activations), device memory is %d",
                i, j, shapes[h].ToString(), v.view.ToString(), s, need,
                v.report.mem_stage, inflight, v.report.mem_act, mem)};
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  plan.stats.t_max_candidates = static_cast<int>(candidates.size());

  // f[s][k][d]: least sum of stage latencies placing layers [k, L) on
  // exactly d devices in s stages, each stage at most t_max.
  const Seconds inf = Seconds::Infinity();
  auto idx = [&](int s, int k, int d) {
    return (size_t(s) * (L + 1) + k) * (D + 1) + d;
  };
  std::vector<Seconds> f(size_t(L + 1) * (L + 1) * (D + 1));
  std::vector<Choice> choice(f.size());
  auto run_dp = [&](Seconds t_max) {
    std::fill(f.begin(), f.end(), inf);
    std::fill(choice.begin(), choice.end(), Choice{});
    f[idx(0, L, 0)] = Seconds::Zero();
    for (int s = 1; s <= L; ++s) {
      for (int k = L - 1; k >= 0; --k) {
        for (int d = 1; d <= D; ++d) {
          Seconds best = inf;
          Choice pick;
          for (int j = k + 1; j <= L; ++j) {
            for (int h = 0; h < H; ++h) {
              const int dev = shapes[h].num_devices();
              if (dev > d || s > L - k) continue;
              const StageLatency& sl = lat_at(k, j, h, s);
              if (!sl.feasible || t_max < sl.report.t_total) continue;
              const Seconds rest = f[idx(s - 1, j, d - dev)];
              if (rest.is_infinite()) continue;
              const Seconds total = sl.report.t_total + rest;
              if (total < best) {
                best = total;
                pick = {j, h};
              }
            }
          }
          f[idx(s, k, d)] = best;
          choice[idx(s, k, d)] = pick;
        }
      }
    }
  };

  struct Best {
    Seconds value = Seconds::Infinity();
    Seconds t_max;
    std::vector<std::tuple<int, int, int, int>> stages;  // k, j, h, s
  } best;
  const Seconds eps = Seconds::FromDouble(options.epsilon);
  for (size_t c = 0; c < candidates.size();) {
    const Seconds v = candidates[c];
    if (options.prune && !(v * int64_t{B} < best.value)) break;
    size_t w = c;
    while (w + 1 < candidates.size() && candidates[w + 1] < v + eps) ++w;
    const Seconds t_max = candidates[w];
    c = w + 1;
    ++plan.stats.t_max_evaluated;
    run_dp(t_max);
    int best_s = -1;
    for (int s = 1; s <= L; ++s) {
      const Seconds fs = f[idx(s, 0, D)];
      if (fs.is_finite() && (best_s < 0 || fs < f[idx(best_s, 0, D)])) {
        best_s = s;
      }
    }
    if (best_s < 0) continue;
    std::vector<std::tuple<int, int, int, int>> stages;
    std::vector<Seconds> t;
    for (int s = best_s, k = 0, d = D; s > 0; --s) {
      const Choice ch = choice[idx(s, k, d)];
      stages.emplace_back(k, ch.end, ch.shape, s);
      t.push_back(lat_at(k, ch.end, ch.shape, s).report.t_total);
      d -= shapes[ch.shape].num_devices();
      k = ch.end;
    }
    const Seconds value = PipelineLatency(t, B);
    if (value < best.value) {
      best.value = value;
      best.t_max = *std::max_element(t.begin(), t.end());
      best.stages = std::move(stages);
    }
  }

  if (best.stages.empty()) {
    if (tightest) {
      return absl::ResourceExhaustedError(absl::StrCat(
          "no feasible pipeline plan; tightest memory violation: ",
          tightest->text));
    }
    return absl::ResourceExhaustedError(
        "no feasible pipeline plan: no stage slicing uses every device");
  }

  std::vector<SubmeshShape> chosen;
  for (const auto& [k, j, h, s] : best.stages) chosen.push_back(shapes[h]);
  auto cover = Cover(cluster, chosen);
  if (!cover.ok()) return cover.status();
  for (size_t q = 0; q < best.stages.size(); ++q) {
    const auto& [k, j, h, s] = best.stages[q];
    const StageLatency& sl = lat_at(k, j, h, s);
    const ViewResult& vr = (**evals[slot(k, j, h)]).views[sl.view_index];
    StagePlan sp;
    sp.layer_begin = k;
    sp.layer_end = j;
    sp.ops = stage_ops(k, j);
    sp.shape = shapes[h];
    sp.assignment = (*cover)[q];
    sp.placed = PlaceView(sp.assignment, vr.view, cluster);
    sp.intra = vr.plan;
    sp.report = sl.report;
    sp.inflight = Inflight(options.schedule, s, B);
    plan.stages.push_back(std::move(sp));
  }
  plan.t_star = best.value;
  plan.t_max = best.t_max;
  return plan;
}

absl::StatusOr<PipelinePlan> PlanPipeline(const OpGraph& graph,
                                          const CostModel& cost_model,
                                          const PlanOptions& options) {
  absl::StatusOr<LayerClustering> clustering =
      absl::InvalidArgumentError("no layer count tried");
  if (options.num_layers > 0) {
    clustering = ClusterOperators(graph, options.num_layers, options.delta);
  } else {
    // Automatic count: the largest one whose FLOP cap is satisfiable.
    for (int L = DefaultLayerCount(graph, cost_model.cluster()); L >= 1; --L) {
      clustering = ClusterOperators(graph, L, options.delta);
      if (clustering.ok() ||
          clustering.status().code() != absl::StatusCode::kFailedPrecondition) {
        break;
      }
    }
  }
  if (!clustering.ok()) return clustering.status();
  auto plan = PlanLayers(graph, clustering->layer_ops, cost_model, options);
  if (!plan.ok()) return plan.status();
  plan->clustering = *std::move(clustering);
  return plan;
}

std::vector<SweepEntry> SweepMicrobatches(const OpGraph& graph,
                                          const CostModel& cost_model,
                                          PlanOptions options,
                                          const std::vector<int>& b_list) {
  std::vector<SweepEntry> out;
  for (int b : b_list) {
    options.num_microbatches = b;
    out.push_back({b, PlanPipeline(graph, cost_model, options)});
  }
  return out;
}

}  // namespace meshplan
