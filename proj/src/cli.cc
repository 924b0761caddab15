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

#include "meshplan/cli.h"

#include <algorithm>
#include <optional>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "json.hpp"
#include "meshplan/config.h"
#include "meshplan/cost_model.h"
#include "meshplan/instructions.h"
#include "meshplan/inter_op.h"
#include "meshplan/mesh.h"
#include "meshplan/plan_json.h"
#include "meshplan/simulator.h"

namespace meshplan {
namespace {

using nlohmann::json;

std::string Dump(const json& doc) { return doc.dump(2) + "\n"; }

void PutTime(json& obj, const std::string& key, Seconds s) {
  obj[key] = s.is_finite() ? json(s.ToDouble()) : json("inf");
  obj[key + "_ps"] = s.ticks();
}

// Flags shared by the graph-consuming subcommands.
struct RunFlags {
  std::string graph, builder, cluster, config, b, schedule, out;
  int layers = 0;
  double delta = 0;
  double epsilon = 0;
  uint64_t seed = 0;
  int workers = 1;
  std::map<std::string, CLI::Option*> opts;

  void Add(CLI::App* app) {
    opts["graph"] = app->add_option("--graph", graph, "Graph JSON file");
    opts["builder"] = app->add_option(
        "--builder", builder,
        "Synthetic graph, e.g. mlp:layers=4,hidden=64 or transformer:blocks=2");
    opts["cluster"] =
        app->add_option("--cluster", cluster, "Cluster config (TOML or JSON)");
    opts["config"] =
        app->add_option("--config", config, "Run config (TOML or JSON)");
    opts["b"] = app->add_option("--b", b, "Microbatch count, or a list 1,2,4");
    opts["layers"] =
        app->add_option("--layers", layers, "Clustered layer count (0: auto)");
    opts["delta"] = app->add_option("--delta", delta, "Layer FLOP slack");
    opts["epsilon"] =
        app->add_option("--epsilon", epsilon, "t_max enumeration step");
    opts["schedule"] =
        app->add_option("--schedule", schedule, "gpipe or 1f1b");
    opts["out"] = app->add_option("--out", out, "Output JSON path");
    opts["seed"] = app->add_option("--seed", seed, "Random builder seed");
    opts["workers"] =
        app->add_option("--workers", workers, "Stage evaluation threads");
  }

  bool Given(const std::string& name) const {
    return opts.at(name)->count() > 0;
  }

  absl::StatusOr<RunConfig> Resolve(bool need_graph) const {
    RunConfig c;
    if (Given("config")) {
      auto doc = LoadConfigFile(config);
      if (!doc.ok()) return doc.status();
      if (auto st = ApplyConfig(*doc, c); !st.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat(config, ": ", st.message()));
      }
    }
    if (Given("cluster")) {
      auto doc = LoadConfigFile(cluster);
      if (!doc.ok()) return doc.status();
      auto mesh = ClusterFromJson(*doc);
      if (!mesh.ok()) {
        return absl::InvalidArgumentError(
            absl::StrCat(cluster, ": ", mesh.status().message()));
      }
      c.cluster = *mesh;
    }
    if (Given("graph")) {
      c.graph_path = graph;
      c.builder.reset();
    }
    if (Given("builder")) {
      c.builder = builder;
      if (!Given("graph")) c.graph_path.reset();
    }
    if (Given("b")) {
      auto list = ParseIntList(b);
      if (!list.ok()) return list.status();
      c.b_list = *list;
    }
    if (Given("layers")) c.layers = layers;
    if (Given("delta")) c.delta = delta;
    if (Given("epsilon")) c.epsilon = epsilon;
    if (Given("schedule")) {
      auto s = ParseSchedule(schedule);
      if (!s.ok()) return s.status();
      c.schedule = *s;
    }
    if (Given("out")) c.out = out;
    if (Given("seed")) c.seed = seed;
    if (Given("workers")) c.workers = workers;
    if (need_graph) {
      if (auto st = c.Validate(); !st.ok()) return st;
    } else if (auto st = c.cluster.Validate(); !st.ok()) {
      return st;
    }
    return c;
  }
};

int Fail(const absl::Status& status, std::ostream& err) {
  err << "error: " << status.message() << "\n";
  return ExitCodeFor(status);
}

// JSON goes to the --out file when given (with the summary on `out`),
// otherwise to `out` with the summary on `err`.
int Emit(const RunConfig& c, const json& doc, const std::string& summary,
         std::ostream& out, std::ostream& err) {
  if (c.out.empty()) {
    out << Dump(doc);
    err << summary;
    return kExitOk;
  }
  if (auto st = WriteFile(c.out, Dump(doc)); !st.ok()) return Fail(st, err);
  out << summary;
  return kExitOk;
}

absl::StatusOr<PipelinePlan> LoadPlanFile(const std::string& path,
                                          const OpGraph& graph,
                                          const ClusterMesh& cluster) {
  auto text = ReadFile(path);
  if (!text.ok()) return text.status();
  json doc = json::parse(*text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": malformed JSON"));
  }
  auto plan = PlanFromJson(doc, graph, cluster);
  if (!plan.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", plan.status().message()));
  }
  return plan;
}

absl::StatusOr<std::vector<SubmeshShape>> ParseShapes(const std::string& s) {
  std::vector<SubmeshShape> shapes;
  for (absl::string_view part : absl::StrSplit(s, ',', absl::SkipEmpty())) {
    std::vector<absl::string_view> nm = absl::StrSplit(part, 'x');
    SubmeshShape shape;
    if (nm.size() != 2 || !absl::SimpleAtoi(nm[0], &shape.n) ||
        !absl::SimpleAtoi(nm[1], &shape.m) || shape.n < 1 || shape.m < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad shape '", part, "' (expected NxM, e.g. 1x2)"));
    }
    shapes.push_back(shape);
  }
  if (shapes.empty()) return absl::InvalidArgumentError("no shapes given");
  return shapes;
}

int CmdPlan(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  auto c = flags.Resolve(true);
  if (!c.ok()) return Fail(c.status(), err);
  if (c->b_list.size() != 1) {
    return Fail(absl::InvalidArgumentError(
                    "plan takes a single B; use sweep-b for a list"),
                err);
  }
  auto graph = LoadGraph(*c);
  if (!graph.ok()) return Fail(graph.status(), err);
  const CostModel cm(c->cluster, c->cost);
  auto plan = PlanPipeline(*graph, cm, c->ToPlanOptions(c->b_list.front()));
  if (!plan.ok()) return Fail(plan.status(), err);
  return Emit(*c, PlanToJson(*plan, *graph, c->cluster), PlanReport(*plan),
              out, err);
}

struct SimFlags {
  std::string plan, gantt, program;
  bool zero_transfer = false;
  int64_t device_memory = 0;
  CLI::Option* device_memory_opt = nullptr;
};

int CmdSimulate(const RunFlags& flags, const SimFlags& sim, std::ostream& out,
                std::ostream& err) {
  auto c = flags.Resolve(true);
  if (!c.ok()) return Fail(c.status(), err);
  auto graph = LoadGraph(*c);
  if (!graph.ok()) return Fail(graph.status(), err);
  auto plan = LoadPlanFile(sim.plan, *graph, c->cluster);
  if (!plan.ok()) return Fail(plan.status(), err);
  const CostModel cm(c->cluster, c->cost);
  auto program = EmitInstructions(*graph, *plan, cm, plan->schedule);
  if (!program.ok()) return Fail(program.status(), err);
  SimOptions options;
  options.zero_transfer = sim.zero_transfer;
  options.device_memory = sim.device_memory_opt->count() > 0
                              ? sim.device_memory
                              : c->cluster.device_memory;
  auto result = Simulate(*program, options);
  if (!result.ok()) return Fail(result.status(), err);

  const Seconds diff = result->makespan - plan->t_star;
  const Seconds rdiff = plan->t_star - result->makespan;
  json doc;
  doc["format"] = "meshplan.sim/1";
  doc["schedule"] = std::string(ScheduleName(plan->schedule));
  doc["num_microbatches"] = plan->num_microbatches;
  doc["zero_transfer"] = sim.zero_transfer;
  PutTime(doc, "t_star", plan->t_star);
  PutTime(doc, "makespan", result->makespan);
  doc["difference"] = result->makespan.ToDouble() - plan->t_star.ToDouble();
  doc["difference_ps"] = result->makespan.ticks() - plan->t_star.ticks();
  doc["trace"] = TraceToJson(*result);
  const json gantt = GanttData(*program, *result);
  doc["gantt"] = gantt;
  if (!sim.gantt.empty()) {
    if (auto st = WriteFile(sim.gantt, Dump(gantt)); !st.ok()) {
      return Fail(st, err);
    }
  }
  if (!sim.program.empty()) {
    if (auto st = WriteFile(sim.program, Dump(ProgramToJson(*program)));
        !st.ok()) {
      return Fail(st, err);
    }
  }
  std::string summary = absl::StrCat(
      "T*        = ", plan->t_star.ToString(), "\n",
      "makespan  = ", result->makespan.ToString(), "\n", "difference = ",
      diff > Seconds::Zero() ? "+" : (rdiff > Seconds::Zero() ? "-" : ""),
      (diff > Seconds::Zero() ? diff : rdiff).ToString(),
      result->makespan == plan->t_star ? " (exact match)" : "", "\n");
  return Emit(*c, doc, summary, out, err);
}

struct CoverFlags {
  int hosts = 0;
  int devices = 0;
  std::string shapes;
  CLI::Option* hosts_opt = nullptr;
  CLI::Option* devices_opt = nullptr;
};

int CmdCover(const RunFlags& flags, const CoverFlags& cover, std::ostream& out,
             std::ostream& err) {
  auto c = flags.Resolve(false);
  if (!c.ok()) return Fail(c.status(), err);
  if (cover.hosts_opt->count() > 0) c->cluster.num_hosts = cover.hosts;
  if (cover.devices_opt->count() > 0) {
    c->cluster.devices_per_host = cover.devices;
  }
  if (auto st = c->cluster.Validate(); !st.ok()) return Fail(st, err);
  auto shapes = ParseShapes(cover.shapes);
  if (!shapes.ok()) return Fail(shapes.status(), err);
  auto tiling = Cover(c->cluster, *shapes);
  if (!tiling.ok()) return Fail(tiling.status(), err);
  const bool verified = VerifyCover(c->cluster, *tiling);
  if (!verified) {
    return Fail(absl::InternalError("cover produced an invalid tiling"), err);
  }
  json pieces = json::array();
  std::string summary = absl::StrCat("cover of ", c->cluster.num_hosts, "x",
                                     c->cluster.devices_per_host, ":\n");
  for (size_t i = 0; i < tiling->size(); ++i) {
    const SubmeshAssignment& a = (*tiling)[i];
    pieces.push_back({{"shape", a.shape.ToString()},
                      {"n", a.shape.n},
                      {"m", a.shape.m},
                      {"host_begin", a.host_begin},
                      {"host_end", a.host_end},
                      {"device_begin", a.device_begin},
                      {"device_end", a.device_end},
                      {"device_ids", a.DeviceIds(c->cluster)}});
    absl::StrAppend(&summary, "  ", a.shape.ToString(), "  hosts [",
                    a.host_begin, ", ", a.host_end, ")  devices [",
                    a.device_begin, ", ", a.device_end, ")\n");
  }
  json doc = {{"format", "meshplan.cover/1"},
              {"num_hosts", c->cluster.num_hosts},
              {"devices_per_host", c->cluster.devices_per_host},
              {"pieces", pieces},
              {"verified", verified}};
  return Emit(*c, doc, summary, out, err);
}

int CmdSweep(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  auto c = flags.Resolve(true);
  if (!c.ok()) return Fail(c.status(), err);
  auto graph = LoadGraph(*c);
  if (!graph.ok()) return Fail(graph.status(), err);
  const CostModel cm(c->cluster, c->cost);
  const std::vector<SweepEntry> entries =
      SweepMicrobatches(*graph, cm, c->ToPlanOptions(1), c->b_list);
  json rows = json::array();
  std::string summary = "B      T*            stages\n";
  std::optional<absl::Status> first_error;
  bool any_ok = false;
  for (const SweepEntry& e : entries) {
    json row = {{"num_microbatches", e.num_microbatches},
                {"feasible", e.plan.ok()}};
    if (e.plan.ok()) {
      any_ok = true;
      PutTime(row, "t_star", e.plan->t_star);
      PutTime(row, "t_max", e.plan->t_max);
      row["num_stages"] = e.plan->stages.size();
      json lat = json::array();
      for (const StagePlan& s : e.plan->stages) {
        lat.push_back(s.latency().ToDouble());
      }
      row["stage_latency"] = lat;
      absl::StrAppend(&summary, e.num_microbatches, "  ",
                      e.plan->t_star.ToString(), "  ", e.plan->stages.size(),
                      "\n");
    } else {
      if (!first_error) first_error = e.plan.status();
      row["error"] = std::string(e.plan.status().message());
      absl::StrAppend(&summary, e.num_microbatches, "  infeasible: ",
                      e.plan.status().message(), "\n");
    }
    rows.push_back(row);
  }
  json doc = {{"format", "meshplan.sweep/1"},
              {"schedule", std::string(ScheduleName(c->schedule))},
              {"entries", rows}};
  const int code = Emit(*c, doc, summary, out, err);
  if (code != kExitOk || any_ok || !first_error) return code;
  return ExitCodeFor(*first_error);
}

int CmdReport(const RunFlags& flags, const std::string& plan_path,
              std::ostream& out, std::ostream& err) {
  auto c = flags.Resolve(true);
  if (!c.ok()) return Fail(c.status(), err);
  auto graph = LoadGraph(*c);
  if (!graph.ok()) return Fail(graph.status(), err);
  auto plan = LoadPlanFile(plan_path, *graph, c->cluster);
  if (!plan.ok()) return Fail(plan.status(), err);
  out << PlanReport(*plan);
  return kExitOk;
}

}  // namespace

int ExitCodeFor(const absl::Status& status) {
  if (status.ok()) return kExitOk;
  if (status.code() == absl::StatusCode::kResourceExhausted ||
      status.code() == absl::StatusCode::kFailedPrecondition) {
    return kExitInfeasible;
  }
  return kExitConfig;
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"meshplan: automatic intra- and inter-operator parallel "
               "planning on a device mesh"};
  app.require_subcommand(1);

  RunFlags plan_flags, sim_flags, cover_flags, sweep_flags, report_flags;
  CLI::App* plan = app.add_subcommand("plan", "Plan a pipeline");
  plan_flags.Add(plan);

  CLI::App* simulate =
      app.add_subcommand("simulate", "Simulate a plan's instruction program");
  sim_flags.Add(simulate);
  SimFlags sim;
  simulate->add_option("--plan", sim.plan, "Plan JSON file")->required();
  simulate->add_flag("--zero-transfer", sim.zero_transfer,
                     "Inter-stage messages take no time");
  simulate->add_option("--gantt", sim.gantt, "Also write Gantt data here");
  simulate->add_option("--program", sim.program,
                       "Also write the instruction program here");
  sim.device_memory_opt = simulate->add_option(
      "--device-memory", sim.device_memory,
      "Simulated per-device memory limit in bytes (default: the cluster's)");

  CLI::App* cover = app.add_subcommand("cover", "Tile the cluster mesh");
  cover_flags.Add(cover);
  CoverFlags cf;
  cf.hosts_opt = cover->add_option("--hosts", cf.hosts, "Host count");
  cf.devices_opt =
      cover->add_option("--devices", cf.devices, "Devices per host");
  cover->add_option("--shapes", cf.shapes, "Pieces, e.g. 1x2,2x4")
      ->required();

  CLI::App* sweep = app.add_subcommand("sweep-b", "Plan for each B in a list");
  sweep_flags.Add(sweep);

  CLI::App* report = app.add_subcommand("report", "Summarize a plan file");
  report_flags.Add(report);
  std::string report_plan;
  report->add_option("--plan", report_plan, "Plan JSON file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (plan->parsed()) return CmdPlan(plan_flags, out, err);
  if (simulate->parsed()) return CmdSimulate(sim_flags, sim, out, err);
  if (cover->parsed()) return CmdCover(cover_flags, cf, out, err);
  if (sweep->parsed()) return CmdSweep(sweep_flags, out, err);
  return CmdReport(report_flags, report_plan, out, err);
}

}  // namespace meshplan
