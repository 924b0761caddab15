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

#include "meshplan/plan_json.h"

#include <algorithm>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace meshplan {
namespace {

using nlohmann::json;

void PutTime(json& obj, const char* key, Seconds s) {
  obj[key] = s.is_finite() ? json(s.ToDouble()) : json("inf");
  obj[absl::StrCat(key, "_ps")] = s.ticks();
}

Seconds GetTime(const json& obj, const char* key) {
  return Seconds::FromTicks(obj.at(absl::StrCat(key, "_ps")).get<int64_t>());
}

json CollectiveJson(const Collective& c) {
  return {{"kind", std::string(CollectiveName(c.kind))},
          {"bytes", c.bytes},
          {"axes", static_cast<int>(c.axes)}};
}

json ReportJson(const StageCostReport& r) {
  json j;
  PutTime(j, "t_total", r.t_total);
  PutTime(j, "t_compute", r.t_compute);
  PutTime(j, "t_comm", r.t_comm);
  PutTime(j, "t_forward", r.t_forward);
  PutTime(j, "t_backward", r.t_backward);
  j["mem_stage"] = r.mem_stage;
  j["mem_act"] = r.mem_act;
  return j;
}

StageCostReport ReportFromJson(const json& j) {
  StageCostReport r;
  r.t_total = GetTime(j, "t_total");
  r.t_compute = GetTime(j, "t_compute");
  r.t_comm = GetTime(j, "t_comm");
  r.t_forward = GetTime(j, "t_forward");
  r.t_backward = GetTime(j, "t_backward");
  r.mem_stage = j.at("mem_stage").get<int64_t>();
  r.mem_act = j.at("mem_act").get<int64_t>();
  return r;
}

}  // namespace

json ClusterToJson(const ClusterMesh& c) {
  return {{"num_hosts", c.num_hosts},
          {"devices_per_host", c.devices_per_host},
          {"intra_host_bandwidth", c.intra_host_bandwidth},
          {"inter_host_bandwidth", c.inter_host_bandwidth},
          {"alpha_latency", c.alpha_latency},
          {"device_flops", c.device_flops},
          {"device_memory", c.device_memory}};
}

json PlanToJson(const PipelinePlan& plan, const OpGraph& graph,
                const ClusterMesh& cluster) {
  json out;
  out["format"] = kPlanFormat;
  out["cluster"] = ClusterToJson(cluster);
  out["graph_nodes"] = graph.size();
  out["num_microbatches"] = plan.num_microbatches;
  out["schedule"] = std::string(ScheduleName(plan.schedule));
  PutTime(out, "t_star", plan.t_star);
  PutTime(out, "t_max", plan.t_max);

  json layers = json::array();
  for (int r = 0; r < plan.clustering.num_layers(); ++r) {
    layers.push_back({{"ops", plan.clustering.layer_ops[r]},
                      {"flop", plan.clustering.layer_flop[r]},
                      {"inbound_bytes", plan.clustering.inbound_bytes[r]}});
  }
  out["layers"] = layers;

  json stages = json::array();
  for (const StagePlan& s : plan.stages) {
    json st;
    st["layers"] = {s.layer_begin, s.layer_end};
    st["ops"] = s.ops;
    st["shape"] = {{"n", s.shape.n}, {"m", s.shape.m}};
    st["rectangle"] = {{"host_begin", s.assignment.host_begin},
                       {"host_end", s.assignment.host_end},
                       {"device_begin", s.assignment.device_begin},
                       {"device_end", s.assignment.device_end}};
    st["view"] = {{"rows", s.placed.mesh.rows},
                  {"cols", s.placed.mesh.cols},
                  {"axis_bandwidth",
                   {s.placed.mesh.axis_bandwidth[0],
                    s.placed.mesh.axis_bandwidth[1]}}};
    st["devices"] = s.placed.device_ids;
    st["inflight"] = s.inflight;
    st["report"] = ReportJson(s.report);
    json ilp;
    PutTime(ilp, "objective", s.intra.objective);
    ilp["certified"] = s.intra.certified;
    ilp["explored"] = s.intra.explored;
    ilp["nodes"] = s.intra.ilp_nodes;
    ilp["edges"] = s.intra.ilp_edges;
    st["ilp"] = ilp;
    json layouts = json::array();
    for (size_t i = 0; i < s.intra.layouts.size(); ++i) {
      const OpLayout& l = s.intra.layouts[i];
      json inputs = json::array();
      for (const ShardingSpec& in : l.inputs) inputs.push_back(in.ToString());
      json comm = json::array();
      for (const Collective& c : l.comm) comm.push_back(CollectiveJson(c));
      json lj = {{"op", l.op},
                 {"algorithm", l.algorithm},
                 {"output", l.output.ToString()},
                 {"inputs", inputs},
                 {"comm", comm}};
      PutTime(lj, "comm_time", s.intra.op_comm[i]);
      layouts.push_back(std::move(lj));
    }
    st["layouts"] = layouts;
    json reshards = json::array();
    for (const EdgeReshard& r : s.intra.reshards) {
      json cs = json::array();
      for (const Collective& c : r.collectives) cs.push_back(CollectiveJson(c));
      reshards.push_back({{"producer", r.producer},
                          {"consumer", r.consumer},
                          {"slot", r.slot},
                          {"collectives", cs}});
    }
    st["reshards"] = reshards;
    json rewrites = json::array();
    for (const RewriteNote& r : s.intra.rewrites) {
      rewrites.push_back({{"op", r.op},
                          {"original", CollectiveJson(r.original)},
                          {"reduce_scatter", CollectiveJson(r.reduce_scatter)},
                          {"all_gather", CollectiveJson(r.all_gather)}});
    }
    st["rewrites"] = rewrites;
    stages.push_back(std::move(st));
  }
  out["stages"] = stages;
  out["stats"] = {{"t_max_candidates", plan.stats.t_max_candidates},
                  {"t_max_evaluated", plan.stats.t_max_evaluated},
                  {"stage_evaluations", plan.stats.stage_evaluations},
                  {"solver_nodes", plan.stats.solver_nodes},
                  {"all_certified", plan.stats.all_certified}};
  return out;
}

absl::StatusOr<PipelinePlan> PlanFromJson(const json& doc,
                                          const OpGraph& graph,
                                          const ClusterMesh& cluster) {
  PipelinePlan plan;
  try {
    if (!doc.is_object() || doc.value("format", "") != kPlanFormat) {
      return absl::InvalidArgumentError(
          absl::StrCat("not a plan document (expected format ", kPlanFormat,
                       ")"));
    }
    if (doc.at("cluster") != ClusterToJson(cluster)) {
      return absl::InvalidArgumentError(
          "plan was made for a different cluster configuration");
    }
    if (doc.at("graph_nodes").get<int>() != graph.size()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "plan was made for a graph with ", doc.at("graph_nodes").get<int>(),
          " nodes, this graph has ", graph.size()));
    }
    plan.num_microbatches = doc.at("num_microbatches").get<int>();
    auto schedule = ParseSchedule(doc.at("schedule").get<std::string>());
    if (!schedule.ok()) return schedule.status();
    plan.schedule = *schedule;
    plan.t_star = GetTime(doc, "t_star");
    plan.t_max = GetTime(doc, "t_max");
    for (const json& l : doc.at("layers")) {
      plan.clustering.layer_ops.push_back(l.at("ops").get<std::vector<int>>());
      plan.clustering.layer_flop.push_back(l.at("flop").get<int64_t>());
      plan.clustering.inbound_bytes.push_back(
          l.at("inbound_bytes").get<int64_t>());
    }
    std::vector<int> placed(graph.size(), 0);
    for (const json& st : doc.at("stages")) {
      StagePlan s;
      s.layer_begin = st.at("layers").at(0).get<int>();
      s.layer_end = st.at("layers").at(1).get<int>();
      s.ops = st.at("ops").get<std::vector<int>>();
      s.shape = {st.at("shape").at("n").get<int>(),
                 st.at("shape").at("m").get<int>()};
      const json& rect = st.at("rectangle");
      s.assignment.shape = s.shape;
      s.assignment.host_begin = rect.at("host_begin").get<int>();
      s.assignment.host_end = rect.at("host_end").get<int>();
      s.assignment.device_begin = rect.at("device_begin").get<int>();
      s.assignment.device_end = rect.at("device_end").get<int>();
      const json& view = st.at("view");
      s.placed.mesh.rows = view.at("rows").get<int>();
      s.placed.mesh.cols = view.at("cols").get<int>();
      s.placed.mesh.axis_bandwidth = {
          view.at("axis_bandwidth").at(0).get<double>(),
          view.at("axis_bandwidth").at(1).get<double>()};
      s.placed.device_ids = st.at("devices").get<std::vector<int>>();
      if (static_cast<int>(s.placed.device_ids.size()) !=
          s.placed.mesh.num_devices()) {
        return absl::InvalidArgumentError(
            "stage device list does not match its logical view");
      }
      s.inflight = st.at("inflight").get<int>();
      s.report = ReportFromJson(st.at("report"));
      s.intra.mesh = s.placed.mesh;
      s.intra.objective = GetTime(st.at("ilp"), "objective");
      s.intra.certified = st.at("ilp").at("certified").get<bool>();
      s.intra.explored = st.at("ilp").at("explored").get<int64_t>();
      for (const json& lj : st.at("layouts")) {
        OpLayout l;
        l.op = lj.at("op").get<int>();
        l.algorithm = lj.at("algorithm").get<std::string>();
        auto out_spec = ShardingSpec::Parse(lj.at("output").get<std::string>());
        if (!out_spec.ok()) return out_spec.status();
        l.output = *out_spec;
        for (const json& in : lj.at("inputs")) {
          auto spec = ShardingSpec::Parse(in.get<std::string>());
          if (!spec.ok()) return spec.status();
          l.inputs.push_back(*spec);
        }
        s.intra.ops.push_back(l.op);
        s.intra.layouts.push_back(std::move(l));
        s.intra.op_comm.push_back(GetTime(lj, "comm_time"));
      }
      if (s.intra.ops != s.ops ||
          !std::is_sorted(s.ops.begin(), s.ops.end())) {
        return absl::InvalidArgumentError(
            "stage layouts must list the stage ops in ascending order");
      }
      for (size_t i = 0; i < s.ops.size(); ++i) {
        const int op = s.ops[i];
        if (op < 0 || op >= graph.size()) {
          return absl::InvalidArgumentError(
              absl::StrCat("plan references unknown node ", op));
        }
        ++placed[op];
        const OpNode& node = graph.node(op);
        const OpLayout& l = s.intra.layouts[i];
        if (l.inputs.size() != node.inputs.size()) {
          return absl::InvalidArgumentError(absl::StrCat(
              "layout of node ", op, " has the wrong operand count"));
        }
        if (auto st2 = ValidateSpec(l.output, node.out_shape, s.placed.mesh);
            !st2.ok()) {
          return absl::InvalidArgumentError(
              absl::StrCat("node ", op, ": ", st2.message()));
        }
      }
      plan.stages.push_back(std::move(s));
    }
    for (int id = 0; id < graph.size(); ++id) {
      if (placed[id] != 1) {
        return absl::InvalidArgumentError(absl::StrCat(
            "node ", id, " is placed in ", placed[id], " stages"));
      }
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed plan document: ", e.what()));
  }
  return plan;
}

std::string PlanReport(const PipelinePlan& plan) {
  std::string out = absl::StrFormat(
      "pipeline: %d stages, B = %d, schedule %s\n", plan.stages.size(),
      plan.num_microbatches, std::string(ScheduleName(plan.schedule)));
  absl::StrAppendFormat(&out, "T* = %s   t_max = %s\n",
                        plan.t_star.ToString(), plan.t_max.ToString());
  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const StagePlan& s = plan.stages[i];
    absl::StrAppendFormat(
        &out,
        "  stage %d: layers [%d, %d)  %d ops  submesh %s  view %s  devices "
        "%d..%d\n"
        "           t = %s (fwd %s, bwd %s; comm %s)  mem %d + %d x %d "
        "bytes\n",
        i, s.layer_begin, s.layer_end, s.ops.size(), s.shape.ToString(),
        s.placed.mesh.ToString(), s.placed.device_ids.front(),
        s.placed.device_ids.back(), s.report.t_total.ToString(),
        s.report.t_forward.ToString(), s.report.t_backward.ToString(),
        s.report.t_comm.ToString(), s.report.mem_stage, s.inflight,
        s.report.mem_act);
  }
  absl::StrAppendFormat(
      &out, "search: %d t_max candidates, %d evaluated, %d stage solves%s\n",
      plan.stats.t_max_candidates, plan.stats.t_max_evaluated,
      plan.stats.stage_evaluations,
      plan.stats.all_certified ? "" : " (some ILPs not certified optimal)");
  return out;
}

}  // namespace meshplan
