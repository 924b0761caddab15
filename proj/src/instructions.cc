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

#include "meshplan/instructions.h"

#include <algorithm>
#include <map>
#include <tuple>

#include "absl/strings/str_cat.h"
#include "meshplan/cross_mesh.h"

namespace meshplan {
namespace {

using nlohmann::json;

// (src stage, dst stage, produced in backward, first used in backward).
using GroupKey = std::tuple<int, int, bool, bool>;

const OpLayout& LayoutOf(const StagePlan& stage, int op) {
  auto it = std::lower_bound(stage.intra.ops.begin(), stage.intra.ops.end(), op);
  return stage.intra.layouts[it - stage.intra.ops.begin()];
}

std::vector<std::pair<int, bool>> ComputeOrder(Schedule schedule, int stage,
                                               int num_stages, int B,
                                               bool has_backward) {
  std::vector<std::pair<int, bool>> order;
  if (!has_backward) {
    for (int b = 0; b < B; ++b) order.push_back({b, false});
    return order;
  }
  if (schedule == Schedule::kGpipe) {
    for (int b = 0; b < B; ++b) order.push_back({b, false});
    for (int b = 0; b < B; ++b) order.push_back({b, true});
    return order;
  }
  const int warmup = std::min(num_stages - stage - 1, B);
  for (int b = 0; b < warmup; ++b) order.push_back({b, false});
  for (int j = 0; j + warmup < B; ++j) {
    order.push_back({warmup + j, false});
    order.push_back({j, true});
  }
  for (int b = std::max(0, B - warmup); b < B; ++b) order.push_back({b, true});
  return order;
}

json SecondsJson(Seconds s) { return s.ToDouble(); }

}  // namespace

std::string_view OpcodeName(Opcode op) {
  switch (op) {
    case Opcode::kAlloc:
      return "Alloc";
    case Opcode::kRecv:
      return "Recv";
    case Opcode::kAllGather:
      return "AllGather";
    case Opcode::kCompute:
      return "Compute";
    case Opcode::kSend:
      return "Send";
    case Opcode::kFree:
      return "Free";
    case Opcode::kSync:
      return "Sync";
  }
  return "?";
}

std::string Instruction::ToString() const {
  const std::string name(OpcodeName(op));
  switch (op) {
    case Opcode::kAlloc:
    case Opcode::kFree:
      return absl::StrCat(name, "(", bytes, ")");
    case Opcode::kRecv:
    case Opcode::kSend:
    case Opcode::kAllGather:
      return absl::StrCat(name, "(m", message, ")");
    case Opcode::kCompute:
      return absl::StrCat(name, "(", stage, ",", microbatch, ",",
                          backward ? "bwd" : "fwd", ")");
    case Opcode::kSync:
      return name;
  }
  return name;
}

absl::StatusOr<InstructionProgram> EmitInstructions(const OpGraph& graph,
                                                    const PipelinePlan& plan,
                                                    const CostModel& cost_model,
                                                    Schedule schedule) {
  const int S = static_cast<int>(plan.stages.size());
  const int B = plan.num_microbatches;
  if (S == 0) return absl::InvalidArgumentError("plan has no stages");
  std::vector<int> stage_of(graph.size(), -1);
  for (int s = 0; s < S; ++s) {
    for (int op : plan.stages[s].ops) {
      if (op < 0 || op >= graph.size()) {
        return absl::InvalidArgumentError(
            absl::StrCat("plan references unknown node ", op));
      }
      stage_of[op] = s;
    }
  }
  for (int id = 0; id < graph.size(); ++id) {
    if (stage_of[id] < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("plan does not place node ", id));
    }
  }

  InstructionProgram prog;
  prog.schedule = schedule;
  prog.num_microbatches = B;
  prog.has_backward = graph.HasBackward();

  // Boundary tensors grouped by direction and phase.
  struct Group {
    std::vector<BoundaryTensor> tensors;
    std::map<std::pair<int, int>, int64_t> pair_bytes;
    Seconds all_gather_time;
  };
  std::map<GroupKey, Group> groups;
  for (int s = 0; s + 1 < S; ++s) {
    groups[{s, s + 1, false, false}];
    if (prog.has_backward) groups[{s + 1, s, true, true}];
  }
  std::map<std::pair<int, int>, bool> seen;  // (producer, dst stage)
  for (int q = 0; q < S; ++q) {
    const StagePlan& dst = plan.stages[q];
    for (int c : dst.ops) {
      const OpNode& node = graph.node(c);
      for (size_t slot = 0; slot < node.inputs.size(); ++slot) {
        const int p = node.inputs[slot].node;
        const int sp = stage_of[p];
        if (sp == q || seen.count({p, q})) continue;
        seen[{p, q}] = true;
        bool for_backward = true;
        for (int c2 : dst.ops) {
          const OpNode& n2 = graph.node(c2);
          if (n2.is_backward()) continue;
          for (const TensorRef& r : n2.inputs) {
            if (r.node == p) for_backward = false;
          }
        }
        const StagePlan& src = plan.stages[sp];
        const TensorShape& shape = graph.node(p).out_shape;
        const ShardingSpec& src_spec = LayoutOf(src, p).output;
        const ShardingSpec& dst_spec = LayoutOf(dst, c).inputs[slot];
        auto opt = LocalAllGatherPlan(shape, src_spec, src.placed, dst_spec,
                                      dst.placed);
        if (!opt.ok()) return opt.status();
        auto naive = NaiveCrossMeshPlan(shape, src_spec, src.placed, dst_spec,
                                        dst.placed);
        if (!naive.ok()) return naive.status();
        Group& g = groups[{sp, q, graph.node(p).is_backward(), for_backward}];
        g.tensors.push_back({p, c, shape.ByteSize(), opt->inter_mesh_bytes,
                             naive->inter_mesh_bytes,
                             static_cast<int>(opt->all_gathers.size())});
        for (const TileTransfer& t : opt->transfers) {
          g.pair_bytes[{t.src_device, t.dst_device}] += t.bytes;
        }
        if (!opt->all_gathers.empty()) {
          auto t = cost_model.CollectiveTime(
              {CollectiveKind::kAllGather, opt->all_gathers[0].bytes,
               opt->replication_axes},
              dst.placed.mesh);
          if (!t.ok()) return t.status();
          g.all_gather_time += *t;
        }
      }
    }
  }

  for (const auto& [key, g] : groups) {
    const auto& [src, dst, bwd, for_bwd] = key;
    Message proto;
    proto.src_stage = src;
    proto.dst_stage = dst;
    proto.backward = bwd;
    proto.for_backward = for_bwd;
    proto.tensors = g.tensors;
    proto.transfer_time = Seconds::Zero();
    for (const auto& [pair, bytes] : g.pair_bytes) {
      proto.bytes += bytes;
      proto.transfer_time =
          Max(proto.transfer_time, cost_model.TransferTime(bytes));
    }
    proto.all_gather_time = g.all_gather_time;
    for (int b = 0; b < B; ++b) {
      Message m = proto;
      m.microbatch = b;
      prog.messages.push_back(std::move(m));
    }
  }

  for (int k = 0; k < S; ++k) {
    const StagePlan& stage = plan.stages[k];
    MeshProgram mp;
    mp.stage = k;
    mp.devices = stage.placed.device_ids;
    auto& out = mp.instructions;
    out.push_back({Opcode::kAlloc, k, -1, false, -1, stage.report.mem_stage});
    for (const auto& [b, bwd] :
         ComputeOrder(schedule, k, S, B, prog.has_backward)) {
      for (size_t m = 0; m < prog.messages.size(); ++m) {
        const Message& msg = prog.messages[m];
        if (msg.dst_stage != k || msg.microbatch != b ||
            msg.for_backward != bwd) {
          continue;
        }
        out.push_back({Opcode::kRecv, k, b, bwd, static_cast<int>(m)});
        if (msg.all_gather_time > Seconds::Zero()) {
          Instruction ag{Opcode::kAllGather, k, b, bwd, static_cast<int>(m)};
          ag.duration = msg.all_gather_time;
          out.push_back(ag);
        }
      }
      if (!bwd) {
        out.push_back({Opcode::kAlloc, k, b, false, -1, stage.report.mem_act});
      }
      Instruction compute{Opcode::kCompute, k, b, bwd};
      compute.duration = bwd ? stage.report.t_backward : stage.report.t_forward;
      out.push_back(compute);
      for (size_t m = 0; m < prog.messages.size(); ++m) {
        const Message& msg = prog.messages[m];
        if (msg.src_stage != k || msg.microbatch != b || msg.backward != bwd) {
          continue;
        }
        out.push_back({Opcode::kSend, k, b, bwd, static_cast<int>(m)});
      }
      if (bwd || !prog.has_backward) {
        out.push_back({Opcode::kFree, k, b, bwd, -1, stage.report.mem_act});
      }
    }
    out.push_back({Opcode::kSync, k});
    out.push_back({Opcode::kFree, k, -1, false, -1, stage.report.mem_stage});
    prog.meshes.push_back(std::move(mp));
  }
  return prog;
}

absl::Status ValidateProgram(const InstructionProgram& program) {
  const size_t n = program.messages.size();
  std::vector<int> sends(n, 0), recvs(n, 0);
  for (const MeshProgram& mp : program.meshes) {
    std::map<std::pair<int, bool>, bool> computed;
    int64_t live = 0;
    for (const Instruction& in : mp.instructions) {
      if (in.op == Opcode::kSend || in.op == Opcode::kRecv ||
          in.op == Opcode::kAllGather) {
        if (in.message < 0 || size_t(in.message) >= n) {
          return absl::InvalidArgumentError(absl::StrCat(
              "mesh ", mp.stage, ": ", in.ToString(), " names no message"));
        }
      }
      switch (in.op) {
        case Opcode::kCompute:
          computed[{in.microbatch, in.backward}] = true;
          break;
        case Opcode::kSend: {
          const Message& m = program.messages[in.message];
          ++sends[in.message];
          if (m.src_stage != mp.stage ||
              !computed.count({m.microbatch, m.backward})) {
            return absl::FailedPreconditionError(absl::StrCat(
                "mesh ", mp.stage, ": ", in.ToString(),
                " is not preceded by the compute producing it"));
          }
          break;
        }
        case Opcode::kRecv:
          ++recvs[in.message];
          if (program.messages[in.message].dst_stage != mp.stage) {
            return absl::FailedPreconditionError(absl::StrCat(
                "mesh ", mp.stage, ": ", in.ToString(),
                " receives a message addressed elsewhere"));
          }
          break;
        case Opcode::kAlloc:
          live += in.bytes;
          break;
        case Opcode::kFree:
          live -= in.bytes;
          if (live < 0) {
            return absl::FailedPreconditionError(absl::StrCat(
                "mesh ", mp.stage, ": ", in.ToString(),
                " frees memory that was never allocated"));
          }
          break;
        default:
          break;
      }
    }
    if (live != 0) {
      return absl::FailedPreconditionError(
          absl::StrCat("mesh ", mp.stage, " leaks ", live, " bytes"));
    }
  }
  for (size_t m = 0; m < n; ++m) {
    if (sends[m] != 1 || recvs[m] != 1) {
      const Message& msg = program.messages[m];
      return absl::FailedPreconditionError(absl::StrCat(
          "message m", m, " (stage ", msg.src_stage, " -> stage ",
          msg.dst_stage, ", microbatch ", msg.microbatch, ") has ", sends[m],
          " sends and ", recvs[m], " receives"));
    }
  }
  return absl::OkStatus();
}

nlohmann::json ProgramToJson(const InstructionProgram& program) {
  json out;
  out["schedule"] = std::string(ScheduleName(program.schedule));
  out["num_microbatches"] = program.num_microbatches;
  out["has_backward"] = program.has_backward;
  json messages = json::array();
  for (size_t m = 0; m < program.messages.size(); ++m) {
    const Message& msg = program.messages[m];
    json tensors = json::array();
    for (const BoundaryTensor& t : msg.tensors) {
      tensors.push_back({{"producer", t.producer},
                         {"consumer", t.consumer},
                         {"tensor_bytes", t.tensor_bytes},
                         {"inter_mesh_bytes", t.inter_mesh_bytes},
                         {"naive_bytes", t.naive_bytes},
                         {"all_gather_groups", t.all_gather_groups}});
    }
    messages.push_back({{"id", m},
                        {"src_stage", msg.src_stage},
                        {"dst_stage", msg.dst_stage},
                        {"microbatch", msg.microbatch},
                        {"backward", msg.backward},
                        {"for_backward", msg.for_backward},
                        {"bytes", msg.bytes},
                        {"transfer_time", SecondsJson(msg.transfer_time)},
                        {"all_gather_time", SecondsJson(msg.all_gather_time)},
                        {"tensors", tensors}});
  }
  out["messages"] = messages;
  json meshes = json::array();
  for (const MeshProgram& mp : program.meshes) {
    json list = json::array();
    for (const Instruction& in : mp.instructions) {
      json j = {{"op", std::string(OpcodeName(in.op))}};
      switch (in.op) {
        case Opcode::kAlloc:
        case Opcode::kFree:
          j["bytes"] = in.bytes;
          break;
        case Opcode::kRecv:
        case Opcode::kSend:
          j["message"] = in.message;
          break;
        case Opcode::kAllGather:
          j["message"] = in.message;
          j["duration"] = SecondsJson(in.duration);
          break;
        case Opcode::kCompute:
          j["stage"] = in.stage;
          j["microbatch"] = in.microbatch;
          j["phase"] = in.backward ? "bwd" : "fwd";
          j["duration"] = SecondsJson(in.duration);
          break;
        case Opcode::kSync:
          break;
      }
      list.push_back(std::move(j));
    }
    meshes.push_back(
        {{"stage", mp.stage}, {"devices", mp.devices}, {"instructions", list}});
  }
  out["meshes"] = meshes;
  return out;
}

}  // namespace meshplan
