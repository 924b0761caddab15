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

#include "meshplan/simulator.h"

#include <algorithm>
#include <optional>

#include "absl/strings/str_cat.h"

namespace meshplan {

absl::StatusOr<SimResult> Simulate(const InstructionProgram& program,
                                   const SimOptions& options) {
  if (auto st = ValidateProgram(program); !st.ok()) return st;
  const size_t meshes = program.meshes.size();
  std::vector<size_t> pc(meshes, 0);
  std::vector<Seconds> clock(meshes, Seconds::Zero());
  std::vector<int64_t> mem(meshes, 0);
  std::vector<int> inflight(meshes, 0);
  std::vector<std::optional<Seconds>> arrival(program.messages.size());

  SimResult result;
  result.busy.assign(meshes, Seconds::Zero());
  result.peak_inflight.assign(meshes, 0);
  std::vector<int64_t> peak(meshes, 0);

  auto at_sync = [&](size_t k) {
    return pc[k] < program.meshes[k].instructions.size() &&
           program.meshes[k].instructions[pc[k]].op == Opcode::kSync;
  };

  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t k = 0; k < meshes; ++k) {
      const std::vector<Instruction>& list = program.meshes[k].instructions;
      while (pc[k] < list.size()) {
        const Instruction& in = list[pc[k]];
        TraceEvent ev{static_cast<int>(k), static_cast<int>(pc[k]),
                      in.ToString(), clock[k], clock[k]};
        if (in.op == Opcode::kRecv) {
          if (!arrival[in.message]) break;
          clock[k] = Max(clock[k], *arrival[in.message]);
        } else if (in.op == Opcode::kSync) {
          bool all = true;
          for (size_t o = 0; o < meshes; ++o) all = all && at_sync(o);
          if (!all) break;
          Seconds t = Seconds::Zero();
          for (size_t o = 0; o < meshes; ++o) t = Max(t, clock[o]);
          for (size_t o = 0; o < meshes; ++o) {
            result.trace.push_back({static_cast<int>(o),
                                    static_cast<int>(pc[o]), "Sync", clock[o],
                                    t});
            clock[o] = t;
            ++pc[o];
          }
          progress = true;
          continue;
        } else if (in.op == Opcode::kSend) {
          const Message& m = program.messages[in.message];
          arrival[in.message] =
              clock[k] + (options.zero_transfer ? Seconds::Zero()
                                                : m.transfer_time);
        } else if (in.op == Opcode::kCompute || in.op == Opcode::kAllGather) {
          const Seconds d = in.op == Opcode::kAllGather && options.zero_transfer
                                ? Seconds::Zero()
                                : in.duration;
          clock[k] += d;
          result.busy[k] += d;
        } else if (in.op == Opcode::kAlloc) {
          mem[k] += in.bytes;
          if (in.microbatch >= 0) {
            result.peak_inflight[k] =
                std::max(result.peak_inflight[k], ++inflight[k]);
          }
          peak[k] = std::max(peak[k], mem[k]);
          if (options.device_memory > 0 && mem[k] > options.device_memory) {
            const int device = program.meshes[k].devices.empty()
                                   ? -1
                                   : program.meshes[k].devices.front();
            return absl::ResourceExhaustedError(absl::StrCat(
                "out of memory on device ", device, " (mesh ", k,
                ") at instruction ", pc[k], " ", in.ToString(), ": ", mem[k],
                " bytes live, device memory is ", options.device_memory));
          }
        } else if (in.op == Opcode::kFree) {
          mem[k] -= in.bytes;
          if (in.microbatch >= 0) --inflight[k];
        }
        ev.end = clock[k];
        result.trace.push_back(std::move(ev));
        ++pc[k];
        progress = true;
      }
    }
  }
  // Meshes blocked on a Recv first.
  for (size_t k = 0; k < meshes; ++k) {
    if (pc[k] == program.meshes[k].instructions.size()) continue;
    const Instruction& in = program.meshes[k].instructions[pc[k]];
    if (in.op != Opcode::kRecv) continue;
    const Message& m = program.messages[in.message];
    return absl::FailedPreconditionError(absl::StrCat(
        "deadlock: mesh ", k, " waits at instruction ", pc[k], " ",
        in.ToString(), " for stage ", m.src_stage, " -> stage ", m.dst_stage,
        " microbatch ", m.microbatch, ", whose Send is never reached"));
  }
  for (size_t k = 0; k < meshes; ++k) {
    if (pc[k] == program.meshes[k].instructions.size()) continue;
    const Instruction& in = program.meshes[k].instructions[pc[k]];
    return absl::FailedPreconditionError(absl::StrCat(
        "deadlock: mesh ", k, " stuck at instruction ", pc[k], " ",
        in.ToString()));
  }

  result.makespan = Seconds::Zero();
  for (const TraceEvent& e : result.trace) {
    result.makespan = Max(result.makespan, e.end);
  }
  for (size_t k = 0; k < meshes; ++k) {
    result.utilization.push_back(
        result.makespan > Seconds::Zero()
            ? result.busy[k].ToDouble() / result.makespan.ToDouble()
            : 0.0);
    for (int d : program.meshes[k].devices) result.peak_bytes[d] = peak[k];
  }
  std::stable_sort(result.trace.begin(), result.trace.end(),
                   [](const TraceEvent& a, const TraceEvent& b) {
                     return a.mesh != b.mesh ? a.mesh < b.mesh
                                             : a.index < b.index;
                   });
  return result;
}

nlohmann::json TraceToJson(const SimResult& result) {
  nlohmann::json out;
  out["makespan"] = result.makespan.ToDouble();
  nlohmann::json meshes = nlohmann::json::array();
  for (size_t k = 0; k < result.utilization.size(); ++k) {
    meshes.push_back({{"mesh", k},
                      {"busy", result.busy[k].ToDouble()},
                      {"utilization", result.utilization[k]},
                      {"peak_inflight", result.peak_inflight[k]}});
  }
  out["meshes"] = meshes;
  nlohmann::json peak = nlohmann::json::array();
  for (const auto& [device, bytes] : result.peak_bytes) {
    peak.push_back({{"device", device}, {"bytes", bytes}});
  }
  out["peak_bytes"] = peak;
  nlohmann::json events = nlohmann::json::array();
  for (const TraceEvent& e : result.trace) {
    events.push_back({{"mesh", e.mesh},
                      {"index", e.index},
                      {"label", e.label},
                      {"start", e.start.ToDouble()},
                      {"end", e.end.ToDouble()}});
  }
  out["events"] = events;
  return out;
}

nlohmann::json GanttData(const InstructionProgram& program,
                         const SimResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t k = 0; k < program.meshes.size(); ++k) {
    nlohmann::json spans = nlohmann::json::array();
    for (const TraceEvent& e : result.trace) {
      if (e.mesh != static_cast<int>(k) || !(e.start < e.end)) continue;
      spans.push_back({e.start.ToDouble(), e.end.ToDouble(), e.label});
    }
    for (int d : program.meshes[k].devices) {
      rows.push_back({{"device", d}, {"spans", spans}});
    }
  }
  return {{"rows", rows}};
}

}  // namespace meshplan
