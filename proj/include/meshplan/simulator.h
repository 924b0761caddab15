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

// Deterministic discrete-event execution of instruction lists.
//
// Each mesh runs its list in order, one instruction at a time. A Send is
// posted without blocking and its message lands transfer_time later; a Recv
// waits for the landing. Compute and AllGather occupy the mesh for their
// duration. Sync waits for every mesh to reach its Sync.

#ifndef MESHPLAN_SIMULATOR_H_
#define MESHPLAN_SIMULATOR_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "meshplan/instructions.h"
#include "meshplan/seconds.h"

namespace meshplan {

struct SimOptions {
  // Messages land instantly and local all-gathers take no time.
  bool zero_transfer = false;
  // Per-device memory limit; <= 0 disables the check.
  int64_t device_memory = 0;
};

struct TraceEvent {
  int mesh = 0;
  int index = 0;  // position in the mesh's list
  std::string label;
  Seconds start;
  Seconds end;
};

struct SimResult {
  Seconds makespan;
  std::vector<double> utilization;  // per mesh: busy / makespan
  std::vector<Seconds> busy;        // per mesh
  std::map<int, int64_t> peak_bytes;  // per device id
  // Peak number of microbatches whose activations were live, per mesh.
  std::vector<int> peak_inflight;
  std::vector<TraceEvent> trace;
};

absl::StatusOr<SimResult> Simulate(const InstructionProgram& program,
                                   const SimOptions& options = {});

// {"makespan": s, "meshes": [...], "events": [...]}.
nlohmann::json TraceToJson(const SimResult& result);

// One row per device: "device <id>" followed by [start, end, label] spans.
nlohmann::json GanttData(const InstructionProgram& program,
                         const SimResult& result);

}  // namespace meshplan

#endif  // MESHPLAN_SIMULATOR_H_
