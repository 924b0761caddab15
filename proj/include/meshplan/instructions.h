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

// Static per-mesh instruction lists for a pipeline plan.
//
// Opcodes:
//   Alloc n       reserve n bytes on every device of the mesh
//   Recv m        block until message m has arrived
//   AllGather m   local all-gather completing the tiles of message m
//   Compute s b   run stage s on microbatch b, forward or backward
//   Send m        post message m; it lands after its transfer time
//   Free n        release n bytes
//   Sync          barrier across all meshes

#ifndef MESHPLAN_INSTRUCTIONS_H_
#define MESHPLAN_INSTRUCTIONS_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/cost_model.h"
#include "meshplan/graph.h"
#include "meshplan/inter_op.h"
#include "json.hpp"

namespace meshplan {

enum class Opcode { kAlloc, kRecv, kAllGather, kCompute, kSend, kFree, kSync };

std::string_view OpcodeName(Opcode op);

struct Instruction {
  Opcode op = Opcode::kSync;
  int stage = -1;
  int microbatch = -1;
  bool backward = false;
  int message = -1;   // Send, Recv, AllGather
  int64_t bytes = 0;  // Alloc, Free
  Seconds duration;   // Compute, AllGather

  std::string ToString() const;
};

// One tensor crossing a stage boundary.
struct BoundaryTensor {
  int producer = 0;
  int consumer = 0;  // first consuming op in the destination stage
  int64_t tensor_bytes = 0;
  int64_t inter_mesh_bytes = 0;
  int64_t naive_bytes = 0;
  int all_gather_groups = 0;
};

struct Message {
  int src_stage = 0;
  int dst_stage = 0;
  int microbatch = 0;
  bool backward = false;          // produced by a backward compute
  bool for_backward = false;      // first consumed by a backward compute
  std::vector<BoundaryTensor> tensors;
  int64_t bytes = 0;              // inter-mesh bytes
  Seconds transfer_time;          // slowest device pair
  Seconds all_gather_time;        // local all-gathers on the destination
};

struct MeshProgram {
  int stage = 0;
  std::vector<int> devices;
  std::vector<Instruction> instructions;
};

struct InstructionProgram {
  Schedule schedule = Schedule::k1F1B;
  int num_microbatches = 1;
  bool has_backward = false;
  std::vector<MeshProgram> meshes;  // index = stage
  std::vector<Message> messages;
};

// Every boundary tensor uses the local all-gather cross-mesh plan. Adjacent
// stages always exchange one message per microbatch and direction, possibly
// empty, so the pipeline is a linear chain.
absl::StatusOr<InstructionProgram> EmitInstructions(const OpGraph& graph,
                                                    const PipelinePlan& plan,
                                                    const CostModel& cost_model,
                                                    Schedule schedule);

// Every message has exactly one Send and one Recv; Compute precedes the
// Sends of its outputs; every Alloc is freed.
absl::Status ValidateProgram(const InstructionProgram& program);

nlohmann::json ProgramToJson(const InstructionProgram& program);

}  // namespace meshplan

#endif  // MESHPLAN_INSTRUCTIONS_H_
