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

#include "meshplan/cost_model.h"

#include <algorithm>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace meshplan {

std::string Seconds::ToString() const {
  if (is_infinite()) return "inf";
  return absl::StrFormat("%.12gs", ToDouble());
}

std::ostream& operator<<(std::ostream& os, Seconds s) {
  return os << s.ToString();
}

CostModel::CostModel(ClusterMesh cluster, CostConstants constants)
    : cluster_(std::move(cluster)), constants_(constants) {}

double CostModel::alpha() const {
  return constants_.alpha.value_or(cluster_.alpha_latency);
}

absl::StatusOr<Seconds> CostModel::CollectiveTime(
    const Collective& c, const LogicalMesh& mesh) const {
  if (c.axes == kNoAxes || (c.axes & ~kBothAxes) != 0) {
    return absl::InvalidArgumentError(
        absl::StrCat("collective over unknown mesh axes (mask ",
                     static_cast<int>(c.axes), ")"));
  }
  if (c.bytes < 0) {
    return absl::InvalidArgumentError("collective bytes must be >= 0");
  }
  const int d = AxisProduct(c.axes, mesh);
  if (d == 1) return Seconds::Zero();
  double factor = 1.0;
  switch (c.kind) {
    case CollectiveKind::kAllReduce:
      factor = constants_.all_reduce_factor;
      break;
    case CollectiveKind::kAllGather:
      factor = constants_.all_gather_factor;
      break;
    case CollectiveKind::kAllToAll:
      factor = constants_.all_to_all_factor;
      break;
    case CollectiveKind::kReduceScatter:
      factor = constants_.reduce_scatter_factor;
      break;
  }
  double bandwidth = 0;
  bool first = true;
  for (int axis = 0; axis < 2; ++axis) {
    if (!HasAxis(c.axes, axis) || mesh.extent(axis) == 1) continue;
    bandwidth = first ? mesh.axis_bandwidth[axis]
                      : std::min(bandwidth, mesh.axis_bandwidth[axis]);
    first = false;
  }
  const long double volume = static_cast<long double>(factor) * (d - 1) / d *
                             static_cast<long double>(c.bytes);
  return Seconds::FromDouble(alpha() + volume / bandwidth);
}

absl::StatusOr<Seconds> CostModel::CollectivesTime(
    std::span<const Collective> cs, const LogicalMesh& mesh) const {
  Seconds total = Seconds::Zero();
  for (const Collective& c : cs) {
    auto t = CollectiveTime(c, mesh);
    if (!t.ok()) return t.status();
    total += *t;
  }
  return total;
}

Seconds CostModel::ComputeTime(int64_t flop, int device_count) const {
  return Seconds::FromDouble(static_cast<long double>(flop) /
                             (static_cast<long double>(device_count) *
                              cluster_.device_flops));
}

Seconds CostModel::TransferTime(int64_t bytes) const {
  return Seconds::FromDouble(alpha() + static_cast<long double>(bytes) /
                                           cluster_.inter_host_bandwidth);
}

bool MemoryFits(int64_t mem_stage, int64_t mem_act, int inflight,
                int64_t mem_device) {
  return mem_stage + static_cast<int64_t>(inflight) * mem_act <= mem_device;
}

StageMemoryReport StageMemory(const OpGraph& graph, std::span<const int> ops,
                              std::span<const OpLayout> layouts,
                              const LogicalMesh& mesh, int inflight,
                              int64_t mem_device) {
  std::unordered_set<int> in_stage(ops.begin(), ops.end());
  std::vector<bool> kept(graph.size(), false);
  for (const OpNode& n : graph.nodes()) {
    for (const TensorRef& r : n.inputs) {
      if (!in_stage.count(r.node) || graph.node(r.node).is_backward()) continue;
      if (!in_stage.count(n.id) || n.is_backward()) kept[r.node] = true;
    }
  }
  for (int o : graph.outputs()) kept[o] = true;

  StageMemoryReport report;
  int64_t params = 0;
  int64_t working = 0;
  for (size_t i = 0; i < ops.size(); ++i) {
    const OpNode& n = graph.node(ops[i]);
    const OpLayout& layout = layouts[i];
    const int64_t out_bytes = layout.output.LocalBytes(n.out_shape, mesh);
    if (n.kind.type == OpType::kParameter) params += out_bytes;
    if (kept[n.id] && !n.is_backward() && !n.kind.IsSource()) {
      report.mem_act += out_bytes;
    }
    if (n.kind.IsSource()) continue;
    int64_t ws = out_bytes;
    for (size_t k = 0; k < n.inputs.size(); ++k) {
      ws += layout.inputs[k].LocalBytes(graph.node(n.inputs[k].node).out_shape,
                                        mesh);
    }
    working = std::max(working, ws);
  }
  report.mem_stage = params + working;
  report.feasible =
      MemoryFits(report.mem_stage, report.mem_act, inflight, mem_device);
  return report;
}

}  // namespace meshplan
