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

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "meshplan/sharding.h"

namespace meshplan {
namespace {

std::string AxesLabel(AxisSet axes) {
  if (axes == kBothAxes) return "{0,1}";
  return HasAxis(axes, 0) ? "0" : "1";
}

std::vector<ParallelAlgorithm> MatmulAlgorithms(const OpGraph& graph,
                                                const OpNode& node,
                                                const LogicalMesh& mesh) {
  const bool batched = node.kind.type == OpType::kBatchedMatmul;
  const TensorShape& lhs = graph.node(node.inputs[0].node).out_shape;
  const TensorShape& rhs = graph.node(node.inputs[1].node).out_shape;
  const int off = batched ? 1 : 0;
  const int lc = node.kind.lhs_contract;
  const int rc = node.kind.rhs_contract;

  // Loop indices in naming order; extents from the operand shapes.
  enum Index { kB, kI, kJ, kK };
  std::vector<Index> indices;
  if (batched) indices.push_back(kB);
  indices.insert(indices.end(), {kI, kJ, kK});
  const char kNames[] = {'b', 'i', 'j', 'k'};
  int64_t extent[4] = {batched ? lhs.dims[0] : 1, lhs.dims[off + 1 - lc],
                       rhs.dims[off + 1 - rc], lhs.dims[off + lc]};

  std::vector<int> usable;
  for (int axis = 0; axis < 2; ++axis) {
    if (mesh.extent(axis) > 1) usable.push_back(axis);
  }

  auto make = [&](const AxisSet mask[4]) {
    ParallelAlgorithm alg;
    alg.op = node.id;
    std::vector<std::string> parts;
    for (Index x : indices) {
      if (mask[x] != kNoAxes) {
        parts.push_back(absl::StrCat(std::string(1, kNames[x]), "->",
                                     AxesLabel(mask[x])));
      }
    }
    alg.name = parts.empty() ? "replicated" : absl::StrJoin(parts, ",");
    std::vector<AxisSet> l, r, o;
    if (batched) {
      l.push_back(mask[kB]);
      r.push_back(mask[kB]);
      o.push_back(mask[kB]);
    }
    if (lc == 1) {
      l.insert(l.end(), {mask[kI], mask[kK]});
    } else {
      l.insert(l.end(), {mask[kK], mask[kI]});
    }
    if (rc == 0) {
      r.insert(r.end(), {mask[kK], mask[kJ]});
    } else {
      r.insert(r.end(), {mask[kJ], mask[kK]});
    }
    o.insert(o.end(), {mask[kI], mask[kJ]});
    alg.output_spec = ShardingSpec(o);
    alg.input_specs = {ShardingSpec(l), ShardingSpec(r)};
    if (mask[kK] != kNoAxes) {
      alg.comm.push_back({CollectiveKind::kAllReduce,
                          alg.output_spec.LocalBytes(node.out_shape, mesh),
                          mask[kK]});
    }
    return alg;
  };

  std::vector<ParallelAlgorithm> algs;
  std::vector<int> choice(usable.size(), 0);
  const int n_idx = static_cast<int>(indices.size());
  while (!usable.empty()) {
    AxisSet mask[4] = {kNoAxes, kNoAxes, kNoAxes, kNoAxes};
    for (size_t u = 0; u < usable.size(); ++u) {
      mask[indices[choice[u]]] |= static_cast<AxisSet>(1 << usable[u]);
    }
    bool divisible = true;
    for (Index x : indices) {
      divisible = divisible && extent[x] % AxisProduct(mask[x], mesh) == 0;
    }
    if (divisible) algs.push_back(make(mask));
    size_t u = 0;
    while (u < usable.size() && ++choice[u] == n_idx) choice[u++] = 0;
    if (u == usable.size()) break;
  }
  if (algs.empty()) {
    // Nothing partitions evenly (or the mesh is a single device).
    const AxisSet none[4] = {kNoAxes, kNoAxes, kNoAxes, kNoAxes};
    algs.push_back(make(none));
  }
  return algs;
}

}  // namespace

absl::StatusOr<std::vector<ParallelAlgorithm>> EnumerateAlgorithms(
    const OpGraph& graph, int node_id, const LogicalMesh& mesh) {
  if (node_id < 0 || node_id >= graph.size()) {
    return absl::InvalidArgumentError(absl::StrCat("unknown node ", node_id));
  }
  const OpNode& node = graph.node(node_id);
  std::vector<ParallelAlgorithm> algs;
  switch (node.kind.type) {
    case OpType::kMatmul:
    case OpType::kBatchedMatmul:
      return MatmulAlgorithms(graph, node, mesh);
    case OpType::kInput:
    case OpType::kParameter:
    case OpType::kElementwise:
      for (ShardingSpec& spec : LegalSpecs(node.out_shape, mesh)) {
        ParallelAlgorithm alg;
        alg.op = node_id;
        alg.name = spec.ToString();
        alg.input_specs.assign(node.inputs.size(), spec);
        alg.output_spec = std::move(spec);
        algs.push_back(std::move(alg));
      }
      return algs;
    case OpType::kReduction: {
      const TensorShape& in = graph.node(node.inputs[0].node).out_shape;
      const int axis = node.kind.axis;
      for (ShardingSpec& spec : LegalSpecs(in, mesh)) {
        std::vector<AxisSet> out_dims = spec.dims();
        out_dims.erase(out_dims.begin() + axis);
        ParallelAlgorithm alg;
        alg.op = node_id;
        alg.name = spec.ToString();
        alg.output_spec = ShardingSpec(out_dims);
        if (spec.dim(axis) != kNoAxes) {
          alg.comm.push_back(
              {CollectiveKind::kAllReduce,
               alg.output_spec.LocalBytes(node.out_shape, mesh),
               spec.dim(axis)});
        }
        alg.input_specs = {std::move(spec)};
        algs.push_back(std::move(alg));
      }
      return algs;
    }
    case OpType::kReshape: {
      const TensorShape& in = graph.node(node.inputs[0].node).out_shape;
      for (ShardingSpec& spec : LegalSpecs(in, mesh)) {
        ShardingSpec out = ShardingSpec::Replicated(node.out_shape.rank());
        bool leading_only = true;
        for (int d = 1; d < spec.rank(); ++d) {
          leading_only = leading_only && spec.dim(d) == kNoAxes;
        }
        if (!leading_only) continue;
        if (spec.dim(0) != kNoAxes) {
          if (node.out_shape.dims[0] % spec.Shards(0, mesh) != 0) continue;
          out.set_dim(0, spec.dim(0));
        }
        ParallelAlgorithm alg;
        alg.op = node_id;
        alg.name = spec.ToString();
        alg.output_spec = std::move(out);
        alg.input_specs = {std::move(spec)};
        algs.push_back(std::move(alg));
      }
      return algs;
    }
  }
  return absl::UnimplementedError(absl::StrCat(
      "node ", node_id, ": no parallel algorithms for ",
      node.kind.ToString()));
}

}  // namespace meshplan
