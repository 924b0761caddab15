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

// Operator clustering into L contiguous layers.

#ifndef MESHPLAN_CLUSTERING_H_
#define MESHPLAN_CLUSTERING_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/graph.h"

namespace meshplan {

struct LayerClustering {
  // Layer r covers chain positions [boundaries[r], boundaries[r + 1]).
  std::vector<int> boundaries;
  // Node ids per layer, forward ops plus the backward ops colocated with
  // them, ascending.
  std::vector<std::vector<int>> layer_ops;
  std::vector<int64_t> layer_flop;     // forward FLOP
  std::vector<int64_t> inbound_bytes;  // C of each layer
  int64_t bottleneck = 0;              // max inbound bytes

  int num_layers() const { return static_cast<int>(layer_flop.size()); }
};

// Bytes entering chain positions [i, k] (0-based, inclusive).
using InboundFn = std::function<int64_t(int i, int k)>;

// Two-pass DP over a chain with per-position FLOP. Pass one finds the least
// achievable maximum inbound bytes; pass two picks, among partitions reaching
// it, the one with least sum of squared layer FLOP. Every layer satisfies
// flop * L <= (1 + delta) * total. Ties go to the earliest split point.
absl::StatusOr<LayerClustering> ClusterChain(const std::vector<int64_t>& flop,
                                             const InboundFn& inbound,
                                             int num_layers, double delta);

// Forward ops in id order form the chain. A range's inbound bytes are the
// distinct tensors it reads from earlier positions plus the Input tensors it
// contains. Backward ops join the layer of the forward op they colocate with.
absl::StatusOr<LayerClustering> ClusterOperators(const OpGraph& graph,
                                                 int num_layers, double delta);

// Forward ops in id order.
std::vector<int> ForwardChain(const OpGraph& graph);

}  // namespace meshplan

#endif  // MESHPLAN_CLUSTERING_H_
