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

// Tensor movement between two disjoint device meshes.

#ifndef MESHPLAN_CROSS_MESH_H_
#define MESHPLAN_CROSS_MESH_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"
#include "meshplan/graph.h"
#include "meshplan/mesh.h"
#include "meshplan/sharding.h"

namespace meshplan {

// Half-open box [lo[d], hi[d]) in element coordinates.
struct Region {
  std::vector<int64_t> lo;
  std::vector<int64_t> hi;

  bool empty() const;
  int64_t NumElements() const;
  bool operator==(const Region&) const = default;
  bool operator<(const Region& o) const {
    return lo != o.lo ? lo < o.lo : hi < o.hi;
  }
};

// Intersection; empty when disjoint.
Region Intersect(const Region& a, const Region& b);

// The tile each device of `placed` holds, index-aligned with device_ids.
std::vector<Region> DeviceTiles(const TensorShape& shape,
                                const ShardingSpec& spec,
                                const PlacedMesh& placed);

struct TileTransfer {
  int src_device = 0;
  int dst_device = 0;
  Region region;
  int64_t bytes = 0;
};

// Replica group on the destination mesh completing its tile by all-gather.
struct LocalAllGather {
  std::vector<int> devices;  // ascending logical order
  Region region;             // the full tile every member ends with
  int64_t bytes = 0;         // bytes of that tile
};

struct CrossMeshPlan {
  std::vector<TileTransfer> transfers;
  std::vector<LocalAllGather> all_gathers;
  int64_t inter_mesh_bytes = 0;
  // Bytes received by each destination device, index-aligned with the
  // destination device_ids.
  std::vector<int64_t> received_bytes;
  // Replication mesh axes of the destination spec with extent > 1
  // (kNoAxes when none).
  AxisSet replication_axes = kNoAxes;
};

// Point-to-point plan: every destination device fetches each overlapping
// source tile from its lowest-id holder.
absl::StatusOr<CrossMeshPlan> NaiveCrossMeshPlan(const TensorShape& shape,
                                                 const ShardingSpec& src_spec,
                                                 const PlacedMesh& src,
                                                 const ShardingSpec& dst_spec,
                                                 const PlacedMesh& dst);

// Destination devices holding identical tiles form a replica group. The
// tile is cut into one slab per member along the first dim with extent at
// least the group size (else the longest dim); each member receives its slab
// over the inter-mesh link and a local all-gather completes the tile.
absl::StatusOr<CrossMeshPlan> LocalAllGatherPlan(const TensorShape& shape,
                                                 const ShardingSpec& src_spec,
                                                 const PlacedMesh& src,
                                                 const ShardingSpec& dst_spec,
                                                 const PlacedMesh& dst);

// Replays the plan element by element and checks that every destination
// device ends with exactly its tile and that every sent region was held by
// its sender.
bool VerifyMaterialization(const TensorShape& shape,
                           const ShardingSpec& src_spec, const PlacedMesh& src,
                           const ShardingSpec& dst_spec, const PlacedMesh& dst,
                           const CrossMeshPlan& plan);

}  // namespace meshplan

#endif  // MESHPLAN_CROSS_MESH_H_
