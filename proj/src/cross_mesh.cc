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

#include "meshplan/cross_mesh.h"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>

#include "absl/strings/str_cat.h"

namespace meshplan {
namespace {

absl::Status CheckInputs(const TensorShape& shape, const ShardingSpec& src_spec,
                         const PlacedMesh& src, const ShardingSpec& dst_spec,
                         const PlacedMesh& dst) {
  if (auto st = ValidateSpec(src_spec, shape, src.mesh); !st.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("source spec: ", st.message()));
  }
  if (auto st = ValidateSpec(dst_spec, shape, dst.mesh); !st.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("destination spec: ", st.message()));
  }
  const std::set<int> a(src.device_ids.begin(), src.device_ids.end());
  for (int d : dst.device_ids) {
    if (a.count(d)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "source and destination meshes overlap on device ", d));
    }
  }
  return absl::OkStatus();
}

// Distinct source tiles and their lowest-id holder.
std::map<Region, int> SourceHolders(const TensorShape& shape,
                                    const ShardingSpec& spec,
                                    const PlacedMesh& src) {
  std::map<Region, int> holders;
  const std::vector<Region> tiles = DeviceTiles(shape, spec, src);
  for (size_t i = 0; i < tiles.size(); ++i) {
    auto [it, inserted] = holders.emplace(tiles[i], src.device_ids[i]);
    if (!inserted) it->second = std::min(it->second, src.device_ids[i]);
  }
  return holders;
}

void Fetch(const TensorShape& shape, const std::map<Region, int>& holders,
           const Region& want, int dst_device, CrossMeshPlan& plan,
           int64_t& received) {
  for (const auto& [tile, holder] : holders) {
    Region overlap = Intersect(tile, want);
    if (overlap.empty()) continue;
    const int64_t bytes = overlap.NumElements() * shape.elem_bytes;
    plan.transfers.push_back({holder, dst_device, std::move(overlap), bytes});
    plan.inter_mesh_bytes += bytes;
    received += bytes;
  }
}

AxisSet NontrivialReplication(const ShardingSpec& spec, const LogicalMesh& m) {
  AxisSet axes = ReplicationMeshAxes(spec);
  for (int axis = 0; axis < 2; ++axis) {
    if (m.extent(axis) == 1) axes &= static_cast<AxisSet>(~(1 << axis));
  }
  return axes;
}

template <typename Fn>
void ForEachElement(const TensorShape& shape, const Region& r, Fn fn) {
  if (r.empty()) return;
  const int rank = shape.rank();
  std::vector<int64_t> idx = r.lo;
  while (true) {
    int64_t linear = 0;
    for (int d = 0; d < rank; ++d) linear = linear * shape.dims[d] + idx[d];
    fn(linear);
    int d = rank - 1;
    while (d >= 0 && ++idx[d] == r.hi[d]) {
      idx[d] = r.lo[d];
      --d;
    }
    if (d < 0) return;
  }
}

bool Contains(const Region& outer, const Region& inner) {
  for (size_t d = 0; d < outer.lo.size(); ++d) {
    if (inner.lo[d] < outer.lo[d] || inner.hi[d] > outer.hi[d]) return false;
  }
  return true;
}

}  // namespace

bool Region::empty() const {
  for (size_t d = 0; d < lo.size(); ++d) {
    if (hi[d] <= lo[d]) return true;
  }
  return false;
}

int64_t Region::NumElements() const {
  if (empty()) return 0;
  int64_t n = 1;
  for (size_t d = 0; d < lo.size(); ++d) n *= hi[d] - lo[d];
  return n;
}

Region Intersect(const Region& a, const Region& b) {
  Region r;
  for (size_t d = 0; d < a.lo.size(); ++d) {
    r.lo.push_back(std::max(a.lo[d], b.lo[d]));
    r.hi.push_back(std::max(r.lo.back(), std::min(a.hi[d], b.hi[d])));
  }
  return r;
}

std::vector<Region> DeviceTiles(const TensorShape& shape,
                                const ShardingSpec& spec,
                                const PlacedMesh& placed) {
  const LogicalMesh& m = placed.mesh;
  std::vector<Region> tiles;
  for (int a = 0; a < m.rows; ++a) {
    for (int b = 0; b < m.cols; ++b) {
      Region r;
      for (int d = 0; d < shape.rank(); ++d) {
        const AxisSet axes = spec.dim(d);
        const int64_t shards = AxisProduct(axes, m);
        int64_t index = 0;
        if (axes == kBothAxes) {
          index = int64_t{a} * m.cols + b;
        } else if (axes == kAxis0) {
          index = a;
        } else if (axes == kAxis1) {
          index = b;
        }
        const int64_t size = shape.dims[d] / shards;
        r.lo.push_back(index * size);
        r.hi.push_back((index + 1) * size);
      }
      tiles.push_back(std::move(r));
    }
  }
  return tiles;
}

absl::StatusOr<CrossMeshPlan> NaiveCrossMeshPlan(const TensorShape& shape,
                                                 const ShardingSpec& src_spec,
                                                 const PlacedMesh& src,
                                                 const ShardingSpec& dst_spec,
                                                 const PlacedMesh& dst) {
  if (auto st = CheckInputs(shape, src_spec, src, dst_spec, dst); !st.ok()) {
    return st;
  }
  const std::map<Region, int> holders = SourceHolders(shape, src_spec, src);
  const std::vector<Region> tiles = DeviceTiles(shape, dst_spec, dst);
  CrossMeshPlan plan;
  plan.replication_axes = NontrivialReplication(dst_spec, dst.mesh);
  plan.received_bytes.assign(tiles.size(), 0);
  for (size_t i = 0; i < tiles.size(); ++i) {
    Fetch(shape, holders, tiles[i], dst.device_ids[i], plan,
          plan.received_bytes[i]);
  }
  return plan;
}

absl::StatusOr<CrossMeshPlan> LocalAllGatherPlan(const TensorShape& shape,
                                                 const ShardingSpec& src_spec,
                                                 const PlacedMesh& src,
                                                 const ShardingSpec& dst_spec,
                                                 const PlacedMesh& dst) {
  if (auto st = CheckInputs(shape, src_spec, src, dst_spec, dst); !st.ok()) {
    return st;
  }
  const std::map<Region, int> holders = SourceHolders(shape, src_spec, src);
  const std::vector<Region> tiles = DeviceTiles(shape, dst_spec, dst);
  CrossMeshPlan plan;
  plan.replication_axes = NontrivialReplication(dst_spec, dst.mesh);
  plan.received_bytes.assign(tiles.size(), 0);

  // Groups in order of their first member.
  std::vector<std::vector<int>> groups;
  std::map<Region, size_t> group_of;
  for (size_t i = 0; i < tiles.size(); ++i) {
    auto [it, inserted] = group_of.emplace(tiles[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(static_cast<int>(i));
  }
  for (const std::vector<int>& members : groups) {
    const Region& tile = tiles[members[0]];
    const int64_t g = static_cast<int64_t>(members.size());
    if (g == 1) {
      Fetch(shape, holders, tile, dst.device_ids[members[0]], plan,
            plan.received_bytes[members[0]]);
      continue;
    }
    int cut = -1;
    for (int d = 0; d < shape.rank() && cut < 0; ++d) {
      if (tile.hi[d] - tile.lo[d] >= g) cut = d;
    }
    if (cut < 0) {
      cut = 0;
      for (int d = 1; d < shape.rank(); ++d) {
        if (tile.hi[d] - tile.lo[d] > tile.hi[cut] - tile.lo[cut]) cut = d;
      }
    }
    const int64_t extent = tile.hi[cut] - tile.lo[cut];
    LocalAllGather ag;
    ag.region = tile;
    ag.bytes = tile.NumElements() * shape.elem_bytes;
    for (int64_t q = 0; q < g; ++q) {
      const int member = members[q];
      ag.devices.push_back(dst.device_ids[member]);
      Region slab = tile;
      slab.lo[cut] = tile.lo[cut] + extent * q / g;
      slab.hi[cut] = tile.lo[cut] + extent * (q + 1) / g;
      if (slab.empty()) continue;
      Fetch(shape, holders, slab, dst.device_ids[member], plan,
            plan.received_bytes[member]);
    }
    plan.all_gathers.push_back(std::move(ag));
  }
  return plan;
}

bool VerifyMaterialization(const TensorShape& shape,
                           const ShardingSpec& src_spec, const PlacedMesh& src,
                           const ShardingSpec& dst_spec, const PlacedMesh& dst,
                           const CrossMeshPlan& plan) {
  const std::vector<Region> src_tiles = DeviceTiles(shape, src_spec, src);
  const std::vector<Region> dst_tiles = DeviceTiles(shape, dst_spec, dst);
  std::unordered_map<int, size_t> src_index, dst_index;
  for (size_t i = 0; i < src.device_ids.size(); ++i) {
    src_index[src.device_ids[i]] = i;
  }
  for (size_t i = 0; i < dst.device_ids.size(); ++i) {
    dst_index[dst.device_ids[i]] = i;
  }
  const int64_t n = shape.NumElements();
  std::vector<std::vector<bool>> held(dst_tiles.size(),
                                      std::vector<bool>(n, false));
  for (const TileTransfer& t : plan.transfers) {
    auto s = src_index.find(t.src_device);
    auto d = dst_index.find(t.dst_device);
    if (s == src_index.end() || d == dst_index.end()) return false;
    if (!Contains(src_tiles[s->second], t.region)) return false;
    if (t.bytes != t.region.NumElements() * shape.elem_bytes) return false;
    ForEachElement(shape, t.region,
                   [&](int64_t e) { held[d->second][e] = true; });
  }
  for (const LocalAllGather& ag : plan.all_gathers) {
    std::vector<bool> merged(n, false);
    for (int dev : ag.devices) {
      auto d = dst_index.find(dev);
      if (d == dst_index.end()) return false;
      ForEachElement(shape, ag.region, [&](int64_t e) {
        if (held[d->second][e]) merged[e] = true;
      });
    }
    for (int dev : ag.devices) {
      ForEachElement(shape, ag.region, [&](int64_t e) {
        if (merged[e]) held[dst_index[dev]][e] = true;
      });
    }
  }
  for (size_t i = 0; i < dst_tiles.size(); ++i) {
    std::vector<bool> want(n, false);
    ForEachElement(shape, dst_tiles[i], [&](int64_t e) { want[e] = true; });
    if (want != held[i]) return false;
  }
  return true;
}

}  // namespace meshplan
