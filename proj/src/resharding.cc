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
#include "meshplan/sharding.h"

namespace meshplan {

absl::StatusOr<std::vector<Collective>> ReshardingCost(
    const ShardingSpec& src, const ShardingSpec& dst, const TensorShape& shape,
    const LogicalMesh& mesh) {
  if (auto st = ValidateSpec(src, shape, mesh); !st.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("resharding source: ", st.message()));
  }
  if (auto st = ValidateSpec(dst, shape, mesh); !st.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat("resharding destination: ", st.message()));
  }
  std::vector<Collective> plan;
  ShardingSpec cur = src;
  for (int axis = 0; axis < 2; ++axis) {
    const AxisSet bit = static_cast<AxisSet>(1 << axis);
    const int from = cur.DimOfAxis(axis);
    const int to = dst.DimOfAxis(axis);
    if (from == to) continue;
    const bool trivial = mesh.extent(axis) == 1;
    if (from >= 0) cur.set_dim(from, cur.dim(from) & ~bit);
    if (to >= 0) cur.set_dim(to, cur.dim(to) | bit);
    if (trivial || from < 0) continue;  // slicing a replicated axis is free
    const CollectiveKind kind =
        to < 0 ? CollectiveKind::kAllGather : CollectiveKind::kAllToAll;
    // The moved or gathered buffer is the current local shard; for a
    // gather that is the post-gather size.
    plan.push_back({kind, cur.LocalBytes(shape, mesh), bit});
  }
  return plan;
}

}  // namespace meshplan
