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

// Sharding-spec algebra, per-operator parallel algorithms and resharding.

#ifndef MESHPLAN_SHARDING_H_
#define MESHPLAN_SHARDING_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "meshplan/graph.h"
#include "meshplan/mesh.h"

namespace meshplan {

// Bit set of logical mesh axes: bit 0 = axis 0, bit 1 = axis 1.
using AxisSet = uint8_t;
inline constexpr AxisSet kNoAxes = 0;
inline constexpr AxisSet kAxis0 = 1;
inline constexpr AxisSet kAxis1 = 2;
inline constexpr AxisSet kBothAxes = 3;

inline bool HasAxis(AxisSet set, int axis) { return (set >> axis) & 1; }

// Number of devices spanned by `axes` on `mesh`.
int AxisProduct(AxisSet axes, const LogicalMesh& mesh);

// Per tensor dim: the mesh axes it is split along (kNoAxes = replicated).
class ShardingSpec {
 public:
  ShardingSpec() = default;
  explicit ShardingSpec(std::vector<AxisSet> dims) : dims_(std::move(dims)) {}
  static ShardingSpec Replicated(int rank) {
    return ShardingSpec(std::vector<AxisSet>(rank, kNoAxes));
  }

  int rank() const { return static_cast<int>(dims_.size()); }
  AxisSet dim(int d) const { return dims_[d]; }
  void set_dim(int d, AxisSet axes) { dims_[d] = axes; }
  const std::vector<AxisSet>& dims() const { return dims_; }

  // Union of axes used by any dim.
  AxisSet UsedAxes() const;
  // The tensor dim split along `axis`, or -1.
  int DimOfAxis(int axis) const;
  // Number of shards along tensor dim d.
  int64_t Shards(int d, const LogicalMesh& mesh) const {
    return AxisProduct(dims_[d], mesh);
  }
  // Per-device bytes of a tensor of `shape` laid out with this spec.
  int64_t LocalBytes(const TensorShape& shape, const LogicalMesh& mesh) const;

  // "RS^0S^1", "S^{01}R".
  std::string ToString() const;
  static absl::StatusOr<ShardingSpec> Parse(std::string_view text);

  bool operator==(const ShardingSpec&) const = default;

 private:
  std::vector<AxisSet> dims_;
};

// Rank match, each axis used at most once, and every split dim divisible by
// its shard count.
absl::Status ValidateSpec(const ShardingSpec& spec, const TensorShape& shape,
                          const LogicalMesh& mesh);

bool SpecEqual(const ShardingSpec& a, const ShardingSpec& b);
bool SpecIsFullyReplicated(const ShardingSpec& spec);
// Mesh axes not used by any split.
AxisSet ReplicationMeshAxes(const ShardingSpec& spec);

// Every valid spec of `shape` that uses only mesh axes of extent > 1.
std::vector<ShardingSpec> LegalSpecs(const TensorShape& shape,
                                     const LogicalMesh& mesh);

enum class CollectiveKind {
  kAllReduce,
  kAllGather,
  kAllToAll,
  kReduceScatter,
};

std::string_view CollectiveName(CollectiveKind kind);

// One collective over the devices spanned by `axes`. For all-gather `bytes`
// is the gathered (result) size per device; otherwise the per-device
// buffer size.
struct Collective {
  CollectiveKind kind = CollectiveKind::kAllReduce;
  int64_t bytes = 0;
  AxisSet axes = kNoAxes;

  bool operator==(const Collective&) const = default;
  std::string ToString() const;
};

// One way to run an operator on a logical mesh.
struct ParallelAlgorithm {
  int op = 0;
  // e.g. "i->0,k->1"; spec-only algorithms are named by their output spec.
  std::string name;
  ShardingSpec output_spec;
  std::vector<ShardingSpec> input_specs;
  std::vector<Collective> comm;
};

// Matmul family: every injective mapping of mesh axes (extent > 1) onto
// loop indices that uses all of them, filtered by divisibility; splitting
// the contraction index all-reduces the local output shard over those axes.
// Elementwise and sources: one algorithm per legal spec. Reduction: one per
// legal input spec, all-reducing when the reduced dim is split. Reshape:
// replicated, or a leading-dim split carried through.
absl::StatusOr<std::vector<ParallelAlgorithm>> EnumerateAlgorithms(
    const OpGraph& graph, int node_id, const LogicalMesh& mesh);

// Collectives converting `src` into `dst`, processing mesh axis 0 then 1:
// an axis dropped by dst is all-gathered, an axis moved between tensor dims
// goes through all-to-all, an axis newly split is a free local slice.
absl::StatusOr<std::vector<Collective>> ReshardingCost(
    const ShardingSpec& src, const ShardingSpec& dst, const TensorShape& shape,
    const LogicalMesh& mesh);

}  // namespace meshplan

#endif  // MESHPLAN_SHARDING_H_
