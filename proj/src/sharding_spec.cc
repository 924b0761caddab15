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

int AxisProduct(AxisSet axes, const LogicalMesh& mesh) {
  int p = 1;
  if (HasAxis(axes, 0)) p *= mesh.rows;
  if (HasAxis(axes, 1)) p *= mesh.cols;
  return p;
}

AxisSet ShardingSpec::UsedAxes() const {
  AxisSet used = kNoAxes;
  for (AxisSet a : dims_) used |= a;
  return used;
}

int ShardingSpec::DimOfAxis(int axis) const {
  for (int d = 0; d < rank(); ++d) {
    if (HasAxis(dims_[d], axis)) return d;
  }
  return -1;
}

int64_t ShardingSpec::LocalBytes(const TensorShape& shape,
                                 const LogicalMesh& mesh) const {
  return shape.ByteSize() / AxisProduct(UsedAxes(), mesh);
}

std::string ShardingSpec::ToString() const {
  std::string out;
  for (AxisSet a : dims_) {
    switch (a) {
      case kNoAxes:
        out += "R";
        break;
      case kAxis0:
        out += "S^0";
        break;
      case kAxis1:
        out += "S^1";
        break;
      default:
        out += "S^{01}";
        break;
    }
  }
  return out;
}

absl::StatusOr<ShardingSpec> ShardingSpec::Parse(std::string_view text) {
  std::vector<AxisSet> dims;
  size_t i = 0;
  auto error = [&](absl::string_view why) {
    return absl::InvalidArgumentError(absl::StrCat(
        "bad sharding spec '", std::string(text), "': ", why));
  };
  auto axis_bit = [](char c) -> AxisSet {
    return c == '0' ? kAxis0 : c == '1' ? kAxis1 : kNoAxes;
  };
  while (i < text.size()) {
    const char c = text[i++];
    if (c == 'R') {
      dims.push_back(kNoAxes);
      continue;
    }
    if (c != 'S') return error("expected R or S");
    if (i >= text.size() || text[i] != '^') return error("S needs ^axes");
    ++i;
    if (i >= text.size()) return error("missing axes");
    AxisSet axes = kNoAxes;
    if (text[i] == '{') {
      ++i;
      int last = -1;
      while (i < text.size() && text[i] != '}') {
        AxisSet bit = axis_bit(text[i]);
        if (bit == kNoAxes) return error("axes must be 0 or 1");
        const int axis = bit == kAxis0 ? 0 : 1;
        if (axis <= last) return error("axes must be ascending and distinct");
        last = axis;
        axes |= bit;
        ++i;
      }
      if (i >= text.size()) return error("unterminated {");
      ++i;
    } else {
      axes = axis_bit(text[i++]);
    }
    if (axes == kNoAxes) return error("empty axis set");
    dims.push_back(axes);
  }
  return ShardingSpec(std::move(dims));
}

absl::Status ValidateSpec(const ShardingSpec& spec, const TensorShape& shape,
                          const LogicalMesh& mesh) {
  if (spec.rank() != shape.rank()) {
    return absl::InvalidArgumentError(
        absl::StrCat("spec ", spec.ToString(), " has rank ", spec.rank(),
                     " but tensor ", shape.ToString(), " has rank ",
                     shape.rank()));
  }
  AxisSet seen = kNoAxes;
  for (int d = 0; d < spec.rank(); ++d) {
    if (spec.dim(d) & seen) {
      return absl::InvalidArgumentError(absl::StrCat(
          "spec ", spec.ToString(), " uses a mesh axis more than once"));
    }
    seen |= spec.dim(d);
    if (spec.dim(d) & ~kBothAxes) {
      return absl::InvalidArgumentError("unknown mesh axis in spec");
    }
    if (shape.dims[d] % spec.Shards(d, mesh) != 0) {
      return absl::InvalidArgumentError(absl::StrCat(
          "spec ", spec.ToString(), ": dim ", d, " (", shape.dims[d],
          ") not divisible by ", spec.Shards(d, mesh), " shards"));
    }
  }
  return absl::OkStatus();
}

bool SpecEqual(const ShardingSpec& a, const ShardingSpec& b) { return a == b; }

bool SpecIsFullyReplicated(const ShardingSpec& spec) {
  return spec.UsedAxes() == kNoAxes;
}

AxisSet ReplicationMeshAxes(const ShardingSpec& spec) {
  return static_cast<AxisSet>(kBothAxes & ~spec.UsedAxes());
}

std::vector<ShardingSpec> LegalSpecs(const TensorShape& shape,
                                     const LogicalMesh& mesh) {
  // Each usable axis goes to one dim or stays unused (-1).
  std::vector<int> usable;
  for (int axis = 0; axis < 2; ++axis) {
    if (mesh.extent(axis) > 1) usable.push_back(axis);
  }
  std::vector<ShardingSpec> specs;
  std::vector<int> choice(usable.size(), -1);
  const int rank = shape.rank();
  while (true) {
    ShardingSpec spec = ShardingSpec::Replicated(rank);
    for (size_t u = 0; u < usable.size(); ++u) {
      if (choice[u] >= 0) {
        spec.set_dim(choice[u], spec.dim(choice[u]) |
                                    static_cast<AxisSet>(1 << usable[u]));
      }
    }
    if (ValidateSpec(spec, shape, mesh).ok()) specs.push_back(spec);
    size_t u = 0;
    while (u < usable.size() && ++choice[u] == rank) choice[u++] = -1;
    if (u == usable.size()) break;
  }
  return specs;
}

std::string_view CollectiveName(CollectiveKind kind) {
  switch (kind) {
    case CollectiveKind::kAllReduce:
      return "all-reduce";
    case CollectiveKind::kAllGather:
      return "all-gather";
    case CollectiveKind::kAllToAll:
      return "all-to-all";
    case CollectiveKind::kReduceScatter:
      return "reduce-scatter";
  }
  return "?";
}

std::string Collective::ToString() const {
  std::string axes_text;
  if (axes == kBothAxes) {
    axes_text = "{0,1}";
  } else {
    axes_text = HasAxis(axes, 0) ? "0" : "1";
  }
  return absl::StrCat(std::string(CollectiveName(kind)), "(", bytes, ", ", axes_text, ")");
}

}  // namespace meshplan
