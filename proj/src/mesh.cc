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

#include "meshplan/mesh.h"

#include <algorithm>
#include <numeric>

#include "absl/strings/str_cat.h"

namespace meshplan {
namespace {

bool IsPowerOfTwo(int x) { return x > 0 && (x & (x - 1)) == 0; }

// A group of one-row pieces packed side by side.
struct Packed {
  int size = 0;
  int first_index = 0;
  std::vector<std::pair<int, int>> pieces;  // (shape index, column offset)
};

}  // namespace

absl::Status ClusterMesh::Validate() const {
  if (num_hosts < 1) {
    return absl::InvalidArgumentError("cluster needs at least one host");
  }
  if (!IsPowerOfTwo(devices_per_host)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "devices_per_host must be a power of two, got ", devices_per_host));
  }
  if (!(inter_host_bandwidth > 0) ||
      !(intra_host_bandwidth >= inter_host_bandwidth)) {
    return absl::InvalidArgumentError(
        "bandwidths must satisfy intra >= inter > 0");
  }
  if (!(alpha_latency >= 0)) {
    return absl::InvalidArgumentError("alpha latency must be >= 0");
  }
  if (!(device_flops > 0)) {
    return absl::InvalidArgumentError("device_flops must be > 0");
  }
  if (device_memory <= 0) {
    return absl::InvalidArgumentError("device_memory must be > 0");
  }
  return absl::OkStatus();
}

std::string SubmeshShape::ToString() const {
  return absl::StrCat("(", n, ",", m, ")");
}

std::string LogicalMesh::ToString() const {
  return absl::StrCat(rows, "x", cols);
}

bool IsAdmissible(const SubmeshShape& shape, const ClusterMesh& cluster) {
  const int big_m = cluster.devices_per_host;
  if (shape.n == 1) return IsPowerOfTwo(shape.m) && shape.m <= big_m;
  return shape.n >= 2 && shape.n <= cluster.num_hosts && shape.m == big_m;
}

std::vector<int> SubmeshAssignment::DeviceIds(
    const ClusterMesh& cluster) const {
  std::vector<int> ids;
  for (int h = host_begin; h < host_end; ++h) {
    for (int d = device_begin; d < device_end; ++d) {
      ids.push_back(h * cluster.devices_per_host + d);
    }
  }
  return ids;
}

std::vector<SubmeshShape> AdmissibleShapes(const ClusterMesh& cluster) {
  std::vector<SubmeshShape> shapes;
  for (int m = 1; m <= cluster.devices_per_host; m *= 2) shapes.push_back({1, m});
  for (int n = 2; n <= cluster.num_hosts; ++n) {
    shapes.push_back({n, cluster.devices_per_host});
  }
  std::sort(shapes.begin(), shapes.end(),
            [](const SubmeshShape& a, const SubmeshShape& b) {
              if (a.num_devices() != b.num_devices()) {
                return a.num_devices() > b.num_devices();
              }
              return a.n > b.n;
            });
  return shapes;
}

absl::StatusOr<std::vector<SubmeshAssignment>> Cover(
    const ClusterMesh& cluster, const std::vector<SubmeshShape>& shapes) {
  if (auto st = cluster.Validate(); !st.ok()) return st;
  const int big_n = cluster.num_hosts;
  const int big_m = cluster.devices_per_host;
  int64_t total = 0;
  for (const SubmeshShape& s : shapes) {
    if (!IsAdmissible(s, cluster)) {
      return absl::FailedPreconditionError(
          absl::StrCat("submesh shape ", s.ToString(),
                       " is not admissible on a ", big_n, "x", big_m,
                       " cluster"));
    }
    total += s.num_devices();
  }
  if (total != cluster.num_devices()) {
    return absl::FailedPreconditionError(
        absl::StrCat("submesh sizes sum to ", total, ", cluster has ",
                     cluster.num_devices(), " devices"));
  }

  std::vector<SubmeshAssignment> result(shapes.size());
  std::vector<int> full_width;
  std::vector<Packed> packed;
  for (int i = 0; i < static_cast<int>(shapes.size()); ++i) {
    if (shapes[i].n >= 2) {
      full_width.push_back(i);
    } else {
      packed.push_back({shapes[i].m, i, {{i, 0}}});
    }
  }
  std::stable_sort(full_width.begin(), full_width.end(), [&](int a, int b) {
    return shapes[a].n > shapes[b].n;
  });
  int row = 0;
  for (int i : full_width) {
    result[i] = {shapes[i], row, row + shapes[i].n, 0, big_m};
    row += shapes[i].n;
  }

  // Pair equal-size groups until every group spans a full host row.
  for (int size = 1; size < big_m; size *= 2) {
    std::vector<Packed> next;
    std::vector<Packed> level;
    for (Packed& p : packed) {
      (p.size == size ? level : next).push_back(std::move(p));
    }
    if (level.size() % 2 != 0) {
      return absl::InternalError(
          absl::StrCat("odd number of width-", size, " groups"));
    }
    for (size_t k = 0; k < level.size(); k += 2) {
      Packed merged{2 * size, level[k].first_index, level[k].pieces};
      for (auto [index, offset] : level[k + 1].pieces) {
        merged.pieces.push_back({index, offset + size});
      }
      next.push_back(std::move(merged));
    }
    std::stable_sort(next.begin(), next.end(),
                     [](const Packed& a, const Packed& b) {
                       return a.first_index < b.first_index;
                     });
    packed = std::move(next);
  }
  for (const Packed& p : packed) {
    for (auto [index, offset] : p.pieces) {
      result[index] = {shapes[index], row, row + 1, offset,
                       offset + shapes[index].m};
    }
    ++row;
  }
  if (row != big_n) {
    return absl::InternalError("covering did not fill every host row");
  }
  return result;
}

bool VerifyCover(const ClusterMesh& cluster,
                 const std::vector<SubmeshAssignment>& assignments) {
  const int rows = cluster.num_hosts;
  const int cols = cluster.devices_per_host;
  std::vector<int> hits(static_cast<size_t>(rows) * cols, 0);
  for (const SubmeshAssignment& a : assignments) {
    if (a.host_begin < 0 || a.host_end > rows || a.device_begin < 0 ||
        a.device_end > cols || a.host_begin >= a.host_end ||
        a.device_begin >= a.device_end) {
      return false;
    }
    if (a.host_end - a.host_begin != a.shape.n ||
        a.device_end - a.device_begin != a.shape.m) {
      return false;
    }
    for (int h = a.host_begin; h < a.host_end; ++h) {
      for (int d = a.device_begin; d < a.device_end; ++d) {
        if (++hits[h * cols + d] > 1) return false;
      }
    }
  }
  return std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
}

std::vector<LogicalMesh> LogicalViews(const SubmeshShape& shape,
                                      const ClusterMesh& cluster) {
  const int total = shape.num_devices();
  const double intra = cluster.intra_host_bandwidth;
  const double inter = cluster.inter_host_bandwidth;
  auto host_of = [&](int linear) { return linear / shape.m; };
  std::vector<LogicalMesh> views;
  for (int rows = 1; rows <= total; ++rows) {
    if (total % rows != 0) continue;
    const int cols = total / rows;
    bool axis0_crosses = false;
    bool axis1_crosses = false;
    for (int b = 0; b < cols; ++b) {
      for (int a = 1; a < rows; ++a) {
        if (host_of(a * cols + b) != host_of(b)) axis0_crosses = true;
      }
    }
    for (int a = 0; a < rows; ++a) {
      if (host_of(a * cols) != host_of(a * cols + cols - 1)) {
        axis1_crosses = true;
      }
    }
    views.push_back({rows, cols,
                     {axis0_crosses ? inter : intra,
                      axis1_crosses ? inter : intra}});
  }
  return views;
}

PlacedMesh PlaceView(const SubmeshAssignment& assignment,
                     const LogicalMesh& view, const ClusterMesh& cluster) {
  return {view, assignment.DeviceIds(cluster)};
}

}  // namespace meshplan
