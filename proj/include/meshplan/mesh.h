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

// Physical cluster mesh, admissible submesh shapes, the constructive
// submesh covering, and logical 2-D views of a submesh.

#ifndef MESHPLAN_MESH_H_
#define MESHPLAN_MESH_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace meshplan {

struct ClusterMesh {
  int num_hosts = 1;
  int devices_per_host = 1;  // power of two
  double intra_host_bandwidth = 1e11;  // bytes/s
  double inter_host_bandwidth = 1e10;  // bytes/s
  double alpha_latency = 0.0;          // seconds per collective launch
  double device_flops = 1e12;          // FLOP/s
  int64_t device_memory = int64_t{16} << 30;  // bytes

  int num_devices() const { return num_hosts * devices_per_host; }
  absl::Status Validate() const;
};

struct SubmeshShape {
  int n = 1;
  int m = 1;

  int num_devices() const { return n * m; }
  bool operator==(const SubmeshShape&) const = default;
  auto operator<=>(const SubmeshShape&) const = default;
  std::string ToString() const;
};

bool IsAdmissible(const SubmeshShape& shape, const ClusterMesh& cluster);

// A rectangle of the cluster grid: hosts [host_begin, host_end) x devices
// [device_begin, device_end).
struct SubmeshAssignment {
  SubmeshShape shape;
  int host_begin = 0;
  int host_end = 0;
  int device_begin = 0;
  int device_end = 0;

  // Global device ids (host * devices_per_host + device), row-major.
  std::vector<int> DeviceIds(const ClusterMesh& cluster) const;
  bool operator==(const SubmeshAssignment&) const = default;
};

struct LogicalMesh {
  int rows = 1;  // extent of mesh axis 0
  int cols = 1;  // extent of mesh axis 1
  std::array<double, 2> axis_bandwidth = {1.0, 1.0};

  int extent(int axis) const { return axis == 0 ? rows : cols; }
  int num_devices() const { return rows * cols; }
  bool operator==(const LogicalMesh&) const = default;
  std::string ToString() const;
};

// A logical view bound to concrete devices. Logical coordinate (a, b) maps
// to device_ids[a * cols + b].
struct PlacedMesh {
  LogicalMesh mesh;
  std::vector<int> device_ids;
};

// {(1,1),(1,2),...,(1,M)} U {(2,M),...,(N,M)}, sorted by device count
// descending, then n descending.
std::vector<SubmeshShape> AdmissibleShapes(const ClusterMesh& cluster);

// Tiles the cluster with the given shapes. The result is index-aligned with
// `shapes`. Full-width shapes take whole host rows top-down in descending n;
// the remaining one-row pieces are paired smallest-first into the next power
// of two until each group fills a host row, then laid out left to right.
absl::StatusOr<std::vector<SubmeshAssignment>> Cover(
    const ClusterMesh& cluster, const std::vector<SubmeshShape>& shapes);

// True iff the rectangles are in bounds, pairwise disjoint and cover every
// cell of the cluster grid.
bool VerifyCover(const ClusterMesh& cluster,
                 const std::vector<SubmeshAssignment>& assignments);

// Every factorization rows * cols = n * m, rows ascending. Axis bandwidths
// come from how each axis walks the row-major physical devices: an axis whose
// device groups all stay on one host gets the intra-host bandwidth, any axis
// with a group that crosses hosts gets the inter-host bandwidth.
std::vector<LogicalMesh> LogicalViews(const SubmeshShape& shape,
                                      const ClusterMesh& cluster);

PlacedMesh PlaceView(const SubmeshAssignment& assignment,
                     const LogicalMesh& view, const ClusterMesh& cluster);

}  // namespace meshplan

#endif  // MESHPLAN_MESH_H_
