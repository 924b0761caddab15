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

#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "meshplan/mesh.h"
#include "oracles.h"

namespace meshplan {
namespace {

ClusterMesh Cluster(int n, int m) {
  ClusterMesh c;
  c.num_hosts = n;
  c.devices_per_host = m;
  c.intra_host_bandwidth = 100;
  c.inter_host_bandwidth = 10;
  return c;
}

std::vector<SubmeshShape> S(std::initializer_list<std::pair<int, int>> l) {
  std::vector<SubmeshShape> out;
  for (auto [n, m] : l) out.push_back({n, m});
  return out;
}

TEST(MeshTest, AdmissibleShapesTwoByFour) {
  EXPECT_EQ(AdmissibleShapes(Cluster(2, 4)),
            S({{2, 4}, {1, 4}, {1, 2}, {1, 1}}));
}

TEST(MeshTest, AdmissibleShapesSingleDevice) {
  EXPECT_EQ(AdmissibleShapes(Cluster(1, 1)), S({{1, 1}}));
}

TEST(MeshTest, AdmissibleShapesFourByEight) {
  auto shapes = AdmissibleShapes(Cluster(4, 8));
  ASSERT_EQ(shapes.size(), 7u);
  int one_dim = 0, two_dim = 0;
  for (const SubmeshShape& s : shapes) {
    EXPECT_TRUE(IsAdmissible(s, Cluster(4, 8)));
    if (s.n == 1) ++one_dim; else ++two_dim;
  }
  EXPECT_EQ(one_dim, 4);
  EXPECT_EQ(two_dim, 3);
  for (size_t i = 1; i < shapes.size(); ++i) {
    EXPECT_GE(shapes[i - 1].num_devices(), shapes[i].num_devices());
  }
}

TEST(MeshTest, Admissibility) {
  ClusterMesh c = Cluster(3, 4);
  EXPECT_TRUE(IsAdmissible({1, 2}, c));
  EXPECT_FALSE(IsAdmissible({1, 3}, c));
  EXPECT_FALSE(IsAdmissible({2, 2}, c));
  EXPECT_TRUE(IsAdmissible({3, 4}, c));
  EXPECT_FALSE(IsAdmissible({4, 4}, c));
  EXPECT_FALSE(IsAdmissible({1, 8}, c));
}

TEST(MeshTest, ClusterValidation) {
  EXPECT_TRUE(Cluster(2, 4).Validate().ok());
  EXPECT_FALSE(Cluster(2, 3).Validate().ok());
  ClusterMesh c = Cluster(2, 4);
  c.inter_host_bandwidth = 1000;
  EXPECT_FALSE(c.Validate().ok());
}

TEST(MeshTest, CoverRowBands) {
  ClusterMesh c = Cluster(3, 4);
  auto shapes = S({{2, 4}, {1, 4}});
  auto tiling = Cover(c, shapes);
  ASSERT_TRUE(tiling.ok()) << tiling.status();
  ASSERT_EQ(tiling->size(), 2u);
  EXPECT_EQ((*tiling)[0].host_begin, 0);
  EXPECT_EQ((*tiling)[0].host_end, 2);
  EXPECT_EQ((*tiling)[1].host_begin, 2);
  EXPECT_EQ((*tiling)[1].host_end, 3);
  EXPECT_TRUE(VerifyCover(c, *tiling));
}

TEST(MeshTest, CoverPairsUnitPieces) {
  ClusterMesh c = Cluster(2, 4);
  auto shapes = S({{1, 4}, {1, 2}, {1, 1}, {1, 1}});
  auto tiling = Cover(c, shapes);
  ASSERT_TRUE(tiling.ok()) << tiling.status();
  EXPECT_TRUE(VerifyCover(c, *tiling));
  EXPECT_TRUE(testing::CoversExactly(c, shapes, *tiling));
  // The two unit pieces share a host.
  EXPECT_EQ((*tiling)[2].host_begin, (*tiling)[3].host_begin);
}

TEST(MeshTest, CoverRejectsSumMismatch) {
  auto tiling = Cover(Cluster(1, 2), S({{1, 1}}));
  ASSERT_FALSE(tiling.ok());
  EXPECT_EQ(tiling.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(MeshTest, CoverRejectsInadmissible) {
  auto tiling = Cover(Cluster(2, 4), S({{1, 3}, {1, 4}, {1, 1}}));
  ASSERT_FALSE(tiling.ok());
  EXPECT_EQ(tiling.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(MeshTest, CoverIsDeterministic) {
  ClusterMesh c = Cluster(4, 8);
  auto shapes = S({{2, 8}, {1, 1}, {1, 4}, {1, 2}, {1, 8}, {1, 1}});
  auto a = Cover(c, shapes);
  auto b = Cover(c, shapes);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(*a, *b);
}

TEST(MeshTest, RandomCovers) {
  std::mt19937_64 rng(2026);
  for (int trial = 0; trial < 1000; ++trial) {
    ClusterMesh c = Cluster(1 + static_cast<int>(rng() % 8),
                            1 << static_cast<int>(rng() % 5));
    auto shapes = testing::RandomShapeMultiset(rng, c);
    auto tiling = Cover(c, shapes);
    ASSERT_TRUE(tiling.ok()) << tiling.status();
    ASSERT_TRUE(VerifyCover(c, *tiling));
    ASSERT_TRUE(testing::CoversExactly(c, shapes, *tiling));
    for (const SubmeshAssignment& a : *tiling) {
      if (a.shape.n == 1) EXPECT_EQ(a.host_end - a.host_begin, 1);
    }
  }
}

TEST(MeshTest, VerifyCoverNegatives) {
  ClusterMesh c = Cluster(2, 4);
  SubmeshAssignment top{{1, 4}, 0, 1, 0, 4};
  SubmeshAssignment bottom{{1, 4}, 1, 2, 0, 4};
  EXPECT_TRUE(VerifyCover(c, {top, bottom}));
  SubmeshAssignment overlap{{2, 4}, 0, 2, 0, 4};
  EXPECT_FALSE(VerifyCover(c, {top, overlap}));
  SubmeshAssignment short_row{{1, 2}, 1, 2, 0, 2};
  SubmeshAssignment one{{1, 1}, 1, 2, 2, 3};
  EXPECT_FALSE(VerifyCover(c, {top, short_row, one}));
  SubmeshAssignment outside{{1, 4}, 2, 3, 0, 4};
  EXPECT_FALSE(VerifyCover(c, {top, outside}));
}

TEST(MeshTest, DeviceIdsRowMajor) {
  ClusterMesh c = Cluster(2, 4);
  SubmeshAssignment a{{2, 2}, 0, 2, 2, 4};
  EXPECT_EQ(a.DeviceIds(c), (std::vector<int>{2, 3, 6, 7}));
}

std::vector<std::pair<int, int>> Dims(const std::vector<LogicalMesh>& v) {
  std::vector<std::pair<int, int>> out;
  for (const LogicalMesh& m : v) out.push_back({m.rows, m.cols});
  return out;
}

TEST(MeshTest, LogicalViewsTwoByFour) {
  auto views = LogicalViews({2, 4}, Cluster(2, 4));
  EXPECT_EQ(Dims(views),
            (std::vector<std::pair<int, int>>{{1, 8}, {2, 4}, {4, 2}, {8, 1}}));
  // 2x4 follows the hosts: axis 0 crosses them, axis 1 stays inside.
  EXPECT_EQ(views[1].axis_bandwidth[0], 10);
  EXPECT_EQ(views[1].axis_bandwidth[1], 100);
  EXPECT_EQ(views[0].axis_bandwidth[1], 10);
  EXPECT_EQ(views[2].axis_bandwidth[0], 10);
  EXPECT_EQ(views[2].axis_bandwidth[1], 100);
}

TEST(MeshTest, LogicalViewsSingleHost) {
  EXPECT_EQ(Dims(LogicalViews({1, 1}, Cluster(2, 4))),
            (std::vector<std::pair<int, int>>{{1, 1}}));
  auto views = LogicalViews({1, 4}, Cluster(2, 4));
  EXPECT_EQ(Dims(views),
            (std::vector<std::pair<int, int>>{{1, 4}, {2, 2}, {4, 1}}));
  for (const LogicalMesh& v : views) {
    EXPECT_EQ(v.axis_bandwidth[0], 100);
    EXPECT_EQ(v.axis_bandwidth[1], 100);
  }
}

TEST(MeshTest, LogicalViewsIncludePhysicalShape) {
  ClusterMesh c = Cluster(4, 8);
  for (const SubmeshShape& s : AdmissibleShapes(c)) {
    bool found = false;
    for (const LogicalMesh& v : LogicalViews(s, c)) {
      EXPECT_EQ(v.num_devices(), s.num_devices());
      found |= v.rows == s.n && v.cols == s.m;
    }
    EXPECT_TRUE(found) << s.ToString();
  }
}

TEST(MeshTest, PlaceViewMapsDevices) {
  ClusterMesh c = Cluster(2, 4);
  SubmeshAssignment a{{2, 4}, 0, 2, 0, 4};
  PlacedMesh p = PlaceView(a, LogicalViews({2, 4}, c)[2], c);
  EXPECT_EQ(p.mesh.rows, 4);
  EXPECT_EQ(p.device_ids, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

}  // namespace
}  // namespace meshplan
