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

#include "gtest/gtest.h"
#include "meshplan/cross_mesh.h"
#include "meshplan/sharding.h"
#include "oracles.h"

namespace meshplan {
namespace {

PlacedMesh Placed(int rows, int cols, int first) {
  PlacedMesh p;
  p.mesh = {rows, cols, {1e9, 1e9}};
  for (int i = 0; i < rows * cols; ++i) p.device_ids.push_back(first + i);
  return p;
}

ShardingSpec Spec(const char* s) { return *ShardingSpec::Parse(s); }

TEST(CrossMeshTest, TilesPartitionTheTensor) {
  const TensorShape shape{{8, 8}, 4};
  PlacedMesh p = Placed(2, 2, 0);
  auto tiles = DeviceTiles(shape, Spec("S^0S^1"), p);
  ASSERT_EQ(tiles.size(), 4u);
  EXPECT_EQ(tiles[0], (Region{{0, 0}, {4, 4}}));
  EXPECT_EQ(tiles[1], (Region{{0, 4}, {4, 8}}));
  EXPECT_EQ(tiles[3], (Region{{4, 4}, {8, 8}}));
  auto repl = DeviceTiles(shape, Spec("S^0R"), p);
  EXPECT_EQ(repl[0], repl[1]);
  EXPECT_EQ(repl[2], (Region{{4, 0}, {8, 8}}));
  auto both = DeviceTiles(shape, Spec("S^{01}R"), p);
  EXPECT_EQ(both[2], (Region{{4, 0}, {6, 8}}));
}

TEST(CrossMeshTest, RegionAlgebra) {
  Region a{{0, 0}, {4, 4}};
  Region b{{2, 3}, {6, 8}};
  EXPECT_EQ(Intersect(a, b), (Region{{2, 3}, {4, 4}}));
  EXPECT_EQ(Intersect(a, b).NumElements(), 2);
  EXPECT_TRUE(Intersect(a, Region{{4, 0}, {5, 4}}).empty());
}

// Fully replicated destination on 2 devices: naive ships the tensor twice,
// local all-gather ships it once and gathers locally.
TEST(CrossMeshTest, ReplicatedDestinationShipsOnce) {
  const TensorShape shape{{8, 8}, 4};
  PlacedMesh src = Placed(1, 2, 0);
  PlacedMesh dst = Placed(1, 2, 10);
  auto naive = NaiveCrossMeshPlan(shape, Spec("S^1R"), src, Spec("RR"), dst);
  auto opt = LocalAllGatherPlan(shape, Spec("S^1R"), src, Spec("RR"), dst);
  ASSERT_TRUE(naive.ok() && opt.ok());
  EXPECT_EQ(naive->inter_mesh_bytes, 2 * 256);
  EXPECT_EQ(opt->inter_mesh_bytes, 256);
  ASSERT_EQ(opt->all_gathers.size(), 1u);
  EXPECT_EQ(opt->all_gathers[0].devices, (std::vector<int>{10, 11}));
  EXPECT_EQ(opt->all_gathers[0].bytes, 256);
  // Axis 0 has extent 1 and does not count.
  EXPECT_EQ(opt->replication_axes, kAxis1);
  EXPECT_TRUE(testing::ReplayCrossMesh(shape, Spec("S^1R"), src, Spec("RR"),
                                       dst, *opt));
}

TEST(CrossMeshTest, UnreplicatedDestinationIsPointToPoint) {
  const TensorShape shape{{8, 8}, 4};
  PlacedMesh src = Placed(2, 2, 0);
  PlacedMesh dst = Placed(1, 4, 10);
  auto naive =
      NaiveCrossMeshPlan(shape, Spec("S^0S^1"), src, Spec("RS^1"), dst);
  auto opt = LocalAllGatherPlan(shape, Spec("S^0S^1"), src, Spec("RS^1"), dst);
  ASSERT_TRUE(naive.ok() && opt.ok());
  EXPECT_EQ(naive->inter_mesh_bytes, shape.ByteSize());
  EXPECT_EQ(opt->inter_mesh_bytes, shape.ByteSize());
  EXPECT_TRUE(opt->all_gathers.empty());
}

TEST(CrossMeshTest, RejectsInvalidSpecs) {
  const TensorShape shape{{6, 8}, 4};
  EXPECT_FALSE(LocalAllGatherPlan(shape, Spec("S^0R"), Placed(4, 1, 0),
                                  Spec("RR"), Placed(1, 2, 10))
                   .ok());
}

TEST(CrossMeshTest, RandomPairsMaterializeAndNeverCostMore) {
  std::mt19937_64 rng(8);
  int replicated = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    testing::CrossMeshCase c = testing::RandomCrossMeshCase(rng);
    auto naive = NaiveCrossMeshPlan(c.shape, c.src_spec, c.src, c.dst_spec,
                                    c.dst);
    auto opt = LocalAllGatherPlan(c.shape, c.src_spec, c.src, c.dst_spec,
                                  c.dst);
    ASSERT_TRUE(naive.ok() && opt.ok());
    ASSERT_TRUE(testing::ReplayCrossMesh(c.shape, c.src_spec, c.src,
                                         c.dst_spec, c.dst, *naive));
    ASSERT_TRUE(testing::ReplayCrossMesh(c.shape, c.src_spec, c.src,
                                         c.dst_spec, c.dst, *opt))
        << c.src_spec.ToString() << " -> " << c.dst_spec.ToString();
    EXPECT_TRUE(VerifyMaterialization(c.shape, c.src_spec, c.src, c.dst_spec,
                                      c.dst, *opt));
    EXPECT_LE(opt->inter_mesh_bytes, naive->inter_mesh_bytes);
    int64_t received = 0;
    for (int64_t b : opt->received_bytes) received += b;
    EXPECT_EQ(received, opt->inter_mesh_bytes);
    const int group =
        AxisProduct(ReplicationMeshAxes(c.dst_spec), c.dst.mesh);
    if (group > 1) {
      ++replicated;
      EXPECT_LT(opt->inter_mesh_bytes, naive->inter_mesh_bytes)
          << c.src_spec.ToString() << " -> " << c.dst_spec.ToString();
      // Each distinct destination tile crosses exactly once.
      EXPECT_EQ(opt->inter_mesh_bytes * group, naive->inter_mesh_bytes);
    } else {
      EXPECT_EQ(opt->inter_mesh_bytes, naive->inter_mesh_bytes);
    }
  }
  EXPECT_GT(replicated, 300);
}

TEST(CrossMeshTest, CorruptedPlansFailVerification) {
  const TensorShape shape{{8, 8}, 4};
  PlacedMesh src = Placed(1, 2, 0);
  PlacedMesh dst = Placed(2, 2, 10);
  auto opt = LocalAllGatherPlan(shape, Spec("S^1R"), src, Spec("RS^1"), dst);
  ASSERT_TRUE(opt.ok());
  ASSERT_FALSE(opt->transfers.empty());
  CrossMeshPlan dropped = *opt;
  dropped.transfers.pop_back();
  EXPECT_FALSE(VerifyMaterialization(shape, Spec("S^1R"), src, Spec("RS^1"),
                                     dst, dropped));
  EXPECT_FALSE(testing::ReplayCrossMesh(shape, Spec("S^1R"), src,
                                        Spec("RS^1"), dst, dropped));
  CrossMeshPlan wrong_sender = *opt;
  wrong_sender.transfers[0].src_device =
      wrong_sender.transfers[0].src_device == 0 ? 1 : 0;
  EXPECT_FALSE(VerifyMaterialization(shape, Spec("S^1R"), src, Spec("RS^1"),
                                     dst, wrong_sender));
  EXPECT_FALSE(testing::ReplayCrossMesh(shape, Spec("S^1R"), src,
                                        Spec("RS^1"), dst, wrong_sender));
}

}  // namespace
}  // namespace meshplan
