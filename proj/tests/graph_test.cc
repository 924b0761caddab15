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
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"
#include "meshplan/graph.h"
#include "meshplan/graph_json.h"

namespace meshplan {
namespace {

// Recomputes a node's FLOP from its operand shapes alone.
int64_t RecomputeFlop(const OpGraph& g, const OpNode& n) {
  auto in = [&](int s) -> const TensorShape& {
    return g.node(n.inputs[s].node).out_shape;
  };
  switch (n.kind.type) {
    case OpType::kMatmul:
    case OpType::kBatchedMatmul: {
      const TensorShape& a = in(0);
      const TensorShape& b = in(1);
      int r = a.rank();
      int64_t batch = 1;
      for (int d = 0; d + 2 < r; ++d) batch *= a.dims[d];
      int64_t i = a.dims[r - 2 + (1 - n.kind.lhs_contract)];
      int64_t k = a.dims[r - 2 + n.kind.lhs_contract];
      int64_t j = b.dims[b.rank() - 2 + (1 - n.kind.rhs_contract)];
      return 2 * batch * i * j * k;
    }
    case OpType::kElementwise:
      return n.out_shape.NumElements();
    case OpType::kReduction:
      return in(0).NumElements();
    default:
      return 0;
  }
}

void ExpectFlopRecomputes(const OpGraph& g) {
  int64_t sum = 0;
  for (const OpNode& n : g.nodes()) {
    EXPECT_EQ(n.flop, RecomputeFlop(g, n)) << "node " << n.id;
    sum += n.flop;
  }
  EXPECT_EQ(g.TotalFlop(), sum);
}

int CountMatmuls(const OpGraph& g) {
  int c = 0;
  for (const OpNode& n : g.nodes()) c += n.kind.IsMatmulFamily();
  return c;
}

TEST(GraphTest, MlpTwoLayers) {
  auto g = BuildMlp(2, 8, 4);
  ASSERT_TRUE(g.ok()) << g.status();
  EXPECT_EQ(g->size(), 7);
  EXPECT_EQ(CountMatmuls(*g), 2);
  for (const OpNode& n : g->nodes()) {
    if (n.kind.IsMatmulFamily()) EXPECT_EQ(n.flop, 256);
  }
  EXPECT_TRUE(g->Validate().ok());
}

TEST(GraphTest, MlpMinimal) {
  auto g = BuildMlp(1, 1, 1);
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g->size(), 4);
  for (const OpNode& n : g->nodes()) {
    if (n.kind.IsMatmulFamily()) EXPECT_EQ(n.flop, 2);
  }
}

TEST(GraphTest, MlpFlopByHand) {
  auto g = BuildMlp(4, 16, 32);
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g->size(), 13);
  int seen = 0;
  for (const OpNode& n : g->nodes()) {
    if (!n.kind.IsMatmulFamily()) continue;
    EXPECT_EQ(n.flop, 2 * 16 * 32 * 32);
    ++seen;
  }
  EXPECT_EQ(seen, 4);
  ExpectFlopRecomputes(*g);
}

TEST(GraphTest, MlpNodeCountFormula) {
  for (int l = 1; l <= 6; ++l) {
    auto g = BuildMlp(l, 2, 2);
    ASSERT_TRUE(g.ok());
    EXPECT_EQ(g->size(), 3 * l + 1);
  }
}

TEST(GraphTest, MlpRejectsNonPositive) {
  EXPECT_FALSE(BuildMlp(0, 1, 1).ok());
  EXPECT_FALSE(BuildMlp(1, 0, 1).ok());
  EXPECT_FALSE(BuildMlp(1, 1, -3).ok());
}

TEST(GraphTest, MlpOverflowIsAnError) {
  EXPECT_FALSE(BuildMlp(1, 1 << 30, 1 << 30).ok());
}

TEST(GraphTest, TransformerBlockStructure) {
  auto g = BuildTransformerBlocks(1, 2, 4, 8, 2);
  ASSERT_TRUE(g.ok()) << g.status();
  int weight = 0, attention = 0;
  for (const OpNode& n : g->nodes()) {
    if (n.kind.type == OpType::kMatmul) ++weight;
    if (n.kind.type == OpType::kBatchedMatmul) ++attention;
  }
  EXPECT_EQ(weight, 6);
  EXPECT_EQ(attention, 2);
  ExpectFlopRecomputes(*g);
}

TEST(GraphTest, TransformerTwoBlocksShareInput) {
  auto one = BuildTransformerBlocks(1, 2, 4, 8, 2);
  auto two = BuildTransformerBlocks(2, 2, 4, 8, 2);
  ASSERT_TRUE(one.ok() && two.ok());
  EXPECT_EQ(two->size(), 2 * one->size() - 1);
  EXPECT_EQ(CountMatmuls(*two), 16);
  ExpectFlopRecomputes(*two);
}

TEST(GraphTest, TransformerMatmulFlopDominates) {
  auto g = BuildTransformerBlocks(2, 2, 16, 64, 4);
  ASSERT_TRUE(g.ok());
  int64_t mm = 0;
  for (const OpNode& n : g->nodes()) {
    if (n.kind.IsMatmulFamily()) mm += n.flop;
  }
  EXPECT_GT(mm, 0);
  EXPECT_GE(mm * 10, g->TotalFlop() * 9);
}

TEST(GraphTest, TransformerHeadsMustDivideHidden) {
  EXPECT_FALSE(BuildTransformerBlocks(1, 2, 4, 8, 3).ok());
}

TEST(GraphTest, BackwardOpsAreTagged) {
  auto g = BuildMlp(2, 4, 4, /*with_backward=*/true);
  ASSERT_TRUE(g.ok());
  EXPECT_TRUE(g->HasBackward());
  int grads = 0;
  for (const OpNode& n : g->nodes()) {
    if (n.grad_of) {
      ++grads;
      EXPECT_EQ(g->node(*n.grad_of).kind.type, OpType::kParameter);
      EXPECT_EQ(g->node(*n.grad_of).out_shape, n.out_shape);
    }
    if (n.colocate_with) {
      EXPECT_LT(*n.colocate_with, n.id);
      EXPECT_FALSE(g->node(*n.colocate_with).is_backward());
    }
  }
  EXPECT_EQ(grads, 2);
  EXPECT_TRUE(g->Validate().ok());
  ExpectFlopRecomputes(*g);
}

TEST(GraphTest, RandomGraphIsDeterministic) {
  auto a = BuildRandomGraph(5, 3, 42);
  auto b = BuildRandomGraph(5, 3, 42);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(*a, *b);
  EXPECT_TRUE(a->Validate().ok());
  ExpectFlopRecomputes(*a);
}

TEST(GraphTest, KindStringsRoundTrip) {
  for (OpKind k : {OpKind::Input(), OpKind::Parameter(), OpKind::Matmul(),
                   OpKind::Matmul(0, 1), OpKind::BatchedMatmul(1, 1),
                   OpKind::Elementwise(2), OpKind::Reduction(1),
                   OpKind::Reshape()}) {
    auto parsed = OpKind::Parse(k.ToString());
    ASSERT_TRUE(parsed.ok()) << k.ToString();
    EXPECT_EQ(*parsed, k);
  }
  EXPECT_FALSE(OpKind::Parse("Conv2D").ok());
}

TEST(GraphTest, ShapeValidation) {
  EXPECT_TRUE(ValidateShape({{2, 3}, 4}).ok());
  EXPECT_FALSE(ValidateShape({{2, 0}, 4}).ok());
  EXPECT_FALSE(ValidateShape({{2, 3}, 3}).ok());
  EXPECT_FALSE(ValidateShape({{int64_t{1} << 40, int64_t{1} << 40}, 8}).ok());
  EXPECT_EQ((TensorShape{{2, 3}, 2}).ByteSize(), 12);
}

TEST(GraphJsonTest, RoundTripBuilders) {
  std::vector<OpGraph> graphs;
  graphs.push_back(*BuildMlp(2, 8, 4));
  graphs.push_back(*BuildMlp(3, 4, 4, true));
  graphs.push_back(*BuildTransformerBlocks(2, 2, 4, 8, 2, true));
  for (uint64_t seed = 0; seed < 20; ++seed) {
    graphs.push_back(*BuildRandomGraph(1 + seed % 5, 1 + seed % 3, seed));
  }
  for (const OpGraph& g : graphs) {
    auto back = Parse(Serialize(g));
    ASSERT_TRUE(back.ok()) << back.status();
    EXPECT_EQ(*back, g);
  }
}

nlohmann::json TinyDoc() {
  return nlohmann::json::parse(Serialize(*BuildMlp(2, 2, 2)));
}

TEST(GraphJsonTest, UnknownProducerNamed) {
  nlohmann::json doc = TinyDoc();
  doc["nodes"][2]["inputs"][0][0] = 99;
  auto g = GraphFromJson(doc);
  ASSERT_FALSE(g.ok());
  EXPECT_NE(std::string(g.status().message()).find("unknown producer 99"),
            std::string::npos)
      << g.status();
}

TEST(GraphJsonTest, ForwardReferenceIsTopologicalError) {
  nlohmann::json doc = TinyDoc();
  // Node 5 is the second matmul; make it consume node 6.
  ASSERT_EQ(doc["nodes"][5]["kind"], "Matmul");
  doc["nodes"][5]["inputs"][0][0] = 6;
  auto g = GraphFromJson(doc);
  ASSERT_FALSE(g.ok());
  std::string msg(g.status().message());
  EXPECT_NE(msg.find("node 5"), std::string::npos) << msg;
  EXPECT_NE(msg.find("topological"), std::string::npos) << msg;
}

TEST(GraphJsonTest, RejectsUnknownFields) {
  nlohmann::json doc = TinyDoc();
  doc["nodes"][0]["color"] = "red";
  EXPECT_FALSE(GraphFromJson(doc).ok());
  doc = TinyDoc();
  doc["extra"] = 1;
  EXPECT_FALSE(GraphFromJson(doc).ok());
}

TEST(GraphJsonTest, RejectsMalformed) {
  EXPECT_FALSE(Parse("{").ok());
  EXPECT_FALSE(Parse("[]").ok());
  EXPECT_FALSE(Parse(R"({"version":2,"nodes":[],"outputs":[]})").ok());
}

// Every accepted corruption must still be a valid graph.
TEST(GraphJsonTest, RandomCorruptionsNeverYieldInvalidGraphs) {
  std::mt19937_64 rng(7);
  const nlohmann::json base =
      nlohmann::json::parse(Serialize(*BuildTransformerBlocks(1, 2, 4, 8, 2)));
  int rejected = 0;
  for (int trial = 0; trial < 500; ++trial) {
    nlohmann::json doc = base;
    auto& nodes = doc["nodes"];
    int i = static_cast<int>(rng() % nodes.size());
    switch (rng() % 6) {
      case 0:
        if (!nodes[i]["inputs"].empty()) {
          nodes[i]["inputs"][0][0] = static_cast<int>(rng() % 40) - 5;
        }
        break;
      case 1:
        nodes[i]["flop"] = static_cast<int64_t>(rng() % 1000);
        break;
      case 2:
        nodes[i]["shape"]["dims"][0] = static_cast<int>(rng() % 5);
        break;
      case 3:
        nodes[i]["id"] = static_cast<int>(rng() % 30);
        break;
      case 4:
        nodes[i]["shape"]["elem_bytes"] = static_cast<int>(rng() % 9);
        break;
      case 5:
        nodes[i]["colocate_with"] = static_cast<int>(rng() % 30);
        break;
    }
    auto g = GraphFromJson(doc);
    if (!g.ok()) {
      ++rejected;
      continue;
    }
    EXPECT_TRUE(g->Validate().ok());
  }
  EXPECT_GT(rejected, 100);
}

}  // namespace
}  // namespace meshplan
