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

// Sequence-oriented dataflow graph IR. Node ids are dense and follow a
// topological order, so planners can slice contiguous operator ranges.

#ifndef MESHPLAN_GRAPH_H_
#define MESHPLAN_GRAPH_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace meshplan {

struct TensorShape {
  std::vector<int64_t> dims;
  int elem_bytes = 4;

  int rank() const { return static_cast<int>(dims.size()); }
  int64_t NumElements() const;
  int64_t ByteSize() const;

  bool operator==(const TensorShape&) const = default;
  std::string ToString() const;
};

// Checks extents >= 1, elem_bytes in {1,2,4,8} and that the byte size fits
// in int64.
absl::Status ValidateShape(const TensorShape& shape);

enum class OpType {
  kInput,
  kParameter,
  kMatmul,
  kBatchedMatmul,
  kElementwise,
  kReduction,
  kReshape,
};

// Operator kind plus the per-kind attributes that shape inference and
// strategy enumeration need. For the matmul family, `lhs_contract` and
// `rhs_contract` are positions (0 or 1) of the contraction index among the
// two non-batch dims of each operand: the default lhs is [.., i, k] and the
// default rhs is [.., k, j].
struct OpKind {
  OpType type = OpType::kInput;
  int arity = 0;  // kElementwise
  int axis = 0;   // kReduction
  int lhs_contract = 1;
  int rhs_contract = 0;

  static OpKind Input() { return {OpType::kInput}; }
  static OpKind Parameter() { return {OpType::kParameter}; }
  static OpKind Matmul(int lhs_contract = 1, int rhs_contract = 0) {
    return {OpType::kMatmul, 0, 0, lhs_contract, rhs_contract};
  }
  static OpKind BatchedMatmul(int lhs_contract = 1, int rhs_contract = 0) {
    return {OpType::kBatchedMatmul, 0, 0, lhs_contract, rhs_contract};
  }
  static OpKind Elementwise(int arity) {
    return {OpType::kElementwise, arity};
  }
  static OpKind Reduction(int axis) { return {OpType::kReduction, 0, axis}; }
  static OpKind Reshape() { return {OpType::kReshape}; }

  bool IsSource() const {
    return type == OpType::kInput || type == OpType::kParameter;
  }
  bool IsMatmulFamily() const {
    return type == OpType::kMatmul || type == OpType::kBatchedMatmul;
  }
  // Cheap ops folded into an operand before the ILP.
  bool IsTrivial() const {
    return type == OpType::kElementwise || type == OpType::kReduction ||
           type == OpType::kReshape;
  }

  bool operator==(const OpKind&) const = default;

  // "Input", "Parameter", "Matmul", "Matmul[01]", "BatchedMatmul[11]",
  // "Elementwise[2]", "Reduction[0]", "Reshape".
  std::string ToString() const;
  static absl::StatusOr<OpKind> Parse(std::string_view text);
};

struct TensorRef {
  int node = 0;
  int index = 0;
  bool operator==(const TensorRef&) const = default;
};

struct OpNode {
  int id = 0;
  OpKind kind;
  std::vector<TensorRef> inputs;
  TensorShape out_shape;
  int64_t flop = 0;
  // Backward ops name the forward op they must share a stage with.
  std::optional<int> colocate_with;
  // Set on the op producing the final gradient of a Parameter.
  std::optional<int> grad_of;

  bool is_backward() const { return colocate_with.has_value(); }
  bool operator==(const OpNode&) const = default;
};

class OpGraph {
 public:
  OpGraph() = default;

  const std::vector<OpNode>& nodes() const { return nodes_; }
  const OpNode& node(int id) const { return nodes_[id]; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<int>& outputs() const { return outputs_; }

  // Adds a node, inferring its output shape and FLOP count from its kind
  // and operands. `shape` is required for Input, Parameter and Reshape
  // nodes and ignored otherwise.
  absl::StatusOr<int> Add(OpKind kind, std::vector<int> operands,
                          std::optional<TensorShape> shape = std::nullopt);
  void MarkOutput(int id) { outputs_.push_back(id); }
  void SetColocation(int id, int forward_id) {
    nodes_[id].colocate_with = forward_id;
  }
  void SetGradOf(int id, int param_id) { nodes_[id].grad_of = param_id; }

  // Appends a node verbatim; used by the parser, which calls Validate().
  void AppendRaw(OpNode node) { nodes_.push_back(std::move(node)); }
  void SetOutputs(std::vector<int> outputs) { outputs_ = std::move(outputs); }

  // Checks every structural invariant: dense topological ids, in-range
  // producers, shape and FLOP consistency, colocation and gradient tags.
  // Errors name the offending node id.
  absl::Status Validate() const;

  int64_t TotalFlop() const;
  bool HasBackward() const;

  bool operator==(const OpGraph&) const = default;

 private:
  std::vector<OpNode> nodes_;
  std::vector<int> outputs_;
};

// Output shape and FLOP count an op of `kind` produces from `operands`.
// For Reshape, `target` is the requested shape.
absl::StatusOr<std::pair<TensorShape, int64_t>> InferShapeAndFlop(
    const OpKind& kind, const std::vector<TensorShape>& operands,
    const std::optional<TensorShape>& target = std::nullopt);

// x -> [W_l, Matmul, ReLU] * num_layers. Node count 3 * num_layers + 1.
absl::StatusOr<OpGraph> BuildMlp(int num_layers, int batch, int hidden,
                                 bool with_backward = false);

// Toy transformer stack over a [batch*seq, hidden] activation. Each block has
// six weight matmuls (Q, K, V, projection, two MLP) and two attention batched
// matmuls. Each block consumes the previous block's output.
absl::StatusOr<OpGraph> BuildTransformerBlocks(int num_blocks, int batch,
                                               int seq, int hidden, int heads,
                                               bool with_backward = false);

// Random layered DAG of matmuls and elementwise ops; deterministic in seed.
absl::StatusOr<OpGraph> BuildRandomGraph(int num_layers, int width,
                                         uint64_t seed);

// Appends mirrored gradient ops in reverse topological order. Every appended
// op carries colocate_with = the forward op it differentiates; final
// parameter gradients carry grad_of.
absl::Status AppendBackward(OpGraph& graph);

}  // namespace meshplan

#endif  // MESHPLAN_GRAPH_H_
