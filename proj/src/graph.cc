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

#include "meshplan/graph.h"

#include <algorithm>
#include <limits>
#include <map>
#include <random>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace meshplan {
namespace {

bool MulOverflows(int64_t a, int64_t b) {
  return a != 0 && b > std::numeric_limits<int64_t>::max() / a;
}

// Position of the non-contraction dim among the two trailing dims.
int Other(int contract) { return 1 - contract; }

}  // namespace

int64_t TensorShape::NumElements() const {
  int64_t n = 1;
  for (int64_t d : dims) n *= d;
  return n;
}

int64_t TensorShape::ByteSize() const { return NumElements() * elem_bytes; }

std::string TensorShape::ToString() const {
  return absl::StrCat("[", absl::StrJoin(dims, ","), "]x", elem_bytes);
}

absl::Status ValidateShape(const TensorShape& shape) {
  if (shape.elem_bytes != 1 && shape.elem_bytes != 2 &&
      shape.elem_bytes != 4 && shape.elem_bytes != 8) {
    return absl::InvalidArgumentError(
        absl::StrCat("elem_bytes must be 1, 2, 4 or 8, got ",
                     shape.elem_bytes));
  }
  int64_t bytes = shape.elem_bytes;
  for (int64_t d : shape.dims) {
    if (d < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("tensor extent must be >= 1, got ", d));
    }
    if (MulOverflows(bytes, d)) {
      return absl::OutOfRangeError(
          absl::StrCat("tensor byte size overflows: ", shape.ToString()));
    }
    bytes *= d;
  }
  return absl::OkStatus();
}

std::string OpKind::ToString() const {
  switch (type) {
    case OpType::kInput:
      return "Input";
    case OpType::kParameter:
      return "Parameter";
    case OpType::kMatmul:
    case OpType::kBatchedMatmul: {
      std::string name =
          type == OpType::kMatmul ? "Matmul" : "BatchedMatmul";
      if (lhs_contract == 1 && rhs_contract == 0) return name;
      return absl::StrCat(name, "[", lhs_contract, rhs_contract, "]");
    }
    case OpType::kElementwise:
      return absl::StrCat("Elementwise[", arity, "]");
    case OpType::kReduction:
      return absl::StrCat("Reduction[", axis, "]");
    case OpType::kReshape:
      return "Reshape";
  }
  return "?";
}

absl::StatusOr<OpKind> OpKind::Parse(std::string_view text_in) {
  const absl::string_view text(text_in.data(), text_in.size());
  absl::string_view name = text;
  absl::string_view arg;
  if (size_t open = text.find('['); open != absl::string_view::npos) {
    if (text.back() != ']') {
      return absl::InvalidArgumentError(
          absl::StrCat("malformed op kind '", text, "'"));
    }
    name = text.substr(0, open);
    arg = text.substr(open + 1, text.size() - open - 2);
  }
  auto parse_int = [&](int lo, int hi) -> absl::StatusOr<int> {
    int v = 0;
    if (!absl::SimpleAtoi(arg, &v) || v < lo || v > hi) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad argument in op kind '", text, "'"));
    }
    return v;
  };
  if (name == "Input" && arg.empty()) return Input();
  if (name == "Parameter" && arg.empty()) return Parameter();
  if (name == "Reshape" && arg.empty()) return Reshape();
  if (name == "Matmul" || name == "BatchedMatmul") {
    int lc = 1, rc = 0;
    if (!arg.empty()) {
      if (arg.size() != 2 || (arg[0] != '0' && arg[0] != '1') ||
          (arg[1] != '0' && arg[1] != '1')) {
        return absl::InvalidArgumentError(
            absl::StrCat("bad contraction spec in op kind '", text, "'"));
      }
      lc = arg[0] - '0';
      rc = arg[1] - '0';
    }
    return name == "Matmul" ? Matmul(lc, rc) : BatchedMatmul(lc, rc);
  }
  if (name == "Elementwise") {
    auto v = parse_int(1, 64);
    if (!v.ok()) return v.status();
    return Elementwise(*v);
  }
  if (name == "Reduction") {
    auto v = parse_int(0, 64);
    if (!v.ok()) return v.status();
    return Reduction(*v);
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown op kind '", text,
                                                 "'"));
}

absl::StatusOr<std::pair<TensorShape, int64_t>> InferShapeAndFlop(
    const OpKind& kind, const std::vector<TensorShape>& operands,
    const std::optional<TensorShape>& target) {
  auto arity_error = [&](size_t want) {
    return absl::InvalidArgumentError(
        absl::StrCat(kind.ToString(), " expects ", want, " operands, got ",
                     operands.size()));
  };
  switch (kind.type) {
    case OpType::kInput:
    case OpType::kParameter: {
      if (!operands.empty()) return arity_error(0);
      if (!target) {
        return absl::InvalidArgumentError(
            absl::StrCat(kind.ToString(), " requires an explicit shape"));
      }
      if (auto st = ValidateShape(*target); !st.ok()) return st;
      return std::make_pair(*target, int64_t{0});
    }
    case OpType::kMatmul:
    case OpType::kBatchedMatmul: {
      if (operands.size() != 2) return arity_error(2);
      const int batch = kind.type == OpType::kBatchedMatmul ? 1 : 0;
      const TensorShape& lhs = operands[0];
      const TensorShape& rhs = operands[1];
      if (lhs.rank() != 2 + batch || rhs.rank() != 2 + batch) {
        return absl::InvalidArgumentError(absl::StrCat(
            kind.ToString(), " operands must have rank ", 2 + batch));
      }
      if (lhs.elem_bytes != rhs.elem_bytes) {
        return absl::InvalidArgumentError("matmul element size mismatch");
      }
      if (batch && lhs.dims[0] != rhs.dims[0]) {
        return absl::InvalidArgumentError("batched matmul batch mismatch");
      }
      const int64_t k = lhs.dims[batch + kind.lhs_contract];
      if (k != rhs.dims[batch + kind.rhs_contract]) {
        return absl::InvalidArgumentError(
            absl::StrCat("contraction extent mismatch: ", lhs.ToString(),
                         " vs ", rhs.ToString()));
      }
      const int64_t i = lhs.dims[batch + Other(kind.lhs_contract)];
      const int64_t j = rhs.dims[batch + Other(kind.rhs_contract)];
      TensorShape out;
      out.elem_bytes = lhs.elem_bytes;
      if (batch) out.dims.push_back(lhs.dims[0]);
      out.dims.push_back(i);
      out.dims.push_back(j);
      if (auto st = ValidateShape(out); !st.ok()) return st;
      int64_t flop = 2;
      for (int64_t f : {batch ? lhs.dims[0] : int64_t{1}, i, j, k}) {
        if (MulOverflows(flop, f)) {
          return absl::OutOfRangeError("matmul FLOP count overflows");
        }
        flop *= f;
      }
      return std::make_pair(out, flop);
    }
    case OpType::kElementwise: {
      if (kind.arity < 1 || operands.size() != static_cast<size_t>(kind.arity))
        return arity_error(kind.arity);
      for (const TensorShape& s : operands) {
        if (s != operands[0]) {
          return absl::InvalidArgumentError(
              "elementwise operands must have identical shapes");
        }
      }
      return std::make_pair(operands[0], operands[0].NumElements());
    }
    case OpType::kReduction: {
      if (operands.size() != 1) return arity_error(1);
      const TensorShape& in = operands[0];
      if (kind.axis < 0 || kind.axis >= in.rank() || in.rank() < 2) {
        return absl::InvalidArgumentError(
            absl::StrCat("reduction axis ", kind.axis, " invalid for ",
                         in.ToString()));
      }
      TensorShape out = in;
      out.dims.erase(out.dims.begin() + kind.axis);
      return std::make_pair(out, in.NumElements());
    }
    case OpType::kReshape: {
      if (operands.size() != 1) return arity_error(1);
      if (!target) {
        return absl::InvalidArgumentError("Reshape requires a target shape");
      }
      if (auto st = ValidateShape(*target); !st.ok()) return st;
      if (target->ByteSize() != operands[0].ByteSize()) {
        return absl::InvalidArgumentError(
            absl::StrCat("reshape changes byte size: ",
                         operands[0].ToString(), " -> ", target->ToString()));
      }
      return std::make_pair(*target, int64_t{0});
    }
  }
  return absl::InternalError("unhandled op kind");
}

absl::StatusOr<int> OpGraph::Add(OpKind kind, std::vector<int> operands,
                                 std::optional<TensorShape> shape) {
  std::vector<TensorShape> shapes;
  OpNode node;
  node.id = size();
  node.kind = kind;
  for (int p : operands) {
    if (p < 0 || p >= size()) {
      return absl::InvalidArgumentError(absl::StrCat("unknown producer ", p));
    }
    shapes.push_back(nodes_[p].out_shape);
    node.inputs.push_back({p, 0});
  }
  auto inferred = InferShapeAndFlop(kind, shapes, shape);
  if (!inferred.ok()) return inferred.status();
  node.out_shape = inferred->first;
  node.flop = inferred->second;
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

absl::Status OpGraph::Validate() const {
  auto at = [](int id, absl::string_view what) {
    return absl::InvalidArgumentError(absl::StrCat("node ", id, ": ", what));
  };
  for (int idx = 0; idx < size(); ++idx) {
    const OpNode& n = nodes_[idx];
    if (n.id != idx) {
      return at(n.id, absl::StrCat("ids must be dense and ordered; expected ",
                                   idx));
    }
    if (!n.kind.IsSource() && n.inputs.empty()) {
      return at(n.id, "non-source node has no inputs");
    }
    std::vector<TensorShape> shapes;
    for (const TensorRef& ref : n.inputs) {
      if (ref.node < 0 || ref.node >= size()) {
        return absl::InvalidArgumentError(absl::StrCat(
            "node ", n.id, ": unknown producer ", ref.node));
      }
      if (ref.node >= n.id) {
        return absl::InvalidArgumentError(absl::StrCat(
            "node ", n.id, ": consumes node ", ref.node,
            " which does not precede it in topological order"));
      }
      if (ref.index != 0) {
        return at(n.id, absl::StrCat("output index ", ref.index,
                                     " out of range for node ", ref.node));
      }
      shapes.push_back(nodes_[ref.node].out_shape);
    }
    std::optional<TensorShape> target;
    if (n.kind.IsSource() || n.kind.type == OpType::kReshape) {
      target = n.out_shape;
    }
    auto inferred = InferShapeAndFlop(n.kind, shapes, target);
    if (!inferred.ok()) return at(n.id, inferred.status().message());
    if (inferred->first != n.out_shape) {
      return at(n.id, absl::StrCat("shape ", n.out_shape.ToString(),
                                   " inconsistent with operands (expected ",
                                   inferred->first.ToString(), ")"));
    }
    if (inferred->second != n.flop) {
      return at(n.id, absl::StrCat("flop ", n.flop, " inconsistent, expected ",
                                   inferred->second));
    }
    if (n.colocate_with) {
      int c = *n.colocate_with;
      if (c < 0 || c >= size() || c == n.id) {
        return at(n.id, absl::StrCat("bad colocate_with ", c));
      }
      if (nodes_[c].colocate_with) {
        return at(n.id, "colocate_with must name a forward node");
      }
    }
    if (n.grad_of) {
      int p = *n.grad_of;
      if (p < 0 || p >= size() || nodes_[p].kind.type != OpType::kParameter) {
        return at(n.id, absl::StrCat("grad_of ", p, " is not a parameter"));
      }
      if (nodes_[p].out_shape != n.out_shape) {
        return at(n.id, "gradient shape differs from its parameter");
      }
    }
  }
  for (int o : outputs_) {
    if (o < 0 || o >= size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown output node ", o));
    }
  }
  return absl::OkStatus();
}

int64_t OpGraph::TotalFlop() const {
  int64_t total = 0;
  for (const OpNode& n : nodes_) total += n.flop;
  return total;
}

bool OpGraph::HasBackward() const {
  return std::any_of(nodes_.begin(), nodes_.end(),
                     [](const OpNode& n) { return n.is_backward(); });
}

namespace {

TensorShape Shape2(int64_t a, int64_t b) { return {{a, b}, 4}; }

}  // namespace

absl::StatusOr<OpGraph> BuildMlp(int num_layers, int batch, int hidden,
                                 bool with_backward) {
  if (num_layers < 1 || batch < 1 || hidden < 1) {
    return absl::InvalidArgumentError("build_mlp arguments must be >= 1");
  }
  OpGraph g;
  auto x = g.Add(OpKind::Input(), {}, Shape2(batch, hidden));
  if (!x.ok()) return x.status();
  int cur = *x;
  for (int l = 0; l < num_layers; ++l) {
    auto w = g.Add(OpKind::Parameter(), {}, Shape2(hidden, hidden));
    if (!w.ok()) return w.status();
    auto mm = g.Add(OpKind::Matmul(), {cur, *w});
    if (!mm.ok()) return mm.status();
    auto act = g.Add(OpKind::Elementwise(1), {*mm});
    if (!act.ok()) return act.status();
    cur = *act;
  }
  g.MarkOutput(cur);
  if (with_backward) {
    if (auto st = AppendBackward(g); !st.ok()) return st;
  }
  return g;
}

absl::StatusOr<OpGraph> BuildTransformerBlocks(int num_blocks, int batch,
                                               int seq, int hidden, int heads,
                                               bool with_backward) {
  if (num_blocks < 1 || batch < 1 || seq < 1 || hidden < 1 || heads < 1) {
    return absl::InvalidArgumentError(
        "build_transformer_blocks arguments must be >= 1");
  }
  if (hidden % heads != 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        "hidden (", hidden, ") must be divisible by heads (", heads, ")"));
  }
  const int64_t tokens = int64_t{batch} * seq;
  const int64_t head_dim = hidden / heads;
  const TensorShape per_head{{int64_t{batch} * heads, seq, head_dim}, 4};
  OpGraph g;
  absl::Status status;
  auto add = [&](OpKind kind, std::vector<int> ops,
                 std::optional<TensorShape> shape = std::nullopt) {
    if (!status.ok()) return -1;
    auto id = g.Add(kind, std::move(ops), std::move(shape));
    if (!id.ok()) {
      status = id.status();
      return -1;
    }
    return *id;
  };
  int x = add(OpKind::Input(), {}, Shape2(tokens, hidden));
  for (int b = 0; b < num_blocks && status.ok(); ++b) {
    int wq = add(OpKind::Parameter(), {}, Shape2(hidden, hidden));
    int q = add(OpKind::Matmul(), {x, wq});
    int wk = add(OpKind::Parameter(), {}, Shape2(hidden, hidden));
    int k = add(OpKind::Matmul(), {x, wk});
    int wv = add(OpKind::Parameter(), {}, Shape2(hidden, hidden));
    int v = add(OpKind::Matmul(), {x, wv});
    int qh = add(OpKind::Reshape(), {q}, per_head);
    int kh = add(OpKind::Reshape(), {k}, per_head);
    int vh = add(OpKind::Reshape(), {v}, per_head);
    // scores[bh, s, t] = sum_d q[bh, s, d] * k[bh, t, d]
    int scores = add(OpKind::BatchedMatmul(1, 1), {qh, kh});
    int probs = add(OpKind::Elementwise(1), {scores});
    // ctx[bh, s, d] = sum_t probs[bh, s, t] * v[bh, t, d]
    int ctx = add(OpKind::BatchedMatmul(1, 0), {probs, vh});
    int merged = add(OpKind::Reshape(), {ctx}, Shape2(tokens, hidden));
    int wo = add(OpKind::Parameter(), {}, Shape2(hidden, hidden));
    int proj = add(OpKind::Matmul(), {merged, wo});
    int res1 = add(OpKind::Elementwise(2), {proj, x});
    int w1 = add(OpKind::Parameter(), {}, Shape2(hidden, 4 * int64_t{hidden}));
    int up = add(OpKind::Matmul(), {res1, w1});
    int act = add(OpKind::Elementwise(1), {up});
    int w2 = add(OpKind::Parameter(), {}, Shape2(4 * int64_t{hidden}, hidden));
    int down = add(OpKind::Matmul(), {act, w2});
    x = add(OpKind::Elementwise(2), {down, res1});
  }
  if (!status.ok()) return status;
  g.MarkOutput(x);
  if (with_backward) {
    if (auto st = AppendBackward(g); !st.ok()) return st;
  }
  return g;
}

absl::StatusOr<OpGraph> BuildRandomGraph(int num_layers, int width,
                                         uint64_t seed) {
  if (num_layers < 1 || width < 1) {
    return absl::InvalidArgumentError("random graph needs layers, width >= 1");
  }
  std::mt19937_64 rng(seed);
  const int64_t rows = int64_t{4} << (rng() % 2);
  const int64_t cols = int64_t{4} << (rng() % 2);
  OpGraph g;
  std::vector<int> live;
  auto x = g.Add(OpKind::Input(), {}, Shape2(rows, cols));
  if (!x.ok()) return x.status();
  live.push_back(*x);
  for (int l = 0; l < num_layers; ++l) {
    std::vector<int> next;
    for (int w = 0; w < width; ++w) {
      const int a = live[rng() % live.size()];
      if (rng() % 3 != 0) {
        auto p = g.Add(OpKind::Parameter(), {}, Shape2(cols, cols));
        if (!p.ok()) return p.status();
        auto mm = g.Add(OpKind::Matmul(), {a, *p});
        if (!mm.ok()) return mm.status();
        next.push_back(*mm);
      } else {
        const int b = live[rng() % live.size()];
        auto e = g.Add(OpKind::Elementwise(2), {a, b});
        if (!e.ok()) return e.status();
        next.push_back(*e);
      }
    }
    live = std::move(next);
  }
  for (int id : live) g.MarkOutput(id);
  return g;
}

absl::Status AppendBackward(OpGraph& graph) {
  if (graph.HasBackward()) {
    return absl::FailedPreconditionError("graph already has backward ops");
  }
  const int forward_size = graph.size();
  // requires_grad: parameters and anything downstream of one.
  std::vector<bool> needs(forward_size, false);
  for (int v = 0; v < forward_size; ++v) {
    const OpNode& n = graph.node(v);
    needs[v] = n.kind.type == OpType::kParameter;
    for (const TensorRef& r : n.inputs) needs[v] = needs[v] || needs[r.node];
  }
  std::map<int, std::vector<int>> contributions;
  absl::Status status;
  auto add = [&](OpKind kind, std::vector<int> ops, int colocate,
                 std::optional<TensorShape> shape = std::nullopt) {
    if (!status.ok()) return -1;
    auto id = graph.Add(kind, std::move(ops), std::move(shape));
    if (!id.ok()) {
      status = id.status();
      return -1;
    }
    graph.SetColocation(*id, colocate);
    return *id;
  };
  // Sums the gradient contributions of v into one tensor.
  auto gradient_of = [&](int v) {
    std::vector<int>& parts = contributions[v];
    int acc = parts.front();
    for (size_t i = 1; i < parts.size(); ++i) {
      acc = add(OpKind::Elementwise(2), {acc, parts[i]}, v);
    }
    return acc;
  };
  for (int out : graph.outputs()) {
    if (needs[out]) {
      contributions[out].push_back(add(OpKind::Elementwise(1), {out}, out));
    }
  }
  for (int v = forward_size - 1; v >= 0 && status.ok(); --v) {
    if (!needs[v] || contributions[v].empty()) continue;
    const OpNode fwd = graph.node(v);
    const int dy = gradient_of(v);
    if (fwd.kind.type == OpType::kParameter) {
      // Without any prior op the seed itself is the gradient.
      if (dy >= 0) graph.SetGradOf(dy, v);
      continue;
    }
    switch (fwd.kind.type) {
      case OpType::kMatmul:
      case OpType::kBatchedMatmul: {
        const int a = fwd.inputs[0].node;
        const int b = fwd.inputs[1].node;
        const int lc = fwd.kind.lhs_contract;
        const int rc = fwd.kind.rhs_contract;
        const bool batched = fwd.kind.type == OpType::kBatchedMatmul;
        auto mm = [&](int lhs_c, int rhs_c) {
          return batched ? OpKind::BatchedMatmul(lhs_c, rhs_c)
                         : OpKind::Matmul(lhs_c, rhs_c);
        };
        if (needs[a]) {
          // dA[i,k] = sum_j dC[i,j] B[k,j]; dA[k,i] = sum_j B[k,j] dC[i,j].
          int da = lc == 1 ? add(mm(1, 1 - rc), {dy, b}, v)
                           : add(mm(1 - rc, 1), {b, dy}, v);
          contributions[a].push_back(da);
        }
        if (needs[b]) {
          // dB[k,j] = sum_i A[i,k] dC[i,j]; dB[j,k] = sum_i dC[i,j] A[i,k].
          int db = rc == 0 ? add(mm(1 - lc, 0), {a, dy}, v)
                           : add(mm(0, 1 - lc), {dy, a}, v);
          contributions[b].push_back(db);
        }
        break;
      }
      case OpType::kElementwise: {
        for (const TensorRef& r : fwd.inputs) {
          if (!needs[r.node]) continue;
          contributions[r.node].push_back(
              add(OpKind::Elementwise(2), {dy, r.node}, v));
        }
        break;
      }
      case OpType::kReshape: {
        const int src = fwd.inputs[0].node;
        if (needs[src]) {
          contributions[src].push_back(add(OpKind::Reshape(), {dy}, v,
                                           graph.node(src).out_shape));
        }
        break;
      }
      case OpType::kReduction:
        return absl::UnimplementedError(absl::StrCat(
            "node ", v, ": backward of Reduction is not supported"));
      case OpType::kInput:
      case OpType::kParameter:
        break;
    }
  }
  if (!status.ok()) return status;
  return graph.Validate();
}

}  // namespace meshplan
