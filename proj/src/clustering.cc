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

#include "meshplan/clustering.h"

#include <algorithm>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace meshplan {
namespace {

constexpr int64_t kNoCost = std::numeric_limits<int64_t>::max();
using Wide = __int128;

}  // namespace

std::vector<int> ForwardChain(const OpGraph& graph) {
  std::vector<int> chain;
  for (const OpNode& n : graph.nodes()) {
    if (!n.is_backward()) chain.push_back(n.id);
  }
  return chain;
}

absl::StatusOr<LayerClustering> ClusterChain(const std::vector<int64_t>& flop,
                                             const InboundFn& inbound,
                                             int num_layers, double delta) {
  const int K = static_cast<int>(flop.size());
  const int L = num_layers;
  if (L < 1 || L > K) {
    return absl::InvalidArgumentError(absl::StrCat(
        "layer count ", L, " must be between 1 and the op count ", K));
  }
  if (!(delta >= 0)) {
    return absl::InvalidArgumentError("delta must be >= 0");
  }
  std::vector<int64_t> pre(K + 1, 0);
  for (int k = 0; k < K; ++k) pre[k + 1] = pre[k] + flop[k];
  const long double cap = (1.0L + delta) * static_cast<long double>(pre[K]);
  auto fits = [&](int i, int k) {
    return static_cast<long double>(pre[k + 1] - pre[i]) * L <= cap;
  };

  // g[r][p]: least max-inbound over partitions of the first p ops into r
  // layers.
  std::vector<std::vector<int64_t>> g(L + 1,
                                      std::vector<int64_t>(K + 1, kNoCost));
  g[0][0] = 0;
  for (int r = 1; r <= L; ++r) {
    for (int p = r; p <= K; ++p) {
      for (int q = r - 1; q < p; ++q) {
        if (g[r - 1][q] == kNoCost || !fits(q, p - 1)) continue;
        const int64_t c = std::max(g[r - 1][q], inbound(q, p - 1));
        g[r][p] = std::min(g[r][p], c);
      }
    }
  }
  const int64_t best = g[L][K];
  if (best == kNoCost) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "no clustering into %d layers keeps every layer within (1 + %g) "
        "times the average FLOP; increase delta",
        L, delta));
  }

  // v[r][p]: least sum of squared layer FLOP with every layer's inbound
  // bytes <= best.
  std::vector<std::vector<Wide>> v(L + 1, std::vector<Wide>(K + 1, -1));
  std::vector<std::vector<int>> arg(L + 1, std::vector<int>(K + 1, -1));
  v[0][0] = 0;
  for (int r = 1; r <= L; ++r) {
    for (int p = r; p <= K; ++p) {
      for (int q = r - 1; q < p; ++q) {
        if (v[r - 1][q] < 0 || !fits(q, p - 1)) continue;
        if (inbound(q, p - 1) > best) continue;
        const Wide f = pre[p] - pre[q];
        const Wide c = v[r - 1][q] + f * f;
        if (v[r][p] < 0 || c < v[r][p]) {
          v[r][p] = c;
          arg[r][p] = q;
        }
      }
    }
  }

  LayerClustering out;
  out.boundaries.assign(L + 1, 0);
  out.boundaries[L] = K;
  for (int r = L, p = K; r > 0; --r) {
    p = arg[r][p];
    out.boundaries[r - 1] = p;
  }
  for (int r = 0; r < L; ++r) {
    const int i = out.boundaries[r];
    const int k = out.boundaries[r + 1] - 1;
    out.layer_flop.push_back(pre[k + 1] - pre[i]);
    out.inbound_bytes.push_back(inbound(i, k));
    out.bottleneck = std::max(out.bottleneck, out.inbound_bytes.back());
  }
  out.layer_ops.assign(L, {});
  return out;
}

absl::StatusOr<LayerClustering> ClusterOperators(const OpGraph& graph,
                                                 int num_layers,
                                                 double delta) {
  const std::vector<int> chain = ForwardChain(graph);
  const int K = static_cast<int>(chain.size());
  std::vector<int> pos(graph.size(), -1);
  for (int k = 0; k < K; ++k) pos[chain[k]] = k;

  std::vector<int64_t> flop(K);
  for (int k = 0; k < K; ++k) flop[k] = graph.node(chain[k]).flop;

  std::vector<int64_t> table(size_t(K) * K, 0);
  std::vector<int> stamp(K, -1);
  for (int i = 0; i < K; ++i) {
    int64_t total = 0;
    for (int k = i; k < K; ++k) {
      const OpNode& n = graph.node(chain[k]);
      if (n.kind.type == OpType::kInput) total += n.out_shape.ByteSize();
      for (const TensorRef& r : n.inputs) {
        const int p = pos[r.node];
        if (p < 0 || p >= i || stamp[p] == i) continue;
        stamp[p] = i;
        total += graph.node(r.node).out_shape.ByteSize();
      }
      table[size_t(i) * K + k] = total;
    }
  }
  auto clustering = ClusterChain(
      flop, [&](int i, int k) { return table[size_t(i) * K + k]; },
      num_layers, delta);
  if (!clustering.ok()) return clustering.status();

  std::vector<int> layer_of_pos(K);
  for (int r = 0; r < clustering->num_layers(); ++r) {
    for (int k = clustering->boundaries[r]; k < clustering->boundaries[r + 1];
         ++k) {
      layer_of_pos[k] = r;
      clustering->layer_ops[r].push_back(chain[k]);
    }
  }
  for (const OpNode& n : graph.nodes()) {
    if (!n.is_backward()) continue;
    int f = *n.colocate_with;
    while (graph.node(f).is_backward()) f = *graph.node(f).colocate_with;
    clustering->layer_ops[layer_of_pos[pos[f]]].push_back(n.id);
  }
  for (auto& ops : clustering->layer_ops) std::sort(ops.begin(), ops.end());
  return clustering;
}

}  // namespace meshplan
