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

// Strategy-selection ILP: pick one strategy s_v per node minimizing
//   sum_v c_v[s_v] + sum_(u,v) R_uv[s_u][s_v].
// The quadratic edge term is what the linearized form (one-hot s_v, one-hot
// e_uv with row/column linking constraints) encodes; the solver below works
// on the equivalent pairwise form directly and is exact.

#ifndef MESHPLAN_ILP_H_
#define MESHPLAN_ILP_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "meshplan/seconds.h"

namespace meshplan {

struct IlpEdge {
  int u = 0;
  int v = 0;
  // Row-major k_u x k_v.
  std::vector<Seconds> cost;
};

struct IlpProblem {
  std::vector<std::vector<Seconds>> node_costs;
  std::vector<IlpEdge> edges;

  int num_nodes() const { return static_cast<int>(node_costs.size()); }
  int num_strategies(int v) const {
    return static_cast<int>(node_costs[v].size());
  }
  // Every node has >= 1 strategy, edges are well-sized, costs finite >= 0.
  absl::Status Validate() const;
};

struct IlpSolution {
  std::vector<int> choice;
  Seconds objective = Seconds::Infinity();
  // False when the search budget ran out before optimality was proven.
  bool certified = true;
  int64_t explored = 0;
  // Nodes removed by variable elimination before any conditioning.
  int eliminated = 0;
};

inline constexpr int64_t kDefaultSolverBudget = 20'000'000;

Seconds EvaluateObjective(const IlpProblem& problem,
                          const std::vector<int>& choice);

// Exact minimization by min-size variable elimination. When every remaining
// elimination would build a table over 2^16 entries, the solver enumerates
// the values of the most connected variable and recurses. `budget` caps the
// table entries built plus branches taken; past it, conditioning keeps only
// the branches already tried and the result is no longer certified.
// Eliminated variables take the lowest optimal strategy index.
IlpSolution SolveIlp(const IlpProblem& problem,
                     int64_t budget = kDefaultSolverBudget);

// Linearized ILP in LP text format: binary s_v_i, binary e_u_v_i_j, one-hot
// rows, and linking constraints sum_j e_uvij = s_ui, sum_i e_uvij = s_vj.
std::string ExportLp(const IlpProblem& problem);

}  // namespace meshplan

#endif  // MESHPLAN_ILP_H_
