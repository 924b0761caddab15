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

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "meshplan/ilp.h"

namespace meshplan {
namespace {

// Cost table over `scope` (ascending variable ids), row-major with the first
// scope variable most significant.
struct Factor {
  std::vector<int> scope;
  std::vector<Seconds> table;
};

struct Elimination {
  int v = 0;
  std::vector<int> scope;
  std::vector<uint16_t> arg;  // best value of v per scope assignment
};

// Largest factor variable elimination may create before the solver
// conditions on a variable instead.
constexpr int64_t kMaxTable = int64_t{1} << 16;

class Solver {
 public:
  Solver(const IlpProblem& p, int64_t budget)
      : n_(p.num_nodes()), budget_(budget) {
    for (int v = 0; v < n_; ++v) domain_.push_back(p.num_strategies(v));
    for (int v = 0; v < n_; ++v) factors_.push_back({{v}, p.node_costs[v]});
    std::map<std::pair<int, int>, std::vector<Seconds>> pairs;
    for (const IlpEdge& e : p.edges) {
      const int u = std::min(e.u, e.v);
      const int v = std::max(e.u, e.v);
      auto [it, inserted] = pairs.try_emplace(
          {u, v}, std::vector<Seconds>(size_t(domain_[u]) * domain_[v]));
      for (int a = 0; a < domain_[e.u]; ++a) {
        for (int b = 0; b < domain_[e.v]; ++b) {
          const Seconds c = e.cost[size_t(a) * domain_[e.v] + b];
          const size_t at = e.u < e.v ? size_t(a) * domain_[v] + b
                                      : size_t(b) * domain_[v] + a;
          it->second[at] += c;
        }
      }
    }
    for (auto& [key, table] : pairs) {
      factors_.push_back({{key.first, key.second}, std::move(table)});
    }
  }

  IlpSolution Run() {
    IlpSolution out;
    std::vector<int> vars(n_);
    std::iota(vars.begin(), vars.end(), 0);
    std::vector<int> choice(n_, 0);
    Solve(factors_, vars, choice, Seconds::Infinity(), /*top=*/true, out);
    out.choice = std::move(choice);
    out.explored = work_;
    out.certified = certified_;
    return out;
  }

 private:
  size_t IndexOf(const std::vector<int>& scope,
                 const std::vector<int>& assign) const {
    size_t idx = 0;
    for (int v : scope) idx = idx * domain_[v] + assign[v];
    return idx;
  }

  int64_t ScopeSize(const std::vector<int>& scope) const {
    int64_t size = 1;
    for (int v : scope) size = std::min(size * domain_[v], kMaxTable + 1);
    return size;
  }

  std::vector<int> MergedScope(const std::vector<Factor>& fs, int v) const {
    std::vector<int> scope;
    for (const Factor& f : fs) {
      if (!std::binary_search(f.scope.begin(), f.scope.end(), v)) continue;
      for (int u : f.scope) {
        if (u != v) scope.push_back(u);
      }
    }
    std::sort(scope.begin(), scope.end());
    scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
    return scope;
  }

  // Sums every factor mentioning v and minimizes v out.
  Elimination EliminateVar(std::vector<Factor>& fs, int v) {
    Elimination e;
    e.v = v;
    e.scope = MergedScope(fs, v);
    std::vector<Factor> touching;
    std::vector<Factor> rest;
    for (Factor& f : fs) {
      (std::binary_search(f.scope.begin(), f.scope.end(), v) ? touching : rest)
          .push_back(std::move(f));
    }
    const int64_t size = ScopeSize(e.scope);
    Factor out{e.scope, std::vector<Seconds>(size)};
    e.arg.assign(size, 0);
    std::vector<int> assign(n_, 0);
    for (int64_t idx = 0; idx < size; ++idx) {
      // Decode idx into the scope variables.
      int64_t rem = idx;
      for (auto it = e.scope.rbegin(); it != e.scope.rend(); ++it) {
        assign[*it] = static_cast<int>(rem % domain_[*it]);
        rem /= domain_[*it];
      }
      Seconds best = Seconds::Infinity();
      for (int x = 0; x < domain_[v]; ++x) {
        assign[v] = x;
        Seconds t = Seconds::Zero();
        for (const Factor& f : touching) t += f.table[IndexOf(f.scope, assign)];
        if (t < best) best = t, e.arg[idx] = static_cast<uint16_t>(x);
      }
      out.table[idx] = best;
    }
    work_ += size * domain_[v];
    rest.push_back(std::move(out));
    fs = std::move(rest);
    return e;
  }

  std::vector<Factor> Restrict(const std::vector<Factor>& fs, int v,
                               int x) const {
    std::vector<Factor> out;
    std::vector<int> assign(n_, 0);
    assign[v] = x;
    for (const Factor& f : fs) {
      if (!std::binary_search(f.scope.begin(), f.scope.end(), v)) {
        out.push_back(f);
        continue;
      }
      Factor g;
      for (int u : f.scope) {
        if (u != v) g.scope.push_back(u);
      }
      const int64_t size = ScopeSize(g.scope);
      g.table.resize(size);
      for (int64_t idx = 0; idx < size; ++idx) {
        int64_t rem = idx;
        for (auto it = g.scope.rbegin(); it != g.scope.rend(); ++it) {
          assign[*it] = static_cast<int>(rem % domain_[*it]);
          rem /= domain_[*it];
        }
        g.table[idx] = f.table[IndexOf(f.scope, assign)];
      }
      out.push_back(std::move(g));
    }
    return out;
  }

  // Minimizes the sum of `fs` over `vars`, writing the argmin into `choice`.
  // Branches that cannot go below `ub` are pruned; a pruned subproblem
  // reports Infinity.
  Seconds Solve(std::vector<Factor> fs, std::vector<int> vars,
                std::vector<int>& choice, Seconds ub, bool top,
                IlpSolution& out) {
    std::vector<Elimination> elims;
    while (!vars.empty()) {
      // Smallest resulting table first, lowest id on ties.
      int pick = -1;
      int64_t pick_size = 0;
      for (int v : vars) {
        const int64_t size = ScopeSize(MergedScope(fs, v));
        if (pick < 0 || size < pick_size) pick = v, pick_size = size;
      }
      if (pick_size > kMaxTable) break;
      elims.push_back(EliminateVar(fs, pick));
      vars.erase(std::find(vars.begin(), vars.end(), pick));
    }
    if (top) out.eliminated = static_cast<int>(elims.size());

    Seconds value = Seconds::Zero();
    if (vars.empty()) {
      for (const Factor& f : fs) value += f.table.at(0);
    } else {
      // Condition on the variable with the most factor neighbours.
      int c = vars.front();
      size_t most = 0;
      for (int v : vars) {
        const size_t k = MergedScope(fs, v).size();
        if (k > most) c = v, most = k;
      }
      std::vector<int> sub_vars;
      for (int v : vars) {
        if (v != c) sub_vars.push_back(v);
      }
      // Branches in order of a factor-minima lower bound; a branch that
      // cannot beat the best known value is skipped.
      std::vector<std::pair<Seconds, int>> branches;
      std::vector<std::vector<Factor>> restricted(domain_[c]);
      for (int x = 0; x < domain_[c]; ++x) {
        restricted[x] = Restrict(fs, c, x);
        Seconds lb = Seconds::Zero();
        for (const Factor& f : restricted[x]) {
          lb += *std::min_element(f.table.begin(), f.table.end());
        }
        branches.push_back({lb, x});
      }
      std::stable_sort(branches.begin(), branches.end());
      value = Seconds::Infinity();
      std::vector<int> trial = choice;
      bool first = true;
      for (const auto& [lb, x] : branches) {
        if (!(lb < Min(value, ub))) break;
        if (!first && work_ > budget_) {
          certified_ = false;
          break;
        }
        first = false;
        ++work_;
        trial[c] = x;
        const Seconds t = Solve(std::move(restricted[x]), sub_vars, trial,
                                Min(value, ub), /*top=*/false, out);
        if (t < value) {
          value = t;
          for (int v : vars) choice[v] = trial[v];
        }
      }
    }
    for (auto it = elims.rbegin(); it != elims.rend(); ++it) {
      choice[it->v] = it->arg[IndexOf(it->scope, choice)];
    }
    return value;
  }

  int n_;
  int64_t budget_;
  std::vector<int> domain_;
  std::vector<Factor> factors_;
  int64_t work_ = 0;
  bool certified_ = true;
};

}  // namespace

absl::Status IlpProblem::Validate() const {
  for (int v = 0; v < num_nodes(); ++v) {
    if (node_costs[v].empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("ILP node ", v, " has no strategies"));
    }
    for (Seconds c : node_costs[v]) {
      if (!c.is_finite() || c < Seconds::Zero()) {
        return absl::InvalidArgumentError(
            absl::StrCat("ILP node ", v, " has a non-finite or negative cost"));
      }
    }
  }
  for (const IlpEdge& e : edges) {
    if (e.u < 0 || e.v < 0 || e.u >= num_nodes() || e.v >= num_nodes() ||
        e.u == e.v) {
      return absl::InvalidArgumentError(
          absl::StrCat("ILP edge (", e.u, ", ", e.v, ") is malformed"));
    }
    if (e.cost.size() !=
        size_t(num_strategies(e.u)) * size_t(num_strategies(e.v))) {
      return absl::InvalidArgumentError(absl::StrCat(
          "ILP edge (", e.u, ", ", e.v, ") has a wrongly sized matrix"));
    }
  }
  return absl::OkStatus();
}

Seconds EvaluateObjective(const IlpProblem& problem,
                          const std::vector<int>& choice) {
  Seconds total = Seconds::Zero();
  for (int v = 0; v < problem.num_nodes(); ++v) {
    total += problem.node_costs[v][choice[v]];
  }
  for (const IlpEdge& e : problem.edges) {
    total += e.cost[choice[e.u] * problem.num_strategies(e.v) + choice[e.v]];
  }
  return total;
}

IlpSolution SolveIlp(const IlpProblem& problem, int64_t budget) {
  Solver solver(problem, budget);
  IlpSolution out = solver.Run();
  out.objective = EvaluateObjective(problem, out.choice);
  return out;
}

std::string ExportLp(const IlpProblem& problem) {
  auto s = [](int v, int i) { return absl::StrCat("s_", v, "_", i); };
  auto e = [](int k, int i, int j) {
    return absl::StrCat("e_", k, "_", i, "_", j);
  };
  std::string out = "\\ strategy selection\nMinimize\n obj:";
  bool any = false;
  for (int v = 0; v < problem.num_nodes(); ++v) {
    for (int i = 0; i < problem.num_strategies(v); ++i) {
      absl::StrAppend(&out, any ? " +" : "", " ",
                      absl::StrFormat("%.12g", problem.node_costs[v][i].ToDouble()),
                      " ", s(v, i));
      any = true;
    }
  }
  for (size_t k = 0; k < problem.edges.size(); ++k) {
    const IlpEdge& ed = problem.edges[k];
    const int kv = problem.num_strategies(ed.v);
    for (int i = 0; i < problem.num_strategies(ed.u); ++i) {
      for (int j = 0; j < kv; ++j) {
        absl::StrAppend(&out, " + ",
                        absl::StrFormat("%.12g", ed.cost[i * kv + j].ToDouble()),
                        " ", e(int(k), i, j));
      }
    }
  }
  absl::StrAppend(&out, "\nSubject To\n");
  for (int v = 0; v < problem.num_nodes(); ++v) {
    absl::StrAppend(&out, " pick_", v, ":");
    for (int i = 0; i < problem.num_strategies(v); ++i) {
      absl::StrAppend(&out, i ? " + " : " ", s(v, i));
    }
    absl::StrAppend(&out, " = 1\n");
  }
  for (size_t k = 0; k < problem.edges.size(); ++k) {
    const IlpEdge& ed = problem.edges[k];
    const int ku = problem.num_strategies(ed.u);
    const int kv = problem.num_strategies(ed.v);
    for (int i = 0; i < ku; ++i) {
      absl::StrAppend(&out, " row_", k, "_", i, ":");
      for (int j = 0; j < kv; ++j) absl::StrAppend(&out, " + ", e(int(k), i, j));
      absl::StrAppend(&out, " - ", s(ed.u, i), " = 0\n");
    }
    for (int j = 0; j < kv; ++j) {
      absl::StrAppend(&out, " col_", k, "_", j, ":");
      for (int i = 0; i < ku; ++i) absl::StrAppend(&out, " + ", e(int(k), i, j));
      absl::StrAppend(&out, " - ", s(ed.v, j), " = 0\n");
    }
  }
  absl::StrAppend(&out, "Binary\n");
  for (int v = 0; v < problem.num_nodes(); ++v) {
    for (int i = 0; i < problem.num_strategies(v); ++i) {
      absl::StrAppend(&out, " ", s(v, i), "\n");
    }
  }
  for (size_t k = 0; k < problem.edges.size(); ++k) {
    const IlpEdge& ed = problem.edges[k];
    for (int i = 0; i < problem.num_strategies(ed.u); ++i) {
      for (int j = 0; j < problem.num_strategies(ed.v); ++j) {
        absl::StrAppend(&out, " ", e(int(k), i, j), "\n");
      }
    }
  }
  absl::StrAppend(&out, "End\n");
  return out;
}

}  // namespace meshplan
