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

// Pipeline plan serialization. Every time appears twice: as float seconds
// for reading and as integer picoseconds ("*_ps") for exact reloading.
// Nothing wall-clock dependent is written, so equal inputs give equal bytes.

#ifndef MESHPLAN_PLAN_JSON_H_
#define MESHPLAN_PLAN_JSON_H_

#include <string>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "meshplan/graph.h"
#include "meshplan/inter_op.h"
#include "meshplan/mesh.h"

namespace meshplan {

inline constexpr char kPlanFormat[] = "meshplan.plan/1";

nlohmann::json PlanToJson(const PipelinePlan& plan, const OpGraph& graph,
                          const ClusterMesh& cluster);

// Restores what simulation needs: stage ranges, ops, shapes, rectangles,
// placed views, layouts and cost reports. Checks the plan against the graph
// and cluster it is loaded for.
absl::StatusOr<PipelinePlan> PlanFromJson(const nlohmann::json& doc,
                                          const OpGraph& graph,
                                          const ClusterMesh& cluster);

nlohmann::json ClusterToJson(const ClusterMesh& cluster);

// Human-readable summary.
std::string PlanReport(const PipelinePlan& plan);

}  // namespace meshplan

#endif  // MESHPLAN_PLAN_JSON_H_
