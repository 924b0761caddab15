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

#ifndef MESHPLAN_GRAPH_JSON_H_
#define MESHPLAN_GRAPH_JSON_H_

#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "meshplan/graph.h"
#include "json.hpp"

namespace meshplan {

// JSON graph format, version 1:
//   {"version": 1,
//    "nodes": [{"id": int, "kind": string, "inputs": [[id, out_idx], ...],
//               "shape": {"dims": [...], "elem_bytes": int}, "flop": number,
//               "colocate_with": id (optional), "grad_of": id (optional)}],
//    "outputs": [id, ...]}
// Unknown fields are rejected at every level.
nlohmann::json GraphToJson(const OpGraph& graph);
absl::StatusOr<OpGraph> GraphFromJson(const nlohmann::json& doc);

std::string Serialize(const OpGraph& graph);
absl::StatusOr<OpGraph> Parse(std::string_view text);

}  // namespace meshplan

#endif  // MESHPLAN_GRAPH_JSON_H_
