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

#include "meshplan/graph_json.h"

#include <set>

#include "absl/strings/str_cat.h"

namespace meshplan {
namespace {

using nlohmann::json;

absl::Status CheckKeys(const json& obj, const std::set<std::string>& allowed,
                       absl::string_view where) {
  if (!obj.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat(where, ": expected an object"));
  }
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      return absl::InvalidArgumentError(
          absl::StrCat(where, ": unknown field '", key, "'"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<int64_t> GetInt(const json& obj, const char* key,
                               absl::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    return absl::InvalidArgumentError(
        absl::StrCat(where, ": missing field '", key, "'"));
  }
  if (it->is_number_integer()) return it->get<int64_t>();
  if (it->is_number_float()) {
    double v = it->get<double>();
    if (v == static_cast<double>(static_cast<int64_t>(v))) {
      return static_cast<int64_t>(v);
    }
  }
  return absl::InvalidArgumentError(
      absl::StrCat(where, ": field '", key, "' must be an integer"));
}

}  // namespace

json GraphToJson(const OpGraph& graph) {
  json nodes = json::array();
  for (const OpNode& n : graph.nodes()) {
    json inputs = json::array();
    for (const TensorRef& r : n.inputs) inputs.push_back({r.node, r.index});
    json node = {
        {"id", n.id},
        {"kind", n.kind.ToString()},
        {"inputs", inputs},
        {"shape", {{"dims", n.out_shape.dims},
                   {"elem_bytes", n.out_shape.elem_bytes}}},
        {"flop", n.flop},
    };
    if (n.colocate_with) node["colocate_with"] = *n.colocate_with;
    if (n.grad_of) node["grad_of"] = *n.grad_of;
    nodes.push_back(std::move(node));
  }
  return {{"version", 1}, {"nodes", nodes}, {"outputs", graph.outputs()}};
}

absl::StatusOr<OpGraph> GraphFromJson(const json& doc) {
  if (auto st = CheckKeys(doc, {"version", "nodes", "outputs"}, "graph");
      !st.ok()) {
    return st;
  }
  auto version = GetInt(doc, "version", "graph");
  if (!version.ok()) return version.status();
  if (*version != 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("unsupported graph version ", *version));
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    return absl::InvalidArgumentError("graph: 'nodes' must be an array");
  }
  if (!doc.contains("outputs") || !doc["outputs"].is_array()) {
    return absl::InvalidArgumentError("graph: 'outputs' must be an array");
  }
  OpGraph graph;
  int position = 0;
  for (const json& jn : doc["nodes"]) {
    const std::string where = absl::StrCat("node #", position++);
    if (auto st = CheckKeys(jn, {"id", "kind", "inputs", "shape", "flop",
                                 "colocate_with", "grad_of"},
                            where);
        !st.ok()) {
      return st;
    }
    OpNode node;
    auto id = GetInt(jn, "id", where);
    if (!id.ok()) return id.status();
    node.id = static_cast<int>(*id);
    const std::string at = absl::StrCat("node ", node.id);
    if (!jn.contains("kind") || !jn["kind"].is_string()) {
      return absl::InvalidArgumentError(absl::StrCat(at, ": missing kind"));
    }
    auto kind = OpKind::Parse(jn["kind"].get<std::string>());
    if (!kind.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat(at, ": ", kind.status().message()));
    }
    node.kind = *kind;
    if (!jn.contains("inputs") || !jn["inputs"].is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat(at, ": 'inputs' must be an array"));
    }
    for (const json& edge : jn["inputs"]) {
      if (!edge.is_array() || edge.size() != 2 ||
          !edge[0].is_number_integer() || !edge[1].is_number_integer()) {
        return absl::InvalidArgumentError(
            absl::StrCat(at, ": each input must be [id, out_idx]"));
      }
      node.inputs.push_back({edge[0].get<int>(), edge[1].get<int>()});
    }
    if (!jn.contains("shape")) {
      return absl::InvalidArgumentError(absl::StrCat(at, ": missing shape"));
    }
    const json& js = jn["shape"];
    if (auto st = CheckKeys(js, {"dims", "elem_bytes"}, at + " shape");
        !st.ok()) {
      return st;
    }
    if (!js.contains("dims") || !js["dims"].is_array()) {
      return absl::InvalidArgumentError(
          absl::StrCat(at, ": shape.dims must be an array"));
    }
    for (const json& d : js["dims"]) {
      if (!d.is_number_integer()) {
        return absl::InvalidArgumentError(
            absl::StrCat(at, ": shape.dims must hold integers"));
      }
      node.out_shape.dims.push_back(d.get<int64_t>());
    }
    auto eb = GetInt(js, "elem_bytes", at + " shape");
    if (!eb.ok()) return eb.status();
    node.out_shape.elem_bytes = static_cast<int>(*eb);
    if (auto st = ValidateShape(node.out_shape); !st.ok()) {
      return absl::InvalidArgumentError(absl::StrCat(at, ": ", st.message()));
    }
    auto flop = GetInt(jn, "flop", at);
    if (!flop.ok()) return flop.status();
    node.flop = *flop;
    if (jn.contains("colocate_with")) {
      auto c = GetInt(jn, "colocate_with", at);
      if (!c.ok()) return c.status();
      node.colocate_with = static_cast<int>(*c);
    }
    if (jn.contains("grad_of")) {
      auto g = GetInt(jn, "grad_of", at);
      if (!g.ok()) return g.status();
      node.grad_of = static_cast<int>(*g);
    }
    graph.AppendRaw(std::move(node));
  }
  std::vector<int> outputs;
  for (const json& o : doc["outputs"]) {
    if (!o.is_number_integer()) {
      return absl::InvalidArgumentError("graph: outputs must be node ids");
    }
    outputs.push_back(o.get<int>());
  }
  graph.SetOutputs(std::move(outputs));
  if (auto st = graph.Validate(); !st.ok()) return st;
  return graph;
}

std::string Serialize(const OpGraph& graph) {
  return GraphToJson(graph).dump(1);
}

absl::StatusOr<OpGraph> Parse(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr,
                         /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError("malformed JSON document");
  }
  return GraphFromJson(doc);
}

}  // namespace meshplan
