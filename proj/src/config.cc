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

#include "meshplan/config.h"

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "meshplan/graph_json.h"

namespace meshplan {
namespace {

using nlohmann::json;

absl::string_view View(std::string_view s) { return {s.data(), s.size()}; }

absl::StatusOr<json> ParseScalar(absl::string_view raw, int line) {
  absl::string_view v = absl::StripAsciiWhitespace(raw);
  auto bad = [&] {
    return absl::InvalidArgumentError(
        absl::StrCat("config line ", line, ": cannot parse value '", v, "'"));
  };
  if (v.empty()) return bad();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return bad();
    return json(std::string(v.substr(1, v.size() - 2)));
  }
  if (v == "true") return json(true);
  if (v == "false") return json(false);
  std::string digits;
  for (char c : v) {
    if (c != '_') digits.push_back(c);
  }
  int64_t i = 0;
  if (absl::SimpleAtoi(digits, &i)) return json(i);
  double d = 0;
  if (absl::SimpleAtod(digits, &d)) return json(d);
  return bad();
}

absl::StatusOr<json> ParseValue(absl::string_view raw, int line) {
  absl::string_view v = absl::StripAsciiWhitespace(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", line, ": unterminated array"));
    }
    json arr = json::array();
    absl::string_view body =
        absl::StripAsciiWhitespace(v.substr(1, v.size() - 2));
    if (body.empty()) return arr;
    for (absl::string_view part : absl::StrSplit(body, ',')) {
      auto item = ParseScalar(part, line);
      if (!item.ok()) return item.status();
      arr.push_back(*item);
    }
    return arr;
  }
  return ParseScalar(v, line);
}

absl::StatusOr<int64_t> AsInt(const json& v, std::string_view key) {
  if (v.is_number_integer()) return v.get<int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == static_cast<double>(static_cast<int64_t>(d))) {
      return static_cast<int64_t>(d);
    }
  }
  return absl::InvalidArgumentError(
      absl::StrCat("config key '", View(key), "' must be an integer"));
}

absl::StatusOr<double> AsDouble(const json& v, std::string_view key) {
  if (v.is_number()) return v.get<double>();
  return absl::InvalidArgumentError(
      absl::StrCat("config key '", View(key), "' must be a number"));
}

absl::StatusOr<std::string> AsString(const json& v, std::string_view key) {
  if (v.is_string()) return v.get<std::string>();
  return absl::InvalidArgumentError(
      absl::StrCat("config key '", View(key), "' must be a string"));
}

// Short aliases map onto the canonical field names.
std::optional<std::string> ClusterKey(const std::string& key) {
  static const auto* keys = new std::map<std::string, std::string>{
      {"num_hosts", "num_hosts"},
      {"hosts", "num_hosts"},
      {"devices_per_host", "devices_per_host"},
      {"intra_host_bandwidth", "intra_host_bandwidth"},
      {"intra_bw", "intra_host_bandwidth"},
      {"inter_host_bandwidth", "inter_host_bandwidth"},
      {"inter_bw", "inter_host_bandwidth"},
      {"alpha_latency", "alpha_latency"},
      {"alpha", "alpha_latency"},
      {"device_flops", "device_flops"},
      {"device_memory", "device_memory"}};
  auto it = keys->find(key);
  if (it == keys->end()) return std::nullopt;
  return it->second;
}

}  // namespace

absl::StatusOr<json> ParseTomlSubset(std::string_view text) {
  json root = json::object();
  json* section = &root;
  int line_no = 0;
  for (absl::string_view line : absl::StrSplit(View(text), '\n')) {
    ++line_no;
    // Strip comments outside quotes.
    bool quoted = false;
    size_t cut = line.size();
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        cut = i;
        break;
      }
    }
    absl::string_view body = absl::StripAsciiWhitespace(line.substr(0, cut));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']' || body.size() < 3) {
        return absl::InvalidArgumentError(
            absl::StrCat("config line ", line_no, ": malformed section header"));
      }
      const std::string name(
          absl::StripAsciiWhitespace(body.substr(1, body.size() - 2)));
      if (root.contains(name)) {
        return absl::InvalidArgumentError(absl::StrCat(
            "config line ", line_no, ": duplicate section '", name, "'"));
      }
      root[name] = json::object();
      section = &root[name];
      continue;
    }
    const size_t eq = body.find('=');
    if (eq == absl::string_view::npos) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", line_no, ": expected key = value"));
    }
    const std::string key(absl::StripAsciiWhitespace(body.substr(0, eq)));
    if (key.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("config line ", line_no, ": empty key"));
    }
    if (section->contains(key)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "config line ", line_no, ": duplicate key '", key, "'"));
    }
    auto value = ParseValue(body.substr(eq + 1), line_no);
    if (!value.ok()) return value.status();
    (*section)[key] = *value;
  }
  return root;
}

absl::StatusOr<json> ParseConfigText(std::string_view text) {
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '{') {
      json doc = json::parse(text, nullptr, /*allow_exceptions=*/false);
      if (doc.is_discarded()) {
        return absl::InvalidArgumentError("config: malformed JSON document");
      }
      return doc;
    }
    break;
  }
  return ParseTomlSubset(text);
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(absl::StrCat("cannot open '", path, "'"));
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

absl::Status WriteFile(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::InvalidArgumentError(
        absl::StrCat("cannot write '", path, "'"));
  }
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) {
    return absl::InternalError(absl::StrCat("write to '", path, "' failed"));
  }
  return absl::OkStatus();
}

absl::StatusOr<json> LoadConfigFile(const std::string& path) {
  auto text = ReadFile(path);
  if (!text.ok()) return text.status();
  auto doc = ParseConfigText(*text);
  if (!doc.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(path, ": ", doc.status().message()));
  }
  return doc;
}

absl::StatusOr<ClusterMesh> ClusterFromJson(const json& doc) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("cluster config must be an object");
  }
  const json& obj = doc.contains("cluster") ? doc.at("cluster") : doc;
  if (!obj.is_object()) {
    return absl::InvalidArgumentError("cluster config must be an object");
  }
  ClusterMesh c;
  std::set<std::string> seen;
  for (const auto& [raw_key, value] : obj.items()) {
    const std::optional<std::string> canonical = ClusterKey(raw_key);
    if (!canonical) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown cluster key '", raw_key, "'"));
    }
    const std::string& key = *canonical;
    if (!seen.insert(key).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("cluster key '", key, "' given twice"));
    }
    if (key == "num_hosts" || key == "devices_per_host" ||
        key == "device_memory") {
      auto v = AsInt(value, key);
      if (!v.ok()) return v.status();
      if (key == "device_memory") {
        c.device_memory = *v;
      } else if (*v < 1 || *v > (1 << 20)) {
        return absl::InvalidArgumentError(
            absl::StrCat("cluster key '", key, "' out of range"));
      } else if (key == "num_hosts") {
        c.num_hosts = static_cast<int>(*v);
      } else {
        c.devices_per_host = static_cast<int>(*v);
      }
      continue;
    }
    auto v = AsDouble(value, key);
    if (!v.ok()) return v.status();
    if (key == "intra_host_bandwidth") c.intra_host_bandwidth = *v;
    if (key == "inter_host_bandwidth") c.inter_host_bandwidth = *v;
    if (key == "alpha_latency") c.alpha_latency = *v;
    if (key == "device_flops") c.device_flops = *v;
  }
  if (auto st = c.Validate(); !st.ok()) return st;
  return c;
}

absl::StatusOr<CostConstants> CostConstantsFromJson(const json& doc) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("cost config must be an object");
  }
  CostConstants c;
  for (const auto& [key, value] : doc.items()) {
    auto v = AsDouble(value, key);
    if (!v.ok()) return v.status();
    if (!(*v >= 0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("cost key '", key, "' must be >= 0"));
    }
    if (key == "all_reduce_factor") {
      c.all_reduce_factor = *v;
    } else if (key == "all_gather_factor") {
      c.all_gather_factor = *v;
    } else if (key == "all_to_all_factor") {
      c.all_to_all_factor = *v;
    } else if (key == "reduce_scatter_factor") {
      c.reduce_scatter_factor = *v;
    } else if (key == "alpha") {
      c.alpha = *v;
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown cost key '", key, "'"));
    }
  }
  return c;
}

absl::Status RunConfig::Validate() const {
  if (graph_path.has_value() == builder.has_value()) {
    return absl::InvalidArgumentError(
        "exactly one graph source is required (--graph or --builder)");
  }
  if (b_list.empty()) return absl::InvalidArgumentError("B list is empty");
  for (int b : b_list) {
    if (b < 1) return absl::InvalidArgumentError("B must be >= 1");
  }
  if (layers < 0) return absl::InvalidArgumentError("layers must be >= 0");
  if (!(delta >= 0)) return absl::InvalidArgumentError("delta must be >= 0");
  if (!(epsilon >= 0)) {
    return absl::InvalidArgumentError("epsilon must be >= 0");
  }
  if (workers < 1) return absl::InvalidArgumentError("workers must be >= 1");
  return cluster.Validate();
}

PlanOptions RunConfig::ToPlanOptions(int num_microbatches) const {
  PlanOptions o;
  o.num_microbatches = num_microbatches;
  o.num_layers = layers;
  o.delta = delta;
  o.epsilon = epsilon;
  o.schedule = schedule;
  o.workers = workers;
  return o;
}

absl::Status ApplyConfig(const json& doc, RunConfig& config) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("run config must be an object");
  }
  for (const auto& [key, value] : doc.items()) {
    if (key == "cluster") {
      auto c = ClusterFromJson(value);
      if (!c.ok()) return c.status();
      config.cluster = *c;
    } else if (key == "cost") {
      auto c = CostConstantsFromJson(value);
      if (!c.ok()) return c.status();
      config.cost = *c;
    } else if (key == "graph") {
      auto s = AsString(value, key);
      if (!s.ok()) return s.status();
      config.graph_path = *s;
    } else if (key == "builder") {
      auto s = AsString(value, key);
      if (!s.ok()) return s.status();
      config.builder = *s;
    } else if (key == "b") {
      config.b_list.clear();
      if (value.is_array()) {
        for (const json& item : value) {
          auto v = AsInt(item, key);
          if (!v.ok()) return v.status();
          config.b_list.push_back(static_cast<int>(*v));
        }
      } else {
        auto v = AsInt(value, key);
        if (!v.ok()) return v.status();
        config.b_list.push_back(static_cast<int>(*v));
      }
    } else if (key == "layers" || key == "workers") {
      auto v = AsInt(value, key);
      if (!v.ok()) return v.status();
      (key == "layers" ? config.layers : config.workers) =
          static_cast<int>(*v);
    } else if (key == "seed") {
      auto v = AsInt(value, key);
      if (!v.ok()) return v.status();
      config.seed = static_cast<uint64_t>(*v);
    } else if (key == "delta" || key == "epsilon") {
      auto v = AsDouble(value, key);
      if (!v.ok()) return v.status();
      (key == "delta" ? config.delta : config.epsilon) = *v;
    } else if (key == "schedule") {
      auto s = AsString(value, key);
      if (!s.ok()) return s.status();
      auto sch = ParseSchedule(*s);
      if (!sch.ok()) return sch.status();
      config.schedule = *sch;
    } else if (key == "out") {
      auto s = AsString(value, key);
      if (!s.ok()) return s.status();
      config.out = *s;
    } else {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown run config key '", key, "'"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<int>> ParseIntList(std::string_view text) {
  std::vector<int> out;
  for (absl::string_view part : absl::StrSplit(View(text), ',')) {
    int v = 0;
    if (!absl::SimpleAtoi(absl::StripAsciiWhitespace(part), &v)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "expected an integer or comma-separated integers, got '",
          View(text), "'"));
    }
    out.push_back(v);
  }
  return out;
}

absl::StatusOr<OpGraph> BuildFromSpec(std::string_view spec, uint64_t seed) {
  const absl::string_view s = View(spec);
  const size_t colon = s.find(':');
  const std::string name(s.substr(0, colon));
  std::map<std::string, int64_t> params;
  if (colon != absl::string_view::npos) {
    for (absl::string_view kv : absl::StrSplit(s.substr(colon + 1), ',',
                                               absl::SkipEmpty())) {
      const size_t eq = kv.find('=');
      int64_t v = 0;
      if (eq == absl::string_view::npos ||
          !absl::SimpleAtoi(kv.substr(eq + 1), &v)) {
        return absl::InvalidArgumentError(
            absl::StrCat("builder parameter '", kv, "' must be key=integer"));
      }
      params[std::string(kv.substr(0, eq))] = v;
    }
  }
  std::set<std::string> allowed;
  auto get = [&](const std::string& key, int64_t def) {
    allowed.insert(key);
    auto it = params.find(key);
    return static_cast<int>(it == params.end() ? def : it->second);
  };
  absl::StatusOr<OpGraph> g = absl::InvalidArgumentError(absl::StrCat(
      "unknown builder '", name, "' (expected mlp, transformer or random)"));
  if (name == "mlp") {
    const int layers = get("layers", 4);
    const int batch = get("batch", 8);
    const int hidden = get("hidden", 64);
    const bool backward = get("backward", 0) != 0;
    g = BuildMlp(layers, batch, hidden, backward);
  } else if (name == "transformer") {
    const int blocks = get("blocks", 2);
    const int batch = get("batch", 2);
    const int seq = get("seq", 16);
    const int hidden = get("hidden", 64);
    const int heads = get("heads", 4);
    const bool backward = get("backward", 0) != 0;
    g = BuildTransformerBlocks(blocks, batch, seq, hidden, heads, backward);
  } else if (name == "random") {
    const int layers = get("layers", 4);
    const int width = get("width", 3);
    const bool backward = get("backward", 0) != 0;
    g = BuildRandomGraph(layers, width, seed);
    if (g.ok() && backward) {
      if (auto st = AppendBackward(*g); !st.ok()) return st;
    }
  } else {
    return g.status();
  }
  for (const auto& [key, value] : params) {
    if (!allowed.count(key)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "builder '", name, "' has no parameter '", key, "'"));
    }
  }
  return g;
}

absl::StatusOr<OpGraph> LoadGraph(const RunConfig& config) {
  if (config.builder) return BuildFromSpec(*config.builder, config.seed);
  if (!config.graph_path) {
    return absl::InvalidArgumentError("no graph source given");
  }
  auto text = ReadFile(*config.graph_path);
  if (!text.ok()) return text.status();
  auto g = Parse(*text);
  if (!g.ok()) {
    return absl::InvalidArgumentError(
        absl::StrCat(*config.graph_path, ": ", g.status().message()));
  }
  return g;
}

}  // namespace meshplan
