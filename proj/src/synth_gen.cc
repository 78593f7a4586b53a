// Copyright 2026 The pathlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pathlens/synth_gen.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <set>

#include "json.hpp"

namespace pathlens {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index,
                          std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ (stream * 0x632be59bd9b4e019ULL));
}

std::string hex(std::uint64_t v, int digits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(digits, '0');
  for (int i = digits - 1; i >= 0; --i) {
    out[i] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

[[noreturn]] void spec_error(const std::string& msg) {
  throw Error(ErrorKind::kSpec, msg);
}

void validate_latency(const LatencyModel& m, const std::string& where) {
  switch (m.kind) {
    case LatencyModel::Kind::kConstant:
      if (!(m.a >= 0.0)) spec_error(where + ": constant latency must be >= 0");
      break;
    case LatencyModel::Kind::kUniform:
      if (!(m.a >= 0.0) || !(m.b >= m.a)) {
        spec_error(where + ": uniform latency needs 0 <= low <= high");
      }
      break;
    case LatencyModel::Kind::kLognormal:
      if (!(m.a > 0.0) || !(m.b >= 0.0)) {
        spec_error(where + ": lognormal latency needs median > 0, sigma >= 0");
      }
      break;
  }
}

void validate_node(const TopologyNode& node, const std::string& path) {
  validate_latency(node.latency, path);
  const CallCount& c = node.calls;
  if (c.counts.empty() || c.counts.size() != c.weights.size()) {
    spec_error(path + ": call counts and weights must be non-empty and match");
  }
  double total = 0.0;
  for (double w : c.weights) {
    if (!(w >= 0.0)) spec_error(path + ": call weights must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) spec_error(path + ": call weights sum to zero");
  std::set<RpcName> seen;
  for (const TopologyNode& child : node.children) {
    if (!seen.insert(child.rpc).second) {
      spec_error(path + ": duplicate child " + child.rpc.canonical());
    }
    validate_node(child, path + "/" + child.rpc.canonical());
  }
}

double expected_duration(const TopologyNode& node) {
  double d = node.latency.mean();
  for (const TopologyNode& child : node.children) {
    if (child.kind == CallKind::kSync) {
      d += child.calls.mean() * expected_duration(child);
    }
  }
  return d;
}

std::uint32_t draw_count(const CallCount& c, std::mt19937_64& rng) {
  if (c.is_fixed()) return c.counts.front();
  std::discrete_distribution<std::size_t> pick(c.weights.begin(), c.weights.end());
  return c.counts[pick(rng)];
}

struct PathDelays {
  Micros propagating = 0;
  Micros local = 0;
};

struct TraceContext {
  std::string trace_id;
  std::uint64_t span_seed = 0;
  std::uint64_t span_counter = 0;
  std::vector<SpanRecord> spans;
  std::mt19937_64 rng;
  const std::map<std::string, PathDelays>* delays = nullptr;
  const MultimodeSpec* multimode = nullptr;
  std::uint32_t level = 0;
};

// Emits the span subtree of `node` and returns the duration its parent
// accounts for (excluding non-propagating delay).
Micros emit(const TopologyNode& node, const std::string& path,
            const std::optional<std::string>& parent_id, RefKind ref,
            Micros start, TraceContext& ctx) {
  const bool is_mm_path = ctx.multimode && ctx.multimode->path.canonical() == path;
  Micros own = node.latency.sample(ctx.rng);
  if (is_mm_path) own = ctx.multimode->cost;

  PathDelays delay;
  if (ctx.delays) {
    if (auto it = ctx.delays->find(path); it != ctx.delays->end()) delay = it->second;
  }

  const std::size_t slot = ctx.spans.size();
  ctx.spans.push_back(SpanRecord{
      ctx.trace_id, hex(splitmix64(ctx.span_seed + ctx.span_counter++), 16),
      node.rpc.operation(), node.rpc.service(), parent_id, ref, start, 0});
  const std::string span_id = ctx.spans[slot].span_id;

  Micros cursor = start + own / 2;
  Micros sync_total = 0;
  for (const TopologyNode& child : node.children) {
    const std::string child_path = path + "/" + child.rpc.canonical();
    std::uint32_t count = draw_count(child.calls, ctx.rng);
    if (ctx.multimode && ctx.multimode->path.canonical() == child_path) {
      count = ctx.level;
    }
    const RefKind kind = child.kind == CallKind::kSync ? RefKind::kSynchronousChild
                                                       : RefKind::kAsynchronousFollows;
    for (std::uint32_t c = 0; c < count; ++c) {
      Micros d = emit(child, child_path, span_id, kind, cursor, ctx);
      if (child.kind == CallKind::kSync) {
        cursor += d;
        sync_total += d;
      }
    }
  }
  const Micros for_parent = own + delay.propagating + sync_total;
  ctx.spans[slot].duration = for_parent + delay.local;
  return for_parent;
}

std::vector<Micros> request_starts(const TopologySpec& t, std::size_t n,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(stream_seed(seed, ~0ULL, 7));
  std::uniform_int_distribution<Micros> gap(t.spacing_min, t.spacing_max);
  std::vector<Micros> starts(n);
  Micros at = t.start_time;
  for (std::size_t i = 0; i < n; ++i) {
    starts[i] = at;
    at += gap(rng);
  }
  return starts;
}

struct RunOptions {
  std::span<const InjectionSpec> injections;
  const MultimodeSpec* multimode = nullptr;
};

GeneratedBatch run(const TopologySpec& topology, std::size_t n,
                   const RunOptions& opts, std::uint64_t seed, Execution exec) {
  if (n < 1) spec_error("number of traces must be >= 1");
  if (topology.spacing_min < 0 || topology.spacing_max < topology.spacing_min) {
    spec_error("spacing needs 0 <= min <= max");
  }
  const std::vector<Micros> starts = request_starts(topology, n, seed);
  const std::string root_path = topology.root.rpc.canonical();

  GeneratedBatch batch;
  batch.traces.resize(n);
  batch.fired.assign(n, std::vector<bool>(opts.injections.size(), false));
  if (opts.multimode) batch.levels.assign(n, 0);

  std::vector<double> level_weights;
  if (opts.multimode) {
    level_weights = opts.multimode->weights;
    if (level_weights.empty()) level_weights.assign(opts.multimode->levels.size(), 1.0);
  }

  std::exception_ptr failure;
  auto one = [&](std::size_t i) {
    try {
      std::mt19937_64 inj_rng(stream_seed(seed, i, 2));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::map<std::string, PathDelays> delays;
      std::vector<bool> fired(opts.injections.size(), false);
      for (std::size_t j = 0; j < opts.injections.size(); ++j) {
        const InjectionSpec& inj = opts.injections[j];
        // Draw for every injection so streams stay aligned across specs.
        const double u = unit(inj_rng);
        if (u < inj.fraction) {
          fired[j] = true;
          PathDelays& d = delays[inj.target.canonical()];
          (inj.propagate ? d.propagating : d.local) += inj.delay;
        }
      }

      TraceContext ctx;
      const std::uint64_t id_hi = stream_seed(seed, i, 4);
      const std::uint64_t id_lo = stream_seed(seed, i, 5);
      ctx.trace_id = hex(id_hi, 16) + hex(id_lo, 16);
      ctx.span_seed = stream_seed(seed, i, 6);
      ctx.rng.seed(stream_seed(seed, i, 1));
      ctx.delays = &delays;
      if (opts.multimode) {
        std::mt19937_64 level_rng(stream_seed(seed, i, 3));
        std::discrete_distribution<std::size_t> pick(level_weights.begin(),
                                                     level_weights.end());
        ctx.multimode = opts.multimode;
        ctx.level = opts.multimode->levels[pick(level_rng)];
        batch.levels[i] = ctx.level;
      }
      emit(topology.root, root_path, std::nullopt, RefKind::kRoot, starts[i], ctx);
      batch.traces[i] = validate_trace(std::move(ctx.spans));
      batch.fired[i] = std::move(fired);
    } catch (...) {
#pragma omp critical(pathlens_generate_failure)
      if (!failure) failure = std::current_exception();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 32)
    for (std::size_t i = 0; i < n; ++i) one(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) one(i);
  }
  if (failure) std::rethrow_exception(failure);
  return batch;
}

// ---- JSON config helpers ----

LatencyModel latency_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) spec_error(where + ": latency must be an object");
  const std::string kind = j.value("kind", "");
  try {
    if (kind == "constant") return LatencyModel::constant(j.at("value_us").get<double>());
    if (kind == "uniform") {
      return LatencyModel::uniform(j.at("low_us").get<double>(),
                                   j.at("high_us").get<double>());
    }
    if (kind == "lognormal") {
      return LatencyModel::lognormal(j.at("median_us").get<double>(),
                                     j.at("sigma").get<double>());
    }
  } catch (const json::exception& e) {
    spec_error(where + ": bad latency parameters: " + e.what());
  }
  spec_error(where + ": unknown latency kind '" + kind + "'");
}

json latency_to_json(const LatencyModel& m) {
  switch (m.kind) {
    case LatencyModel::Kind::kConstant: return {{"kind", "constant"}, {"value_us", m.a}};
    case LatencyModel::Kind::kUniform:
      return {{"kind", "uniform"}, {"low_us", m.a}, {"high_us", m.b}};
    case LatencyModel::Kind::kLognormal:
      return {{"kind", "lognormal"}, {"median_us", m.a}, {"sigma", m.b}};
  }
  return nullptr;
}

CallCount calls_from_json(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return CallCount::fixed(j.get<std::uint32_t>());
  if (j.is_object()) {
    try {
      CallCount c{j.at("counts").get<std::vector<std::uint32_t>>(),
                  j.at("weights").get<std::vector<double>>()};
      return c;
    } catch (const json::exception& e) {
      spec_error(where + ": bad calls distribution: " + e.what());
    }
  }
  spec_error(where + ": 'calls' must be a non-negative integer or "
                     "{counts, weights}");
}

TopologyNode node_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) spec_error(where + ": node must be an object");
  std::string service, operation;
  try {
    service = j.at("service").get<std::string>();
    operation = j.at("operation").get<std::string>();
  } catch (const json::exception&) {
    spec_error(where + ": node needs 'service' and 'operation' strings");
  }
  if (service.empty() || operation.empty()) {
    spec_error(where + ": service and operation must be non-empty");
  }
  TopologyNode node{RpcName(service, operation), CallKind::kSync, {}, {}, {}};
  const std::string here = where + "/" + node.rpc.canonical();
  const std::string kind = j.value("kind", "sync");
  if (kind == "async") {
    node.kind = CallKind::kAsync;
  } else if (kind != "sync") {
    spec_error(here + ": kind must be sync or async");
  }
  if (!j.contains("latency")) spec_error(here + ": missing latency");
  node.latency = latency_from_json(j["latency"], here);
  if (j.contains("calls")) node.calls = calls_from_json(j["calls"], here);
  if (j.contains("children")) {
    if (!j["children"].is_array()) spec_error(here + ": children must be an array");
    for (const json& c : j["children"]) node.children.push_back(node_from_json(c, here));
  }
  return node;
}

json node_to_json(const TopologyNode& node) {
  json j = {{"service", node.rpc.service()},
            {"operation", node.rpc.operation()},
            {"kind", node.kind == CallKind::kSync ? "sync" : "async"},
            {"latency", latency_to_json(node.latency)}};
  if (node.calls.is_fixed()) {
    j["calls"] = node.calls.counts.front();
  } else {
    j["calls"] = {{"counts", node.calls.counts}, {"weights", node.calls.weights}};
  }
  if (!node.children.empty()) {
    json children = json::array();
    for (const TopologyNode& c : node.children) children.push_back(node_to_json(c));
    j["children"] = std::move(children);
  }
  return j;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, std::string(what) + ": " + e.what());
  }
}

}  // namespace

double LatencyModel::mean() const {
  switch (kind) {
    case Kind::kConstant: return a;
    case Kind::kUniform: return 0.5 * (a + b);
    case Kind::kLognormal: return a * std::exp(0.5 * b * b);
  }
  return 0.0;
}

Micros LatencyModel::sample(std::mt19937_64& rng) const {
  double v = a;
  switch (kind) {
    case Kind::kConstant:
      break;
    case Kind::kUniform: {
      std::uniform_real_distribution<double> d(a, b);
      v = d(rng);
      break;
    }
    case Kind::kLognormal: {
      std::lognormal_distribution<double> d(std::log(a), b);
      v = d(rng);
      break;
    }
  }
  return std::max<Micros>(0, std::llround(v));
}

double CallCount::mean() const {
  double total = 0.0, weighted = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += weights[i];
    weighted += weights[i] * counts[i];
  }
  return total > 0.0 ? weighted / total : 0.0;
}

void validate_topology(const TopologySpec& topology) {
  if (topology.root.kind != CallKind::kSync) spec_error("root RPC must be sync");
  validate_node(topology.root, topology.root.rpc.canonical());
}

const TopologyNode* find_node(const TopologySpec& topology, const PathKey& path) {
  std::vector<RpcName> elems = path.elements();
  if (elems.front() != topology.root.rpc) return nullptr;
  const TopologyNode* node = &topology.root;
  for (std::size_t i = 1; i < elems.size(); ++i) {
    auto it = std::find_if(node->children.begin(), node->children.end(),
                           [&](const TopologyNode& c) { return c.rpc == elems[i]; });
    if (it == node->children.end()) return nullptr;
    node = &*it;
  }
  return node;
}

double baseline_e2e_mean(const TopologySpec& topology) {
  return expected_duration(topology.root);
}

Micros delay_for_e2e_increase(const TopologySpec& topology, double percent) {
  if (!(percent > 0.0)) spec_error("E2E increase must be > 0%");
  return std::max<Micros>(1, std::llround(baseline_e2e_mean(topology) * percent / 100.0));
}

GeneratedBatch generate(const TopologySpec& topology, std::size_t n,
                        std::span<const InjectionSpec> injections,
                        std::uint64_t seed, Execution exec) {
  validate_topology(topology);
  for (const InjectionSpec& inj : injections) {
    if (find_node(topology, inj.target) == nullptr) {
      spec_error("injection target not in topology: " + inj.target.canonical());
    }
    if (!(inj.fraction > 0.0 && inj.fraction <= 1.0)) {
      spec_error("injection fraction must be in (0, 1]");
    }
    if (inj.delay <= 0) spec_error("injection delay must be > 0");
  }
  return run(topology, n, RunOptions{injections, nullptr}, seed, exec);
}

GeneratedBatch generate_multimode(const TopologySpec& topology,
                                  const MultimodeSpec& spec, std::size_t n,
                                  std::uint64_t seed, Execution exec) {
  validate_topology(topology);
  if (spec.path.is_root()) spec_error("multimode path cannot be the root");
  if (find_node(topology, spec.path) == nullptr) {
    spec_error("multimode path not in topology: " + spec.path.canonical());
  }
  PathKey ancestor = spec.path.parent();
  while (!ancestor.is_root()) {
    const TopologyNode* node = find_node(topology, ancestor);
    if (!node->calls.is_fixed() || node->calls.counts.front() != 1) {
      spec_error("every ancestor of the multimode path must be called exactly once");
    }
    ancestor = ancestor.parent();
  }
  if (spec.levels.empty()) spec_error("multimode needs at least one level");
  std::set<std::uint32_t> distinct;
  for (std::uint32_t l : spec.levels) {
    if (l == 0 || !distinct.insert(l).second) {
      spec_error("multimode levels must be distinct positive integers");
    }
  }
  if (!spec.weights.empty() && spec.weights.size() != spec.levels.size()) {
    spec_error("multimode weights must match levels");
  }
  for (double w : spec.weights) {
    if (!(w > 0.0)) spec_error("multimode weights must be > 0");
  }
  if (spec.cost < 0) spec_error("multimode cost must be >= 0");
  return run(topology, n, RunOptions{{}, &spec}, seed, exec);
}

TopologySpec balanced_topology(std::size_t depth, std::size_t fanout,
                               LatencyModel latency) {
  if (depth < 1) spec_error("depth must be >= 1");
  TopologySpec t{TopologyNode{RpcName("gateway", "request"), CallKind::kSync,
                              latency, CallCount::fixed(1), {}}};
  struct Builder {
    std::size_t depth, fanout;
    LatencyModel latency;
    void grow(TopologyNode& node, std::size_t level, const std::string& suffix) {
      if (level >= depth) return;
      for (std::size_t i = 1; i <= fanout; ++i) {
        std::string s = suffix.empty() ? std::to_string(i) : suffix + "-" + std::to_string(i);
        node.children.push_back(TopologyNode{RpcName("svc" + s, "op" + s),
                                             CallKind::kSync, latency,
                                             CallCount::fixed(1), {}});
        grow(node.children.back(), level + 1, s);
      }
    }
  };
  Builder{depth, fanout, latency}.grow(t.root, 1, "");
  return t;
}

TopologySpec topology_from_json(std::string_view text) {
  json j = parse_json(text, "topology");
  if (!j.is_object() || !j.contains("root")) spec_error("topology needs a 'root' node");
  TopologySpec t{node_from_json(j["root"], "")};
  try {
    if (j.contains("start_time_us")) t.start_time = j["start_time_us"].get<Micros>();
    if (j.contains("spacing_us")) {
      auto s = j["spacing_us"].get<std::vector<Micros>>();
      if (s.size() != 2) spec_error("spacing_us must be [min, max]");
      t.spacing_min = s[0];
      t.spacing_max = s[1];
    }
  } catch (const json::exception& e) {
    spec_error(std::string("bad topology timing fields: ") + e.what());
  }
  validate_topology(t);
  return t;
}

std::string topology_to_json(const TopologySpec& topology) {
  json j = {{"start_time_us", topology.start_time},
            {"spacing_us", {topology.spacing_min, topology.spacing_max}},
            {"root", node_to_json(topology.root)}};
  return j.dump(2);
}

InjectionFile injections_from_json(std::string_view text,
                                   const TopologySpec& topology) {
  json j = parse_json(text, "injections");
  if (!j.is_object()) spec_error("injections file must be an object");
  InjectionFile out;
  try {
    for (const json& ji : j.value("injections", json::array())) {
      PathKey target = PathKey::parse(ji.at("target").get<std::string>());
      InjectionSpec inj{target, ji.value("fraction", 0.1), 0,
                        ji.value("propagate", true)};
      if (ji.contains("delay_us")) {
        inj.delay = ji["delay_us"].get<Micros>();
      } else if (ji.contains("e2e_increase_pct")) {
        inj.delay = delay_for_e2e_increase(topology, ji["e2e_increase_pct"].get<double>());
      } else {
        spec_error("injection on " + target.canonical() +
                   " needs delay_us or e2e_increase_pct");
      }
      out.injections.push_back(std::move(inj));
    }
    if (j.contains("multimode")) {
      const json& jm = j["multimode"];
      out.multimode = MultimodeSpec{
          PathKey::parse(jm.at("path").get<std::string>()),
          jm.at("levels").get<std::vector<std::uint32_t>>(),
          jm.value("weights", std::vector<double>{}), jm.at("cost_us").get<Micros>()};
    }
  } catch (const json::exception& e) {
    spec_error(std::string("bad injections file: ") + e.what());
  }
  return out;
}

}  // namespace pathlens
