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

// Synthetic trace corpora with known ground truth.
//
// Latency model: a span lasts its own compute time plus the durations of its
// synchronous children, which run one after another. Asynchronous children
// start at the parent's current cursor and never extend the parent.
//
// Injections fire per request with probability `fraction`. A propagating
// delay lengthens every matching span and therefore every synchronous
// ancestor; a non-propagating delay lengthens only the matching spans.
//
// Output is a pure function of (topology, n, injections, seed): each request
// draws from its own RNG streams derived from (seed, request index), so the
// serial and parallel paths emit identical batches.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathlens/execution.h"
#include "pathlens/path_extractor.h"

namespace pathlens {

enum class CallKind { kSync, kAsync };

struct LatencyModel {
  enum class Kind { kConstant, kUniform, kLognormal };

  Kind kind = Kind::kConstant;
  double a = 0.0;  // constant value | uniform low | lognormal median (us)
  double b = 0.0;  // unused | uniform high | lognormal sigma

  static LatencyModel constant(double us) { return {Kind::kConstant, us, 0.0}; }
  static LatencyModel uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static LatencyModel lognormal(double median, double sigma) {
    return {Kind::kLognormal, median, sigma};
  }

  double mean() const;
  Micros sample(std::mt19937_64& rng) const;
};

// How many times a node is invoked by each parent span: a fixed count or a
// discrete distribution over counts.
struct CallCount {
  std::vector<std::uint32_t> counts{1};
  std::vector<double> weights{1.0};

  static CallCount fixed(std::uint32_t n) { return {{n}, {1.0}}; }
  bool is_fixed() const { return counts.size() == 1; }
  double mean() const;
};

struct TopologyNode {
  RpcName rpc;
  CallKind kind = CallKind::kSync;
  LatencyModel latency;
  CallCount calls;
  std::vector<TopologyNode> children;
};

struct TopologySpec {
  TopologyNode root;
  Micros start_time = 1'704'067'200'000'000;  // 2024-01-01T00:00:00Z
  // Gap between consecutive request starts, drawn uniformly.
  Micros spacing_min = 50'000;
  Micros spacing_max = 150'000;
};

struct InjectionSpec {
  PathKey target;
  double fraction = 0.1;
  Micros delay = 0;
  bool propagate = true;
};

struct MultimodeSpec {
  PathKey path;
  std::vector<std::uint32_t> levels;
  std::vector<double> weights;  // empty = equal weights
  Micros cost = 0;              // own compute of each invocation of `path`
};

struct GeneratedBatch {
  std::vector<Trace> traces;
  // fired[i][j]: injection j fired in request i.
  std::vector<std::vector<bool>> fired;
  // Occurrence level drawn for request i (multimode batches only).
  std::vector<std::uint32_t> levels;
};

// Throws Error(kSpec) for non-tree or inconsistent specs.
void validate_topology(const TopologySpec& topology);

// nullptr when the path does not exist in the topology.
const TopologyNode* find_node(const TopologySpec& topology, const PathKey& path);

// Expected end-to-end response time of an uninjected request.
double baseline_e2e_mean(const TopologySpec& topology);

// Delay that raises the mean end-to-end response time by `percent`.
Micros delay_for_e2e_increase(const TopologySpec& topology, double percent);

// Throws Error(kSpec) when an injection target is not in the topology or its
// parameters are out of range.
GeneratedBatch generate(const TopologySpec& topology, std::size_t n,
                        std::span<const InjectionSpec> injections,
                        std::uint64_t seed,
                        Execution exec = Execution::kParallel);

// Each request draws one level; `spec.path` then occurs exactly that many
// times. Every ancestor of the path must be called exactly once.
GeneratedBatch generate_multimode(const TopologySpec& topology,
                                  const MultimodeSpec& spec, std::size_t n,
                                  std::uint64_t seed,
                                  Execution exec = Execution::kParallel);

// `depth` levels, every node calling `fanout` distinct children once.
// Node names are "gateway:request" at the root and "svc<i>-<j>:op<i>-<j>"
// below, indices 1-based along the path.
TopologySpec balanced_topology(std::size_t depth, std::size_t fanout,
                               LatencyModel latency);

// ---- configuration files ----

struct InjectionFile {
  std::vector<InjectionSpec> injections;
  std::optional<MultimodeSpec> multimode;
};

TopologySpec topology_from_json(std::string_view text);
std::string topology_to_json(const TopologySpec& topology);
// Injections may give "delay_us" or "e2e_increase_pct"; the latter is turned
// into an absolute delay with delay_for_e2e_increase.
InjectionFile injections_from_json(std::string_view text,
                                   const TopologySpec& topology);

}  // namespace pathlens
