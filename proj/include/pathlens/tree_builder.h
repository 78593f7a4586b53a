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

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pathlens/path_extractor.h"

namespace pathlens {

enum class AttributeKind { kExecutionTime, kFrequency };

std::string_view to_string(AttributeKind attr);
// Accepts "execution-time" and "frequency".
AttributeKind parse_attribute_kind(std::string_view text);

// One analyzed request.
struct TraceInfo {
  std::string trace_id;
  Micros timestamp = 0;
  Micros response_time = 0;
};

// A node of the aggregated call tree. Series hold only requests in which
// the path occurs; `trace_indices` is ascending and indexes
// AggregatedTree::traces(), so series order is (timestamp, trace id).
struct TreeNode {
  PathKey path;
  std::optional<PathKey> parent;
  std::vector<PathKey> children;  // sorted by canonical form
  bool async = false;
  std::vector<std::size_t> trace_indices;
  std::vector<std::uint32_t> occurrences;
  std::vector<double> exec_times;  // us

  std::size_t support() const noexcept { return trace_indices.size(); }
};

class AggregatedTree {
 public:
  const PathKey& root() const noexcept { return root_; }
  // Sorted by canonical path, so parents precede their children.
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  // Sorted by (timestamp, trace id).
  const std::vector<TraceInfo>& traces() const noexcept { return traces_; }
  std::size_t request_count() const noexcept { return traces_.size(); }

  // nullptr when the path is not in the tree.
  const TreeNode* find(const PathKey& path) const;
  std::size_t index_of(const PathKey& path) const;  // throws kNotFound

 private:
  friend AggregatedTree build_tree(std::span<const PathRecord>,
                                   std::span<const E2ERecord>);

  PathKey root_{RpcName("_", "_")};
  std::vector<TreeNode> nodes_;
  std::vector<TraceInfo> traces_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Throws Error(kNoData) when `e2e` is empty, Error(kInvalidArgument) when
// records disagree on the root, reference unknown traces, or break prefix
// closure.
AggregatedTree build_tree(std::span<const PathRecord> paths,
                          std::span<const E2ERecord> e2e);

struct SeriesPoint {
  std::string trace_id;
  double value = 0.0;

  friend bool operator==(const SeriesPoint&, const SeriesPoint&) = default;
};

// One entry per request containing `path`, in (timestamp, trace id) order.
// Frequency values are counts, execution-time values are microseconds.
// Throws Error(kNotFound) for unknown paths.
std::vector<SeriesPoint> node_series(const AggregatedTree& tree,
                                     const PathKey& path, AttributeKind attr);

}  // namespace pathlens
