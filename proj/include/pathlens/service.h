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

// Query layer shared by the HTTP server and `pathlens report`. Every method
// returns the exact JSON payload of the matching endpoint; docs/api.md has
// the schemas.

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>

#include "json.hpp"
#include "pathlens/analytics.h"
#include "pathlens/execution.h"
#include "pathlens/trace_store.h"
#include "pathlens/tree_builder.h"

namespace pathlens {

struct AnalysisScope {
  RpcName root;
  Micros t0 = kMinTime;
  Micros t1 = kMaxTime;
  AttributeKind attr = AttributeKind::kExecutionTime;
};

// Integer microseconds since the epoch, or RFC 3339 such as
// "2024-01-01T00:00:00Z" / "2024-01-01T01:00:00.25+01:00".
// Throws Error(kInvalidArgument).
Micros parse_time(std::string_view text);

class AnalysisService {
 public:
  explicit AnalysisService(StoreReader reader,
                           Execution exec = Execution::kParallel);

  const StoreReader& reader() const noexcept { return reader_; }

  nlohmann::json roots(Micros t0, Micros t1, std::string_view query) const;
  nlohmann::json tree(const AnalysisScope& scope) const;
  nlohmann::json histogram(const RpcName& root, Micros t0, Micros t1,
                           std::size_t bins = kDefaultHistogramBins) const;
  // Throws Error(kNotFound) when the scope has data but not the path.
  nlohmann::json node_clusters(const AnalysisScope& scope,
                               const PathKey& path) const;
  // Throws Error(kInvalidArgument) when lo > hi.
  nlohmann::json backward_tree(const AnalysisScope& scope, Micros lo,
                               Micros hi) const;
  nlohmann::json backward_node(const AnalysisScope& scope, const PathKey& path,
                               Micros lo, Micros hi) const;

 private:
  struct ScopeData;
  using CacheKey = std::tuple<std::string, Micros, Micros>;

  std::shared_ptr<const ScopeData> load(const RpcName& root, Micros t0,
                                        Micros t1) const;

  StoreReader reader_;
  Execution exec_;
  mutable std::mutex mu_;
  mutable std::map<CacheKey, std::shared_ptr<const ScopeData>> cache_;
};

}  // namespace pathlens
