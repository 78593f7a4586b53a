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

// Reconstruction of per-request RPC execution paths.
//
// Every span is identified by the chain of RPC names from the root down to
// it. Sibling invocations of the same RPC collapse onto one path; recursion
// (the same RPC deeper in the chain) produces a distinct, longer path.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathlens/execution.h"
#include "pathlens/trace_model.h"

namespace pathlens {

class TraceStore;

// Paths deeper than this are rejected.
inline constexpr std::size_t kMaxPathDepth = 128;

// Ordered RPC chain from the root to a node, kept in canonical form: the
// canonical RPC names joined with '/'. RPC canonical forms never contain
// '/', so the join is unambiguous.
class PathKey {
 public:
  explicit PathKey(const RpcName& root);
  explicit PathKey(std::span<const RpcName> elements);

  // Throws Error(kInvalidArgument) when any element is malformed.
  static PathKey parse(std::string_view canonical);

  const std::string& canonical() const noexcept { return canonical_; }
  std::vector<RpcName> elements() const;
  std::size_t depth() const noexcept { return depth_; }
  RpcName root() const;
  RpcName leaf() const;
  bool is_root() const noexcept { return depth_ == 1; }
  // Throws Error(kInvalidArgument) on the root path.
  PathKey parent() const;
  PathKey child(const RpcName& rpc) const;
  // True for proper prefixes only.
  bool is_proper_prefix_of(const PathKey& other) const;

  friend bool operator==(const PathKey& a, const PathKey& b) {
    return a.canonical_ == b.canonical_;
  }
  friend auto operator<=>(const PathKey& a, const PathKey& b) {
    return a.canonical_ <=> b.canonical_;
  }

 private:
  PathKey(std::string canonical, std::size_t depth)
      : canonical_(std::move(canonical)), depth_(depth) {}

  std::string canonical_;
  std::size_t depth_ = 0;
};

// One (trace x execution path) observation.
struct PathRecord {
  PathKey path;
  std::string trace_id;
  std::uint32_t occurrences = 0;
  double exec_time_mean = 0.0;  // us, mean over the matching spans
  Micros timestamp = 0;         // root span start
  // True when any matching span hangs off its parent through FOLLOWS_FROM.
  bool async = false;

  RpcName root_rpc() const { return path.root(); }

  friend bool operator==(const PathRecord&, const PathRecord&) = default;
};

// One request's end-to-end response time.
struct E2ERecord {
  RpcName root_rpc;
  std::string trace_id;
  Micros response_time = 0;
  Micros timestamp = 0;

  friend bool operator==(const E2ERecord&, const E2ERecord&) = default;
};

struct Extraction {
  std::vector<PathRecord> paths;  // sorted by canonical path
  E2ERecord e2e;
};

// Throws TraceError(kDepthExceeded) for paths deeper than kMaxPathDepth.
Extraction extract_paths(const Trace& trace);

struct PreprocessSummary {
  std::uint64_t traces_ok = 0;
  std::uint64_t traces_skipped = 0;
  // Accepted traces whose id was already in the store; nothing is written.
  std::uint64_t traces_already_stored = 0;
  std::uint64_t records_written = 0;
  std::chrono::milliseconds elapsed{0};
  std::vector<ParseWarning> warnings;
};

// Extracts every trace in `traces` and appends the records to `store` in one
// commit. Traces already in the store, or repeated within the batch, are not
// written again.
PreprocessSummary preprocess_traces(std::span<const Trace> traces,
                                    TraceStore& store,
                                    Execution exec = Execution::kParallel);

// Reads and parses each input file, then behaves like preprocess_traces over
// all of them as one batch. An unreadable file or a document-level syntax
// error aborts before anything is written.
PreprocessSummary preprocess_batch(
    std::span<const std::filesystem::path> inputs, TraceStore& store,
    Execution exec = Execution::kParallel);

std::string summary_to_json(const PreprocessSummary& summary);

}  // namespace pathlens
