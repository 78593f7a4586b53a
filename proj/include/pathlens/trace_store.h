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

// Embedded record store with two logical collections: path records and
// end-to-end records.
//
// On-disk layout under the store directory:
//
//   MANIFEST            JSON, replaced atomically on every commit
//   LOCK                flock()ed by the single writer
//   trace_ids.log       processed trace ids (length-prefixed)
//   roots/<dir>/<gen>.dict          path dictionary of one root RPC
//   roots/<dir>/<day>.<gen>.paths   path records of one root and UTC day
//   roots/<dir>/<day>.<gen>.e2e     e2e records of one root and UTC day
//
// Every file is append-only. The manifest records how many bytes of each
// file are committed; readers never look past those lengths, so a reader
// opened at any moment sees whole commits only.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pathlens/path_extractor.h"

namespace pathlens {

inline constexpr int kStoreFormatVersion = 1;

inline constexpr Micros kMinTime = INT64_MIN;
inline constexpr Micros kMaxTime = INT64_MAX;

struct SegmentEntry {
  std::string generation;
  std::uint64_t paths_bytes = 0;
  std::uint64_t e2e_bytes = 0;
  std::uint64_t path_records = 0;
  std::uint64_t e2e_records = 0;
};

struct RootEntry {
  std::string name;  // canonical RPC name
  std::string dir;
  std::string dict_generation;
  std::uint64_t dict_entries = 0;
  std::uint64_t dict_bytes = 0;
  std::uint64_t path_records = 0;
  std::uint64_t e2e_records = 0;
  std::map<std::int64_t, SegmentEntry> segments;  // keyed by UTC day
};

struct Manifest {
  int format_version = kStoreFormatVersion;
  std::uint64_t commit_seq = 0;
  std::uint64_t processed_traces = 0;
  // Order-independent digest of the processed trace id set.
  std::string processed_digest;
  std::uint64_t trace_ids_bytes = 0;
  std::vector<RootEntry> roots;  // sorted by name

  std::string to_json() const;
  // Throws Error(kVersionMismatch) for an unknown format_version.
  static Manifest from_json(std::string_view text);

  const RootEntry* find_root(std::string_view name) const;
};

struct CommitReceipt {
  std::uint64_t commit_seq = 0;
  std::uint64_t path_records = 0;
  std::uint64_t e2e_records = 0;
};

// Single writer. Holds an exclusive lock on the store for its lifetime.
class TraceStore {
 public:
  // Creates the directory and an empty manifest when `create` is set and no
  // store exists yet. Throws Error(kIo) when the store is missing or already
  // locked, Error(kVersionMismatch) for an unknown format.
  static TraceStore open(const std::filesystem::path& dir, bool create = true);

  TraceStore(TraceStore&&) noexcept;
  TraceStore& operator=(TraceStore&&) noexcept;
  ~TraceStore();

  const std::filesystem::path& location() const noexcept { return dir_; }
  const Manifest& manifest() const noexcept { return manifest_; }
  bool contains_trace(std::string_view trace_id) const;

  // Durable once it returns. Trace ids of `e2e` are marked processed.
  // Throws Error(kInvalidArgument) for malformed records, Error(kIo) on
  // filesystem failure; in both cases nothing becomes visible.
  CommitReceipt append_records(std::span<const PathRecord> paths,
                               std::span<const E2ERecord> e2e);

  // Rewrites every segment in (timestamp, trace id, path) order with a fresh
  // dictionary. Query results do not change. Readers must not be open on the
  // store while it runs.
  void compact();

 private:
  struct RootState {
    std::unordered_map<std::string, std::uint32_t> path_ids;
  };

  TraceStore() = default;
  void load();
  void write_manifest(const Manifest& next);
  RootEntry& root_entry(Manifest& m, const std::string& name);

  std::filesystem::path dir_;
  int lock_fd_ = -1;
  Manifest manifest_;
  std::unordered_set<std::string> processed_;
  std::map<std::string, RootState> roots_;
  std::uint64_t digest_sum_ = 0;
  std::uint64_t digest_xor_ = 0;
};

// Read-only snapshot of a store as of open(). Safe to share between threads.
class StoreReader {
 public:
  // Throws Error(kIo) when no store exists, Error(kVersionMismatch) for an
  // unknown format.
  static StoreReader open(const std::filesystem::path& dir);

  const Manifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& location() const noexcept { return dir_; }

  // Roots with at least one e2e record in [t0, t1], sorted by name.
  std::vector<std::pair<RpcName, std::uint64_t>> list_roots(Micros t0,
                                                            Micros t1) const;

  // Records of `root` with timestamp in the closed interval [t0, t1],
  // ordered by (timestamp, trace id[, path]). Unknown roots yield nothing.
  std::vector<PathRecord> query_paths(const RpcName& root, Micros t0,
                                      Micros t1) const;
  std::vector<E2ERecord> query_e2e(const RpcName& root, Micros t0,
                                   Micros t1) const;

  // Recounts every committed file and compares with the manifest. Returns an
  // empty string when consistent, otherwise a description of the mismatch.
  std::string verify() const;

 private:
  std::filesystem::path dir_;
  Manifest manifest_;
};

// Text dump of the manifest, for `store inspect`.
std::string inspect_store(const std::filesystem::path& dir);

// UTC day bucket of a timestamp.
std::int64_t day_of(Micros timestamp);

}  // namespace pathlens
