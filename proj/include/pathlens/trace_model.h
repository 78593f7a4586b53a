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

// Trace domain types and the Jaeger export reader/writer.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pathlens/error.h"

namespace pathlens {

// Microseconds, either since the Unix epoch or as a duration.
using Micros = std::int64_t;

// A child span may start this much earlier than its parent before a
// clock-skew warning is raised.
inline constexpr Micros kClockSkewAllowance = 1000;

// Identity of an RPC: the (service, operation) pair. The canonical form is
// "service:operation" with '%', ':' and '/' percent-escaped inside each part,
// so the form always holds exactly one ':' and never a '/'.
class RpcName {
 public:
  RpcName(std::string service, std::string operation);

  // Inverse of canonical(). Throws Error(kInvalidArgument) on malformed input.
  static RpcName parse(std::string_view canonical);

  const std::string& service() const noexcept { return service_; }
  const std::string& operation() const noexcept { return operation_; }
  std::string canonical() const;

  friend bool operator==(const RpcName&, const RpcName&) = default;
  friend auto operator<=>(const RpcName&, const RpcName&) = default;

 private:
  std::string service_;
  std::string operation_;
};

enum class RefKind { kRoot, kSynchronousChild, kAsynchronousFollows };

std::string_view to_string(RefKind kind);

struct SpanRecord {
  std::string trace_id;
  std::string span_id;
  std::string operation_name;
  std::string service_name;
  std::optional<std::string> parent_span_id;
  RefKind ref_kind = RefKind::kRoot;
  Micros start_time = 0;
  Micros duration = 0;

  RpcName rpc() const { return RpcName(service_name, operation_name); }

  friend bool operator==(const SpanRecord&, const SpanRecord&) = default;
};

struct ParseWarning {
  std::string trace_id;
  std::string kind;  // e.g. "orphan span", "ambiguous root", "clock skew"
  std::string message;
};

// A validated trace: one root, every parent resolvable, no cycles. Spans keep
// their input order.
class Trace {
 public:
  const std::string& trace_id() const noexcept { return trace_id_; }
  std::span<const SpanRecord> spans() const noexcept { return spans_; }
  std::size_t root_index() const noexcept { return root_index_; }
  const SpanRecord& root_span() const { return spans_[root_index_]; }
  // Indices of the direct children of spans()[index], in input order.
  std::span<const std::size_t> children(std::size_t index) const {
    return children_[index];
  }

  // End-to-end response time of the request.
  Micros response_time() const { return root_span().duration; }

  friend bool operator==(const Trace& a, const Trace& b) {
    return a.trace_id_ == b.trace_id_ && a.spans_ == b.spans_;
  }

 private:
  friend Trace validate_trace(std::vector<SpanRecord> spans,
                              std::vector<ParseWarning>* warnings);

  std::string trace_id_;
  std::vector<SpanRecord> spans_;
  std::size_t root_index_ = 0;
  std::vector<std::vector<std::size_t>> children_;
};

// Builds a Trace from spans sharing one trace id. Throws TraceError for
// empty input, mixed ids, duplicate span ids, orphan spans, cycles, and zero
// or multiple roots. Clock skew beyond kClockSkewAllowance is accepted but
// reported through `warnings` when provided.
Trace validate_trace(std::vector<SpanRecord> spans,
                     std::vector<ParseWarning>* warnings = nullptr);

enum class TraceFormat { kJaegerExport };

// Accepts "jaeger-export" (or "jaeger"); anything else throws
// Error(kUnsupportedFormat).
TraceFormat parse_trace_format(std::string_view tag);

struct ParseResult {
  std::vector<Trace> traces;
  std::vector<ParseWarning> warnings;
};

// Parses a whole document. Structurally broken traces are skipped and
// reported in `warnings`; a syntax error in the document throws ParseError
// carrying the byte offset.
ParseResult parse_trace_batch(std::string_view raw,
                              TraceFormat format = TraceFormat::kJaegerExport);

// Writes traces in the Jaeger export shape. Output is deterministic: the
// same traces always yield the same bytes.
std::string serialize_trace_batch(
    std::span<const Trace> traces,
    TraceFormat format = TraceFormat::kJaegerExport);

}  // namespace pathlens
