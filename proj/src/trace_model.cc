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

#include "pathlens/trace_model.h"

#include <algorithm>
#include <map>
#include <unordered_map>
#include <utility>

#include "json.hpp"

namespace pathlens {

using nlohmann::json;

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kUnsupportedFormat: return "unsupported format";
    case ErrorKind::kInvalidTrace: return "invalid trace";
    case ErrorKind::kNotFound: return "not found";
    case ErrorKind::kNoData: return "no data";
    case ErrorKind::kSpec: return "spec error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kVersionMismatch: return "version mismatch";
  }
  return "unknown";
}

std::string_view to_string(TraceDefect defect) {
  switch (defect) {
    case TraceDefect::kEmpty: return "empty trace";
    case TraceDefect::kMixedTraceIds: return "mixed trace ids";
    case TraceDefect::kDuplicateSpanId: return "duplicate span id";
    case TraceDefect::kOrphanSpan: return "orphan span";
    case TraceDefect::kCycle: return "cycle";
    case TraceDefect::kNoRoot: return "no root";
    case TraceDefect::kAmbiguousRoot: return "ambiguous root";
    case TraceDefect::kDepthExceeded: return "depth exceeded";
  }
  return "unknown";
}

std::string_view to_string(RefKind kind) {
  switch (kind) {
    case RefKind::kRoot: return "root";
    case RefKind::kSynchronousChild: return "synchronous-child";
    case RefKind::kAsynchronousFollows: return "asynchronous-follows";
  }
  return "unknown";
}

namespace {

void escape_part(std::string_view part, std::string& out) {
  for (char c : part) {
    switch (c) {
      case '%': out += "%25"; break;
      case ':': out += "%3A"; break;
      case '/': out += "%2F"; break;
      default: out += c;
    }
  }
}

std::string unescape_part(std::string_view part) {
  std::string out;
  out.reserve(part.size());
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (part[i] != '%') {
      out += part[i];
      continue;
    }
    if (i + 2 >= part.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "truncated escape in RPC name: " + std::string(part));
    }
    std::string_view code = part.substr(i + 1, 2);
    if (code == "25") {
      out += '%';
    } else if (code == "3A") {
      out += ':';
    } else if (code == "2F") {
      out += '/';
    } else {
      throw Error(ErrorKind::kInvalidArgument,
                  "bad escape in RPC name: " + std::string(part));
    }
    i += 2;
  }
  return out;
}

}  // namespace

RpcName::RpcName(std::string service, std::string operation)
    : service_(std::move(service)), operation_(std::move(operation)) {
  if (service_.empty() || operation_.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "RPC name needs a non-empty service and operation");
  }
}

RpcName RpcName::parse(std::string_view canonical) {
  auto sep = canonical.find(':');
  if (sep == std::string_view::npos ||
      canonical.find(':', sep + 1) != std::string_view::npos ||
      canonical.find('/') != std::string_view::npos) {
    throw Error(ErrorKind::kInvalidArgument,
                "malformed RPC name: " + std::string(canonical));
  }
  return RpcName(unescape_part(canonical.substr(0, sep)),
                 unescape_part(canonical.substr(sep + 1)));
}

std::string RpcName::canonical() const {
  std::string out;
  out.reserve(service_.size() + operation_.size() + 1);
  escape_part(service_, out);
  out += ':';
  escape_part(operation_, out);
  return out;
}

Trace validate_trace(std::vector<SpanRecord> spans,
                     std::vector<ParseWarning>* warnings) {
  if (spans.empty()) {
    throw TraceError(TraceDefect::kEmpty, "trace has no spans");
  }
  const std::string& trace_id = spans.front().trace_id;
  std::unordered_map<std::string_view, std::size_t> by_id;
  by_id.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const SpanRecord& span = spans[i];
    if (span.trace_id != trace_id) {
      throw TraceError(TraceDefect::kMixedTraceIds,
                       "span " + span.span_id + " belongs to trace " +
                           span.trace_id + ", expected " + trace_id);
    }
    if (!by_id.emplace(span.span_id, i).second) {
      throw TraceError(TraceDefect::kDuplicateSpanId,
                       "duplicate span id " + span.span_id);
    }
    if (span.duration < 0) {
      throw Error(ErrorKind::kInvalidArgument,
                  "negative duration on span " + span.span_id);
    }
    if (span.parent_span_id.has_value() == (span.ref_kind == RefKind::kRoot)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "reference kind disagrees with parent link on span " +
                      span.span_id);
    }
  }

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(spans.size(), kNone);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!spans[i].parent_span_id) continue;
    auto it = by_id.find(*spans[i].parent_span_id);
    if (it == by_id.end()) {
      throw TraceError(TraceDefect::kOrphanSpan,
                       "span " + spans[i].span_id + " references missing parent " +
                           *spans[i].parent_span_id);
    }
    parent[i] = it->second;
  }

  // Walk every parent chain; 0 = unvisited, 1 = on current chain, 2 = done.
  std::vector<unsigned char> state(spans.size(), 0);
  std::vector<std::size_t> chain;
  for (std::size_t start = 0; start < spans.size(); ++start) {
    chain.clear();
    std::size_t cur = start;
    while (cur != kNone && state[cur] == 0) {
      state[cur] = 1;
      chain.push_back(cur);
      cur = parent[cur];
    }
    if (cur != kNone && state[cur] == 1) {
      throw TraceError(TraceDefect::kCycle,
                       "parent cycle through span " + spans[cur].span_id);
    }
    for (std::size_t i : chain) state[i] = 2;
  }

  std::size_t root = kNone;
  std::size_t roots = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (parent[i] == kNone) {
      ++roots;
      root = i;
    }
  }
  if (roots == 0) {
    throw TraceError(TraceDefect::kNoRoot, "trace has no root span");
  }
  if (roots > 1) {
    throw TraceError(TraceDefect::kAmbiguousRoot,
                     "trace has " + std::to_string(roots) + " root spans");
  }

  Trace trace;
  trace.trace_id_ = trace_id;
  trace.root_index_ = root;
  trace.children_.assign(spans.size(), {});
  bool skewed = false;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (parent[i] == kNone) continue;
    trace.children_[parent[i]].push_back(i);
    const Micros floor = std::min(spans[parent[i]].start_time,
                                  spans[root].start_time);
    if (spans[i].start_time + kClockSkewAllowance < floor) skewed = true;
  }
  if (skewed && warnings != nullptr) {
    warnings->push_back({trace_id, "clock skew",
                         "a span starts more than " +
                             std::to_string(kClockSkewAllowance) +
                             " us before its parent or the root"});
  }
  trace.spans_ = std::move(spans);
  return trace;
}

TraceFormat parse_trace_format(std::string_view tag) {
  if (tag == "jaeger-export" || tag == "jaeger") return TraceFormat::kJaegerExport;
  throw Error(ErrorKind::kUnsupportedFormat,
              "unsupported trace format: " + std::string(tag));
}

namespace {

// Thrown while decoding one trace object; the caller turns it into a warning.
struct MalformedTrace {
  std::string kind;
  std::string message;
};

const json& require(const json& obj, const char* key, json::value_t type,
                    const char* what) {
  auto it = obj.find(key);
  bool ok = it != obj.end();
  if (ok) {
    if (type == json::value_t::number_integer) {
      ok = it->is_number_integer();
    } else {
      ok = it->type() == type;
    }
  }
  if (!ok) {
    throw MalformedTrace{"malformed span",
                         std::string(what) + " is missing field '" + key +
                             "' or has the wrong type"};
  }
  return *it;
}

std::vector<SpanRecord> decode_jaeger_trace(const json& jtrace,
                                            std::string& trace_id) {
  if (!jtrace.is_object()) {
    throw MalformedTrace{"malformed trace", "trace entry is not an object"};
  }
  trace_id = require(jtrace, "traceID", json::value_t::string, "trace")
                 .get<std::string>();
  const json& jspans = require(jtrace, "spans", json::value_t::array, "trace");
  std::map<std::string, std::string, std::less<>> services;
  if (auto it = jtrace.find("processes"); it != jtrace.end()) {
    if (!it->is_object()) {
      throw MalformedTrace{"malformed trace", "'processes' is not an object"};
    }
    for (const auto& [pid, proc] : it->items()) {
      if (!proc.is_object()) continue;
      auto name = proc.find("serviceName");
      if (name != proc.end() && name->is_string()) {
        services.emplace(pid, name->get<std::string>());
      }
    }
  }

  std::vector<SpanRecord> spans;
  spans.reserve(jspans.size());
  for (const json& jspan : jspans) {
    if (!jspan.is_object()) {
      throw MalformedTrace{"malformed span", "span entry is not an object"};
    }
    SpanRecord span;
    span.trace_id = trace_id;
    span.span_id =
        require(jspan, "spanID", json::value_t::string, "span").get<std::string>();
    span.operation_name =
        require(jspan, "operationName", json::value_t::string, "span")
            .get<std::string>();
    span.start_time =
        require(jspan, "startTime", json::value_t::number_integer, "span")
            .get<Micros>();
    span.duration =
        require(jspan, "duration", json::value_t::number_integer, "span")
            .get<Micros>();
    if (span.duration < 0) {
      throw MalformedTrace{"malformed span",
                           "span " + span.span_id + " has negative duration"};
    }
    const std::string pid =
        require(jspan, "processID", json::value_t::string, "span")
            .get<std::string>();
    auto svc = services.find(pid);
    if (svc == services.end() || svc->second.empty()) {
      throw MalformedTrace{"malformed span", "span " + span.span_id +
                                                 " has unknown processID " + pid};
    }
    span.service_name = svc->second;
    if (span.operation_name.empty()) {
      throw MalformedTrace{"malformed span",
                           "span " + span.span_id + " has empty operationName"};
    }

    // The first CHILD_OF wins; FOLLOWS_FROM is used only when no CHILD_OF
    // exists. References into other traces are ignored.
    const json* sync_ref = nullptr;
    const json* async_ref = nullptr;
    if (auto refs = jspan.find("references"); refs != jspan.end()) {
      if (!refs->is_array()) {
        throw MalformedTrace{"malformed span", "'references' is not an array"};
      }
      for (const json& ref : *refs) {
        if (!ref.is_object()) continue;
        auto type = ref.find("refType");
        auto parent = ref.find("spanID");
        if (type == ref.end() || !type->is_string() || parent == ref.end() ||
            !parent->is_string()) {
          throw MalformedTrace{"malformed span",
                               "span " + span.span_id + " has a bad reference"};
        }
        if (auto tid = ref.find("traceID");
            tid != ref.end() && tid->is_string() && *tid != trace_id) {
          continue;
        }
        if (*type == "CHILD_OF") {
          if (sync_ref == nullptr) sync_ref = &*parent;
        } else if (*type == "FOLLOWS_FROM") {
          if (async_ref == nullptr) async_ref = &*parent;
        } else {
          throw MalformedTrace{"malformed span",
                               "span " + span.span_id + " has unknown refType " +
                                   type->get<std::string>()};
        }
      }
    }
    if (sync_ref != nullptr) {
      span.parent_span_id = sync_ref->get<std::string>();
      span.ref_kind = RefKind::kSynchronousChild;
    } else if (async_ref != nullptr) {
      span.parent_span_id = async_ref->get<std::string>();
      span.ref_kind = RefKind::kAsynchronousFollows;
    } else {
      span.ref_kind = RefKind::kRoot;
    }
    spans.push_back(std::move(span));
  }
  return spans;
}

}  // namespace

ParseResult parse_trace_batch(std::string_view raw, TraceFormat format) {
  if (format != TraceFormat::kJaegerExport) {
    throw Error(ErrorKind::kUnsupportedFormat, "unsupported trace format");
  }
  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (!doc.is_object()) {
    throw ParseError(0, "top-level value is not an object");
  }
  auto data = doc.find("data");
  if (data == doc.end() || !data->is_array()) {
    throw ParseError(0, "top-level field 'data' is missing or not an array");
  }

  ParseResult result;
  result.traces.reserve(data->size());
  for (const json& jtrace : *data) {
    std::string trace_id;
    try {
      std::vector<SpanRecord> spans = decode_jaeger_trace(jtrace, trace_id);
      result.traces.push_back(validate_trace(std::move(spans), &result.warnings));
    } catch (const MalformedTrace& m) {
      result.warnings.push_back({trace_id, m.kind, m.message});
    } catch (const TraceError& e) {
      result.warnings.push_back(
          {trace_id, std::string(to_string(e.defect())), e.what()});
    } catch (const Error& e) {
      result.warnings.push_back({trace_id, "malformed span", e.what()});
    }
  }
  return result;
}

std::string serialize_trace_batch(std::span<const Trace> traces,
                                  TraceFormat format) {
  if (format != TraceFormat::kJaegerExport) {
    throw Error(ErrorKind::kUnsupportedFormat, "unsupported trace format");
  }
  json data = json::array();
  for (const Trace& trace : traces) {
    std::map<std::string, std::string> pid_of_service;
    json processes = json::object();
    json jspans = json::array();
    for (const SpanRecord& span : trace.spans()) {
      auto [it, inserted] = pid_of_service.try_emplace(
          span.service_name, "p" + std::to_string(pid_of_service.size() + 1));
      if (inserted) {
        processes[it->second] = {{"serviceName", span.service_name},
                                 {"tags", json::array()}};
      }
      json refs = json::array();
      if (span.parent_span_id) {
        refs.push_back(
            {{"refType", span.ref_kind == RefKind::kAsynchronousFollows
                             ? "FOLLOWS_FROM"
                             : "CHILD_OF"},
             {"traceID", span.trace_id},
             {"spanID", *span.parent_span_id}});
      }
      jspans.push_back({{"traceID", span.trace_id},
                        {"spanID", span.span_id},
                        {"operationName", span.operation_name},
                        {"references", std::move(refs)},
                        {"startTime", span.start_time},
                        {"duration", span.duration},
                        {"processID", it->second},
                        {"tags", json::array()},
                        {"logs", json::array()}});
    }
    data.push_back({{"traceID", trace.trace_id()},
                    {"spans", std::move(jspans)},
                    {"processes", std::move(processes)},
                    {"warnings", nullptr}});
  }
  json doc = {{"data", std::move(data)}};
  return doc.dump();
}

}  // namespace pathlens
