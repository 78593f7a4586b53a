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

#include "pathlens/path_extractor.h"

#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "pathlens/kernels.h"
#include "pathlens/trace_store.h"

namespace pathlens {

PathKey::PathKey(const RpcName& root) : canonical_(root.canonical()), depth_(1) {}

PathKey::PathKey(std::span<const RpcName> elements) : depth_(elements.size()) {
  if (elements.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "path key needs at least one RPC");
  }
  for (std::size_t i = 0; i < elements.size(); ++i) {
    if (i > 0) canonical_ += '/';
    canonical_ += elements[i].canonical();
  }
}

PathKey PathKey::parse(std::string_view canonical) {
  std::vector<RpcName> elements;
  std::size_t start = 0;
  while (true) {
    std::size_t slash = canonical.find('/', start);
    elements.push_back(RpcName::parse(canonical.substr(start, slash - start)));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return PathKey(elements);
}

std::vector<RpcName> PathKey::elements() const {
  std::vector<RpcName> out;
  out.reserve(depth_);
  std::size_t start = 0;
  while (true) {
    std::size_t slash = canonical_.find('/', start);
    out.push_back(RpcName::parse(
        std::string_view(canonical_).substr(start, slash - start)));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return out;
}

RpcName PathKey::root() const {
  return RpcName::parse(std::string_view(canonical_).substr(0, canonical_.find('/')));
}

RpcName PathKey::leaf() const {
  auto slash = canonical_.rfind('/');
  return RpcName::parse(slash == std::string::npos
                            ? std::string_view(canonical_)
                            : std::string_view(canonical_).substr(slash + 1));
}

PathKey PathKey::parent() const {
  if (depth_ <= 1) {
    throw Error(ErrorKind::kInvalidArgument, "root path has no parent");
  }
  return PathKey(canonical_.substr(0, canonical_.rfind('/')), depth_ - 1);
}

PathKey PathKey::child(const RpcName& rpc) const {
  return PathKey(canonical_ + '/' + rpc.canonical(), depth_ + 1);
}

bool PathKey::is_proper_prefix_of(const PathKey& other) const {
  return other.depth_ > depth_ && other.canonical_.size() > canonical_.size() &&
         other.canonical_.compare(0, canonical_.size(), canonical_) == 0 &&
         other.canonical_[canonical_.size()] == '/';
}

namespace {

struct PathAccumulator {
  std::uint32_t occurrences = 0;
  double duration_sum = 0.0;
  bool async = false;
};

}  // namespace

Extraction extract_paths(const Trace& trace) {
  const auto spans = trace.spans();
  std::map<std::string, PathAccumulator> acc;

  struct Frame {
    std::size_t span;
    std::string path;
    std::size_t depth;
  };
  std::vector<Frame> stack;
  stack.push_back({trace.root_index(), trace.root_span().rpc().canonical(), 1});
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.depth > kMaxPathDepth) {
      throw TraceError(TraceDefect::kDepthExceeded,
                       "trace " + trace.trace_id() + " is deeper than " +
                           std::to_string(kMaxPathDepth) + " RPCs");
    }
    const SpanRecord& span = spans[f.span];
    PathAccumulator& a = acc[f.path];
    ++a.occurrences;
    a.duration_sum += static_cast<double>(span.duration);
    a.async = a.async || span.ref_kind == RefKind::kAsynchronousFollows;
    for (std::size_t child : trace.children(f.span)) {
      stack.push_back(
          {child, f.path + '/' + spans[child].rpc().canonical(), f.depth + 1});
    }
  }

  const SpanRecord& root = trace.root_span();
  Extraction out{{},
                 E2ERecord{root.rpc(), trace.trace_id(), root.duration, root.start_time}};
  out.paths.reserve(acc.size());
  for (auto& [path, a] : acc) {
    out.paths.push_back(PathRecord{PathKey::parse(path), trace.trace_id(),
                                   a.occurrences,
                                   a.duration_sum / a.occurrences,
                                   root.start_time, a.async});
  }
  return out;
}

PreprocessSummary preprocess_traces(std::span<const Trace> traces,
                                    TraceStore& store, Execution exec) {
  const auto started = std::chrono::steady_clock::now();
  PreprocessSummary summary;

  std::vector<BatchItem> items = extract_batch(traces, exec);
  std::vector<PathRecord> paths;
  std::vector<E2ERecord> e2e;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    BatchItem& item = items[i];
    if (!item.extraction) {
      ++summary.traces_skipped;
      summary.warnings.push_back(
          {traces[i].trace_id(), item.defect, item.message});
      continue;
    }
    ++summary.traces_ok;
    const std::string& id = traces[i].trace_id();
    if (store.contains_trace(id) || !seen.insert(id).second) {
      ++summary.traces_already_stored;
      continue;
    }
    for (PathRecord& r : item.extraction->paths) paths.push_back(std::move(r));
    e2e.push_back(std::move(item.extraction->e2e));
  }

  try {
    store.append_records(paths, e2e);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " (aborted after extracting " +
                              std::to_string(summary.traces_ok) +
                              " traces; nothing from this batch was committed)");
  }
  summary.records_written = paths.size() + e2e.size();
  summary.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return summary;
}

PreprocessSummary preprocess_batch(std::span<const std::filesystem::path> inputs,
                                   TraceStore& store, Execution exec) {
  const auto started = std::chrono::steady_clock::now();
  std::vector<Trace> traces;
  std::vector<ParseWarning> warnings;
  std::uint64_t rejected = 0;
  for (const auto& input : inputs) {
    std::ifstream in(input, std::ios::binary);
    if (!in) {
      throw Error(ErrorKind::kIo, "cannot read input " + input.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
      throw Error(ErrorKind::kIo, "cannot read input " + input.string());
    }
    ParseResult parsed;
    try {
      parsed = parse_trace_batch(buf.str());
    } catch (const ParseError& e) {
      throw ParseError(e.byte_offset(), input.string() + ": " + e.what());
    }
    for (ParseWarning& w : parsed.warnings) {
      // Clock skew is informational; the trace is still accepted.
      if (w.kind != "clock skew") ++rejected;
      warnings.push_back(std::move(w));
    }
    for (Trace& t : parsed.traces) traces.push_back(std::move(t));
  }

  PreprocessSummary summary = preprocess_traces(traces, store, exec);
  summary.traces_skipped += rejected;
  warnings.insert(warnings.end(), summary.warnings.begin(), summary.warnings.end());
  summary.warnings = std::move(warnings);
  summary.elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return summary;
}

std::string summary_to_json(const PreprocessSummary& summary) {
  nlohmann::json warnings = nlohmann::json::array();
  for (const ParseWarning& w : summary.warnings) {
    warnings.push_back(
        {{"trace_id", w.trace_id}, {"kind", w.kind}, {"message", w.message}});
  }
  nlohmann::json doc = {{"traces_ok", summary.traces_ok},
                        {"traces_skipped", summary.traces_skipped},
                        {"traces_already_stored", summary.traces_already_stored},
                        {"records_written", summary.records_written},
                        {"elapsed_ms", summary.elapsed.count()},
                        {"warnings", std::move(warnings)}};
  return doc.dump();
}

}  // namespace pathlens
