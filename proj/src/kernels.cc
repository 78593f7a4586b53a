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

#include "pathlens/kernels.h"

#include <exception>

namespace pathlens {

namespace {

BatchItem extract_one(const Trace& trace) {
  BatchItem item;
  try {
    item.extraction = extract_paths(trace);
  } catch (const TraceError& e) {
    item.defect = std::string(to_string(e.defect()));
    item.message = e.what();
  } catch (const Error& e) {
    item.defect = "malformed span";
    item.message = e.what();
  }
  return item;
}

// Runs body(i) for i in [0, n), serially or across OpenMP threads. Bodies
// write only to their own output slot, so both paths give identical results.
// The first exception raised by any body is rethrown after the loop.
template <typename Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  std::exception_ptr failure;
  auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(pathlens_kernel_failure)
      if (!failure) failure = std::current_exception();
    }
  };
  if (exec == Execution::kParallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<BatchItem> extract_batch(std::span<const Trace> traces,
                                     Execution exec) {
  std::vector<BatchItem> out(traces.size());
  for_each_index(traces.size(), exec,
                 [&](std::size_t i) { out[i] = extract_one(traces[i]); });
  return out;
}

AttributeSample attribute_sample(const TreeNode& node, AttributeKind attr) {
  AttributeSample s;
  if (attr == AttributeKind::kFrequency) {
    s.values.reserve(node.support());
    for (std::uint32_t occ : node.occurrences) s.values.push_back(occ);
    s.trace_indices = node.trace_indices;
    return s;
  }
  std::vector<std::size_t> keep = p99_keep(node.exec_times);
  s.values.reserve(keep.size());
  s.trace_indices.reserve(keep.size());
  for (std::size_t i : keep) {
    s.values.push_back(node.exec_times[i]);
    s.trace_indices.push_back(node.trace_indices[i]);
  }
  s.n_filtered = node.support() - keep.size();
  return s;
}

std::vector<CvStat> tree_variability(const AggregatedTree& tree,
                                     AttributeKind attr, Execution exec) {
  const auto& nodes = tree.nodes();
  std::vector<CvStat> out(nodes.size());
  for_each_index(nodes.size(), exec, [&](std::size_t i) {
    AttributeSample s = attribute_sample(nodes[i], attr);
    CvStat stat = coefficient_of_variation(s.values, /*apply_p99=*/false);
    stat.n_filtered = s.n_filtered;
    out[i] = stat;
  });
  return out;
}

std::vector<DivergenceStat> tree_divergence(const AggregatedTree& tree,
                                            AttributeKind attr,
                                            const std::vector<bool>& selected,
                                            Execution exec) {
  if (selected.size() != tree.request_count()) {
    throw Error(ErrorKind::kInvalidArgument,
                "selection mask does not match the tree's requests");
  }
  const auto& nodes = tree.nodes();
  std::vector<DivergenceStat> out(nodes.size());
  for_each_index(nodes.size(), exec, [&](std::size_t i) {
    AttributeSample s = attribute_sample(nodes[i], attr);
    std::vector<double> in, rest;
    for (std::size_t j = 0; j < s.values.size(); ++j) {
      (selected[s.trace_indices[j]] ? in : rest).push_back(s.values[j]);
    }
    out[i] = kl_divergence(in, rest);
  });
  return out;
}

}  // namespace pathlens
