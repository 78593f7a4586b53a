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

// Data-parallel loops. Every kernel has a serial and an OpenMP path that
// produce identical results; the serial path is the reference the tests and
// the benchmark compare against.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pathlens/analytics.h"
#include "pathlens/path_extractor.h"
#include "pathlens/tree_builder.h"

namespace pathlens {

// Result slot for one trace of a batch: either its extraction or the reason
// it was rejected.
struct BatchItem {
  std::optional<Extraction> extraction;
  std::string defect;  // warning kind when extraction is empty
  std::string message;
};

std::vector<BatchItem> extract_batch(std::span<const Trace> traces,
                                     Execution exec);

// A node's attribute values ready for statistics. For execution time the
// values above the 99th percentile are already removed; `trace_indices`
// maps each kept value back to AggregatedTree::traces().
struct AttributeSample {
  std::vector<double> values;
  std::vector<std::size_t> trace_indices;
  std::size_t n_filtered = 0;
};

AttributeSample attribute_sample(const TreeNode& node, AttributeKind attr);

// Per-node variability, in AggregatedTree::nodes() order.
std::vector<CvStat> tree_variability(const AggregatedTree& tree,
                                     AttributeKind attr, Execution exec);

// Per-node divergence of selected vs other requests, in
// AggregatedTree::nodes() order. `selected` is indexed like
// AggregatedTree::traces().
std::vector<DivergenceStat> tree_divergence(const AggregatedTree& tree,
                                            AttributeKind attr,
                                            const std::vector<bool>& selected,
                                            Execution exec);

}  // namespace pathlens
