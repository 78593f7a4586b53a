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

#include "pathlens/tree_builder.h"

#include <algorithm>
#include <numeric>
#include <tuple>
#include <unordered_map>

namespace pathlens {

std::string_view to_string(AttributeKind attr) {
  return attr == AttributeKind::kFrequency ? "frequency" : "execution-time";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "execution-time") return AttributeKind::kExecutionTime;
  if (text == "frequency") return AttributeKind::kFrequency;
  throw Error(ErrorKind::kInvalidArgument,
              "unknown attribute '" + std::string(text) +
                  "' (expected execution-time or frequency)");
}

const TreeNode* AggregatedTree::find(const PathKey& path) const {
  auto it = index_.find(path.canonical());
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::size_t AggregatedTree::index_of(const PathKey& path) const {
  auto it = index_.find(path.canonical());
  if (it == index_.end()) {
    throw Error(ErrorKind::kNotFound, "path not in tree: " + path.canonical());
  }
  return it->second;
}

AggregatedTree build_tree(std::span<const PathRecord> paths,
                          std::span<const E2ERecord> e2e) {
  if (e2e.empty()) {
    throw Error(ErrorKind::kNoData, "empty selection: no requests to analyze");
  }
  AggregatedTree tree;
  const RpcName root = e2e.front().root_rpc;
  tree.root_ = PathKey(root);

  tree.traces_.reserve(e2e.size());
  for (const E2ERecord& r : e2e) {
    if (r.root_rpc != root) {
      throw Error(ErrorKind::kInvalidArgument,
                  "records span several root RPCs: " + root.canonical() + ", " +
                      r.root_rpc.canonical());
    }
    tree.traces_.push_back({r.trace_id, r.timestamp, r.response_time});
  }
  std::sort(tree.traces_.begin(), tree.traces_.end(),
            [](const TraceInfo& a, const TraceInfo& b) {
              return std::tie(a.timestamp, a.trace_id) <
                     std::tie(b.timestamp, b.trace_id);
            });
  std::unordered_map<std::string_view, std::size_t> trace_index;
  trace_index.reserve(tree.traces_.size());
  for (std::size_t i = 0; i < tree.traces_.size(); ++i) {
    if (!trace_index.emplace(tree.traces_[i].trace_id, i).second) {
      throw Error(ErrorKind::kInvalidArgument,
                  "duplicate e2e record for trace " + tree.traces_[i].trace_id);
    }
  }

  // Group records by path, keeping (trace index, record) pairs.
  std::map<std::string, std::vector<std::pair<std::size_t, const PathRecord*>>,
           std::less<>>
      groups;
  const std::string root_canonical = root.canonical();
  for (const PathRecord& r : paths) {
    const std::string& c = r.path.canonical();
    if (c.compare(0, root_canonical.size(), root_canonical) != 0 ||
        (c.size() > root_canonical.size() && c[root_canonical.size()] != '/')) {
      throw Error(ErrorKind::kInvalidArgument,
                  "path " + c + " does not start at root " + root_canonical);
    }
    auto it = trace_index.find(r.trace_id);
    if (it == trace_index.end()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "path record for trace " + r.trace_id + " has no e2e record");
    }
    groups[c].emplace_back(it->second, &r);
  }

  tree.nodes_.reserve(groups.size());
  for (auto& [canonical, members] : groups) {
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    TreeNode node{members.front().second->path, std::nullopt, {}, false, {}, {}, {}};
    node.trace_indices.reserve(members.size());
    node.occurrences.reserve(members.size());
    node.exec_times.reserve(members.size());
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i > 0 && members[i].first == members[i - 1].first) {
        throw Error(ErrorKind::kInvalidArgument,
                    "duplicate path record for " + canonical + " in trace " +
                        members[i].second->trace_id);
      }
      node.trace_indices.push_back(members[i].first);
      node.occurrences.push_back(members[i].second->occurrences);
      node.exec_times.push_back(members[i].second->exec_time_mean);
      node.async = node.async || members[i].second->async;
    }
    if (!node.path.is_root()) node.parent = node.path.parent();
    tree.index_.emplace(canonical, tree.nodes_.size());
    tree.nodes_.push_back(std::move(node));
  }

  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    const TreeNode& node = tree.nodes_[i];
    if (!node.parent) continue;
    auto it = tree.index_.find(node.parent->canonical());
    if (it == tree.index_.end()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "path " + node.path.canonical() + " has no parent record");
    }
    // Nodes are visited in canonical order, so children arrive sorted.
    tree.nodes_[it->second].children.push_back(node.path);
  }
  return tree;
}

std::vector<SeriesPoint> node_series(const AggregatedTree& tree,
                                     const PathKey& path, AttributeKind attr) {
  const TreeNode& node = tree.nodes()[tree.index_of(path)];
  std::vector<SeriesPoint> out;
  out.reserve(node.support());
  for (std::size_t i = 0; i < node.support(); ++i) {
    double value = attr == AttributeKind::kFrequency
                       ? static_cast<double>(node.occurrences[i])
                       : node.exec_times[i];
    out.push_back({tree.traces()[node.trace_indices[i]].trace_id, value});
  }
  return out;
}

}  // namespace pathlens
