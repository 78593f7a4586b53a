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

#include "pathlens/service.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <optional>
#include <unordered_set>

#include "pathlens/kernels.h"

namespace pathlens {

using nlohmann::json;

struct AnalysisService::ScopeData {
  std::optional<AggregatedTree> tree;
  std::vector<E2ERecord> e2e;      // store order
  std::vector<double> response;    // indexed like tree->traces()
};

namespace {

constexpr std::size_t kCacheCapacity = 32;

[[noreturn]] void bad_time(std::string_view text) {
  throw Error(ErrorKind::kInvalidArgument,
              "invalid time '" + std::string(text) +
                  "': expected integer microseconds or RFC 3339");
}

bool read_digits(std::string_view s, std::size_t& pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = s[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    v = v * 10 + (c - '0');
  }
  pos += n;
  out = v;
  return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) return false;
  ++pos;
  return true;
}

Micros parse_rfc3339(std::string_view s) {
  std::size_t pos = 0;
  int year, month, day, hour, minute, second;
  if (!read_digits(s, pos, 4, year) || !expect(s, pos, '-') ||
      !read_digits(s, pos, 2, month) || !expect(s, pos, '-') ||
      !read_digits(s, pos, 2, day)) {
    bad_time(s);
  }
  if (pos >= s.size() || (s[pos] != 'T' && s[pos] != 't' && s[pos] != ' ')) bad_time(s);
  ++pos;
  if (!read_digits(s, pos, 2, hour) || !expect(s, pos, ':') ||
      !read_digits(s, pos, 2, minute) || !expect(s, pos, ':') ||
      !read_digits(s, pos, 2, second)) {
    bad_time(s);
  }
  Micros fraction = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      if (digits < 6) fraction = fraction * 10 + (s[pos] - '0');
      ++digits;
      ++pos;
    }
    if (digits == 0) bad_time(s);
    for (int i = std::min(digits, 6); i < 6; ++i) fraction *= 10;
  }
  int offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    const int sign = s[pos] == '-' ? -1 : 1;
    ++pos;
    int oh, om;
    if (!read_digits(s, pos, 2, oh) || !expect(s, pos, ':') ||
        !read_digits(s, pos, 2, om)) {
      bad_time(s);
    }
    offset_minutes = sign * (oh * 60 + om);
  } else {
    bad_time(s);
  }
  if (pos != s.size() || month < 1 || month > 12 || day < 1 || day > 31 ||
      hour > 23 || minute > 59 || second > 60) {
    bad_time(s);
  }
  std::tm tm{};
  tm.tm_year = year - 1900;
  tm.tm_mon = month - 1;
  tm.tm_mday = day;
  tm.tm_hour = hour;
  tm.tm_min = minute;
  tm.tm_sec = second;
  const std::time_t secs = timegm(&tm);
  return (static_cast<Micros>(secs) - offset_minutes * 60LL) * 1'000'000 + fraction;
}

json scope_json(const AnalysisScope& scope) {
  return {{"root", scope.root.canonical()},
          {"from", scope.t0},
          {"to", scope.t1},
          {"attr", to_string(scope.attr)}};
}

json color_json(const ColorValue& c) {
  return {{"color", c.hex()}, {"rgb", {c.r, c.g, c.b}}};
}

json node_json(const TreeNode& node) {
  json j = {{"path", node.path.canonical()},
            {"parent", node.parent ? json(node.parent->canonical()) : json(nullptr)},
            {"name", node.path.leaf().canonical()},
            {"depth", node.path.depth()},
            {"support", node.support()},
            {"async", node.async}};
  return j;
}

json histogram_json(const Histogram& h) {
  return {{"edges", h.edges}, {"counts", h.counts}, {"total", h.total}};
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<bool> selection_mask(const AggregatedTree& tree,
                                 std::span<const E2ERecord> e2e, Micros lo,
                                 Micros hi) {
  RangePartition part = partition_by_range(e2e, lo, hi);
  std::unordered_set<std::string> chosen(part.selected.begin(), part.selected.end());
  std::vector<bool> mask(tree.request_count(), false);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = chosen.count(tree.traces()[i].trace_id) > 0;
  }
  return mask;
}

void check_range(Micros lo, Micros hi) {
  if (lo > hi) {
    throw Error(ErrorKind::kInvalidArgument, "selection needs lo <= hi");
  }
}

}  // namespace

Micros parse_time(std::string_view text) {
  if (text.empty()) bad_time(text);
  Micros v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec == std::errc() && ptr == text.data() + text.size()) return v;
  return parse_rfc3339(text);
}

AnalysisService::AnalysisService(StoreReader reader, Execution exec)
    : reader_(std::move(reader)), exec_(exec) {}

std::shared_ptr<const AnalysisService::ScopeData> AnalysisService::load(
    const RpcName& root, Micros t0, Micros t1) const {
  if (t0 > t1) throw Error(ErrorKind::kInvalidArgument, "time range needs from <= to");
  CacheKey key{root.canonical(), t0, t1};
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  auto data = std::make_shared<ScopeData>();
  data->e2e = reader_.query_e2e(root, t0, t1);
  if (!data->e2e.empty()) {
    std::vector<PathRecord> paths = reader_.query_paths(root, t0, t1);
    data->tree = build_tree(paths, data->e2e);
    data->response.reserve(data->tree->request_count());
    for (const TraceInfo& t : data->tree->traces()) {
      data->response.push_back(static_cast<double>(t.response_time));
    }
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (cache_.size() >= kCacheCapacity) cache_.clear();
  auto [it, inserted] = cache_.emplace(std::move(key), std::move(data));
  return it->second;
}

json AnalysisService::roots(Micros t0, Micros t1, std::string_view query) const {
  if (t0 > t1) throw Error(ErrorKind::kInvalidArgument, "time range needs from <= to");
  const std::string needle = lower(query);
  json list = json::array();
  for (const auto& [rpc, count] : reader_.list_roots(t0, t1)) {
    const std::string name = rpc.canonical();
    if (!needle.empty() && lower(name).find(needle) == std::string::npos) continue;
    list.push_back({{"root", name}, {"count", count}});
  }
  return {{"from", t0}, {"to", t1}, {"q", std::string(query)}, {"roots", std::move(list)}};
}

json AnalysisService::tree(const AnalysisScope& scope) const {
  auto data = load(scope.root, scope.t0, scope.t1);
  json out = scope_json(scope);
  json nodes = json::array();
  if (!data->tree) {
    out["status"] = "no data";
    out["request_count"] = 0;
    out["nodes"] = std::move(nodes);
    return out;
  }
  const AggregatedTree& tree = *data->tree;
  std::vector<CvStat> stats = tree_variability(tree, scope.attr, exec_);
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    json n = node_json(tree.nodes()[i]);
    const CvStat& s = stats[i];
    n["cv"] = s.cv;
    n["mean"] = s.mean;
    n["stddev"] = s.stddev;
    n["n_used"] = s.n_used;
    n["n_filtered"] = s.n_filtered;
    n.update(color_json(cv_color(s.cv)));
    nodes.push_back(std::move(n));
  }
  out["status"] = "ok";
  out["request_count"] = tree.request_count();
  out["nodes"] = std::move(nodes);
  return out;
}

json AnalysisService::histogram(const RpcName& root, Micros t0, Micros t1,
                                std::size_t bins) const {
  if (bins < 1) throw Error(ErrorKind::kInvalidArgument, "bins must be >= 1");
  auto data = load(root, t0, t1);
  json out = {{"root", root.canonical()}, {"from", t0}, {"to", t1}, {"bins", bins}};
  if (data->response.empty()) {
    out["status"] = "no data";
    out["histogram"] = nullptr;
    return out;
  }
  out["status"] = "ok";
  out["histogram"] = histogram_json(make_histogram(data->response, bins));
  return out;
}

json AnalysisService::node_clusters(const AnalysisScope& scope,
                                    const PathKey& path) const {
  auto data = load(scope.root, scope.t0, scope.t1);
  json out = scope_json(scope);
  out["path"] = path.canonical();
  if (!data->tree) {
    out["status"] = "no data";
    return out;
  }
  const AggregatedTree& tree = *data->tree;
  const TreeNode& node = tree.nodes()[tree.index_of(path)];
  AttributeSample sample = attribute_sample(node, scope.attr);
  ClusterResult clusters = cluster_1d(sample.values, exec_);
  Histogram e2e = make_histogram(data->response, kDefaultHistogramBins);

  json list = json::array();
  for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
    const Cluster& cl = clusters.clusters[c];
    json ids = json::array();
    std::vector<double> member_e2e;
    member_e2e.reserve(cl.members.size());
    for (std::size_t m : cl.members) {
      const std::size_t t = sample.trace_indices[m];
      ids.push_back(tree.traces()[t].trace_id);
      member_e2e.push_back(data->response[t]);
    }
    list.push_back({{"index", c},
                    {"lo", cl.lo},
                    {"hi", cl.hi},
                    {"count", cl.members.size()},
                    {"share", cl.share},
                    {"member_trace_ids", std::move(ids)},
                    {"highlight", highlight_mask(e2e, member_e2e)}});
  }
  out["status"] = "ok";
  out["support"] = node.support();
  out["n_used"] = sample.values.size();
  out["n_filtered"] = sample.n_filtered;
  out["k"] = clusters.k;
  out["silhouette"] = clusters.silhouette ? json(*clusters.silhouette) : json(nullptr);
  out["distinct_behaviors"] = clusters.k > 1;
  out["e2e_histogram"] = histogram_json(e2e);
  out["clusters"] = std::move(list);
  return out;
}

json AnalysisService::backward_tree(const AnalysisScope& scope, Micros lo,
                                    Micros hi) const {
  check_range(lo, hi);
  auto data = load(scope.root, scope.t0, scope.t1);
  json out = scope_json(scope);
  out["lo"] = lo;
  out["hi"] = hi;
  json nodes = json::array();
  if (!data->tree) {
    out["status"] = "no data";
    out["n_selected"] = 0;
    out["n_other"] = 0;
    out["nodes"] = std::move(nodes);
    return out;
  }
  const AggregatedTree& tree = *data->tree;
  std::vector<bool> mask = selection_mask(tree, data->e2e, lo, hi);
  const auto n_sel = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  const std::size_t n_other = mask.size() - n_sel;
  const bool degenerate = n_sel == 0 || n_other == 0;

  std::vector<DivergenceStat> stats;
  if (!degenerate) stats = tree_divergence(tree, scope.attr, mask, exec_);
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    json n = node_json(tree.nodes()[i]);
    if (degenerate) {
      n["kl"] = nullptr;
      n["n_selected"] = 0;
      n["n_other"] = 0;
      n["status"] = to_string(DivergenceStatus::kInsufficientData);
      n.update(color_json(kNeutralGrey));
    } else {
      const DivergenceStat& s = stats[i];
      n["kl"] = s.status == DivergenceStatus::kOk ? json(s.kl) : json(nullptr);
      n["n_selected"] = s.n_selected;
      n["n_other"] = s.n_other;
      n["status"] = to_string(s.status);
      n.update(color_json(kl_color(s)));
    }
    nodes.push_back(std::move(n));
  }
  out["status"] = degenerate ? "insufficient-data" : "ok";
  out["n_selected"] = n_sel;
  out["n_other"] = n_other;
  out["nodes"] = std::move(nodes);
  return out;
}

json AnalysisService::backward_node(const AnalysisScope& scope,
                                    const PathKey& path, Micros lo,
                                    Micros hi) const {
  check_range(lo, hi);
  auto data = load(scope.root, scope.t0, scope.t1);
  json out = scope_json(scope);
  out["path"] = path.canonical();
  out["lo"] = lo;
  out["hi"] = hi;
  if (!data->tree) {
    out["status"] = "no data";
    return out;
  }
  const AggregatedTree& tree = *data->tree;
  const TreeNode& node = tree.nodes()[tree.index_of(path)];
  std::vector<bool> mask = selection_mask(tree, data->e2e, lo, hi);
  AttributeSample sample = attribute_sample(node, scope.attr);
  std::vector<double> in, rest;
  for (std::size_t j = 0; j < sample.values.size(); ++j) {
    (mask[sample.trace_indices[j]] ? in : rest).push_back(sample.values[j]);
  }
  const auto [mn, mx] = std::minmax_element(sample.values.begin(), sample.values.end());
  std::vector<double> edges = equal_width_edges(*mn, *mx, kDefaultHistogramBins);
  DivergenceStat stat = kl_divergence(in, rest);

  const auto n_sel = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  const bool degenerate = n_sel == 0 || n_sel == mask.size();
  out["status"] = degenerate ? "insufficient-data" : std::string(to_string(stat.status));
  out["kl"] = !degenerate && stat.status == DivergenceStatus::kOk ? json(stat.kl)
                                                                  : json(nullptr);
  out["n_selected"] = stat.n_selected;
  out["n_other"] = stat.n_other;
  out["n_filtered"] = sample.n_filtered;
  out.update(color_json(degenerate ? kNeutralGrey : kl_color(stat)));
  out["edges"] = edges;
  out["selected"] = histogram_with_edges(in, edges).counts;
  out["other"] = histogram_with_edges(rest, edges).counts;
  return out;
}

}  // namespace pathlens
