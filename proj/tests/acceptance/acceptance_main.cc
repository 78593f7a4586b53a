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

// Acceptance gate. Runs every headline scenario at its stated threshold and
// prints one PASS/FAIL line per criterion; exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "httplib.h"
#include "oracles.h"
#include "pathlens/analytics.h"
#include "pathlens/http_server.h"
#include "pathlens/path_extractor.h"
#include "pathlens/service.h"
#include "pathlens/synth_gen.h"
#include "pathlens/trace_store.h"
#include "pathlens/tree_builder.h"
#include "test_support.h"

namespace {

using namespace pathlens;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string fmt(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Accumulates sub-check outcomes into one verdict line.
class Verdict {
 public:
  void check(bool ok, const std::string& what) {
    all_ &= ok;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += (ok ? "" : "!") + what;
  }
  bool ok() const { return all_; }
  const std::string& detail() const { return detail_; }

 private:
  bool all_ = true;
  std::string detail_;
};

const char* const kRoot = "gateway:request";
const char* const kSyncTarget = "gateway:request/svc2:op2/svc2-1:op2-1";
const char* const kAsyncTarget = "gateway:request/svc3:op3/svc3-3:op3-3";
const char* const kMultimodePath = "gateway:request/svc1:op1/svc1-1:op1-1";

TopologyNode* mutable_node(TopologySpec& t, const PathKey& path) {
  return const_cast<TopologyNode*>(find_node(t, path));
}

// Depth 3, fan-out 3, one leaf called asynchronously.
TopologySpec detection_topology() {
  TopologySpec t = balanced_topology(3, 3, LatencyModel::lognormal(1000.0, 0.1));
  mutable_node(t, PathKey::parse(kAsyncTarget))->kind = CallKind::kAsync;
  return t;
}

struct Loaded {
  testing::TempDir dir;
  std::unique_ptr<AnalysisService> service;
  std::unordered_map<std::string, double> e2e;  // trace id -> response time
};

std::unique_ptr<Loaded> load(const GeneratedBatch& batch) {
  auto out = std::make_unique<Loaded>();
  {
    TraceStore store = TraceStore::open(out->dir.path() / "store");
    preprocess_traces(batch.traces, store);
  }
  out->service = std::make_unique<AnalysisService>(
      StoreReader::open(out->dir.path() / "store"));
  for (const Trace& t : batch.traces) {
    out->e2e[t.trace_id()] = static_cast<double>(t.response_time());
  }
  return out;
}

std::vector<double> e2e_where(const GeneratedBatch& batch, std::size_t injection,
                              bool fired) {
  std::vector<double> v;
  for (std::size_t i = 0; i < batch.traces.size(); ++i) {
    if (batch.fired[i][injection] == fired) {
      v.push_back(static_cast<double>(batch.traces[i].response_time()));
    }
  }
  return v;
}

std::set<std::string> ancestors_of(const PathKey& path) {
  std::set<std::string> out;
  for (PathKey p = path; !p.is_root();) {
    p = p.parent();
    out.insert(p.canonical());
  }
  return out;
}

// Nodes outside the injected node's ancestor chain, ranked by KL descending.
std::vector<std::pair<std::string, double>> ranked_outside(
    const json& backward, const std::set<std::string>& excluded) {
  std::vector<std::pair<std::string, double>> out;
  for (const json& n : backward["nodes"]) {
    const std::string path = n["path"].get<std::string>();
    if (excluded.count(path)) continue;
    out.emplace_back(path, n["kl"].is_null() ? -1.0 : n["kl"].get<double>());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

// ---- criteria ----

Verdict injected_delay_detection() {
  Verdict v;
  const auto started = Clock::now();
  const TopologySpec topo = detection_topology();
  const Micros delay = delay_for_e2e_increase(topo, 20.0);
  const PathKey target = PathKey::parse(kSyncTarget);
  const InjectionSpec sync{target, 0.10, delay, true};
  const GeneratedBatch batch = generate(topo, 2000, {&sync, 1}, 20240501);
  auto loaded = load(batch);
  const AnalysisService& svc = *loaded->service;
  const AnalysisScope scope{RpcName::parse(kRoot)};

  std::unordered_map<std::string, bool> fired;
  for (std::size_t i = 0; i < batch.traces.size(); ++i) {
    fired[batch.traces[i].trace_id()] = batch.fired[i][0];
  }

  // (a) forward
  const json tree = svc.tree(scope);
  std::string top_cv;
  double best = -1.0;
  for (const json& n : tree["nodes"]) {
    if (n["cv"].get<double>() > best) {
      best = n["cv"].get<double>();
      top_cv = n["path"].get<std::string>();
    }
  }
  v.check(top_cv == kSyncTarget, "max-CV node " + top_cv + " cv=" + fmt(best));

  const json cl = svc.node_clusters(scope, target);
  const int k = cl["k"].get<int>();
  v.check(k == 2, "k=" + std::to_string(k));
  const json& slow = cl["clusters"].back();
  std::unordered_set<std::string> slow_ids;
  for (const json& id : slow["member_trace_ids"]) slow_ids.insert(id.get<std::string>());
  std::size_t used = 0, agree = 0;
  for (const json& c : cl["clusters"]) {
    for (const json& id : c["member_trace_ids"]) {
      const std::string s = id.get<std::string>();
      ++used;
      agree += (slow_ids.count(s) > 0) == fired.at(s);
    }
  }
  const double agreement = static_cast<double>(agree) / static_cast<double>(used);
  v.check(agreement >= 0.95, "agreement=" + fmt(agreement, 4));

  const double p95 = oracle::percentile(e2e_where(batch, 0, false), 95.0);
  const json& edges = cl["e2e_histogram"]["edges"];
  const json& mask = slow["highlight"];
  double above = 0.0, total = 0.0;
  for (std::size_t b = 0; b < mask.size(); ++b) {
    const double m = mask[b].get<double>();
    total += m;
    if (edges[b].get<double>() >= p95) above += m;
  }
  v.check(total > 0 && above / total >= 0.90,
          "slow mass above uninjected p95=" + fmt(above / std::max(total, 1.0), 4));

  // (b) backward
  double max_e2e = 0.0;
  for (const auto& [id, rt] : loaded->e2e) max_e2e = std::max(max_e2e, rt);
  const json bt = svc.backward_tree(scope, static_cast<Micros>(std::ceil(p95)),
                                    static_cast<Micros>(max_e2e));
  auto ranked = ranked_outside(bt, ancestors_of(target));
  v.check(!ranked.empty() && ranked.front().first == kSyncTarget,
          "top KL outside ancestor chain " + ranked.front().first);
  double target_kl = -1.0, worst_untouched = 0.0;
  std::string worst_path;
  for (const auto& [path, kl] : ranked) {
    if (path == kSyncTarget) {
      target_kl = kl;
    } else if (kl < 0.0 || kl > worst_untouched) {
      worst_untouched = kl < 0.0 ? 1e9 : kl;
      worst_path = path;
    }
  }
  v.check(target_kl >= 1.0, "injected KL=" + fmt(target_kl));
  v.check(worst_untouched < 0.2, "max untouched KL=" + fmt(worst_untouched) + " (" +
                                     worst_path + ")");
  const double secs = seconds_since(started);
  v.check(secs < 60.0, "runtime=" + fmt(secs, 2) + "s");
  return v;
}

Verdict async_robustness() {
  Verdict v;
  const TopologySpec topo = detection_topology();
  const Micros delay = delay_for_e2e_increase(topo, 20.0);
  const PathKey async_target = PathKey::parse(kAsyncTarget);
  const std::vector<InjectionSpec> injections{
      {PathKey::parse(kSyncTarget), 0.10, delay, true},
      {async_target, 0.10, delay, false}};
  const GeneratedBatch batch = generate(topo, 2000, injections, 20240502);
  auto loaded = load(batch);
  const AnalysisService& svc = *loaded->service;
  const AnalysisScope scope{RpcName::parse(kRoot)};

  const json cl = svc.node_clusters(scope, async_target);
  const int k = cl["k"].get<int>();
  v.check(k == 2, "k=" + std::to_string(k));
  std::unordered_set<std::string> slow;
  for (const json& id : cl["clusters"].back()["member_trace_ids"]) {
    slow.insert(id.get<std::string>());
  }
  std::vector<double> slow_e2e, other_e2e;
  for (const auto& [id, rt] : loaded->e2e) {
    (slow.count(id) ? slow_e2e : other_e2e).push_back(rt);
  }
  std::sort(slow_e2e.begin(), slow_e2e.end());
  std::sort(other_e2e.begin(), other_e2e.end());
  const DivergenceStat d = kl_divergence(slow_e2e, other_e2e);
  v.check(d.status == DivergenceStatus::kOk && d.kl < 0.1,
          "E2E KL slow-vs-rest=" + fmt(d.kl, 4) + " (n=" +
              std::to_string(slow_e2e.size()) + ")");

  const double p95 = oracle::percentile(e2e_where(batch, 0, false), 95.0);
  const double max_e2e = other_e2e.empty() ? 0.0 : std::max(other_e2e.back(),
                                                             slow_e2e.back());
  const json bt = svc.backward_tree(scope, static_cast<Micros>(std::ceil(p95)),
                                    static_cast<Micros>(max_e2e));
  double async_kl = -1.0;
  for (const json& n : bt["nodes"]) {
    if (n["path"] == kAsyncTarget && !n["kl"].is_null()) async_kl = n["kl"].get<double>();
  }
  v.check(async_kl >= 0.0 && async_kl < 0.2, "backward async KL=" + fmt(async_kl, 4));
  return v;
}

Verdict frequency_modes() {
  Verdict v;
  const TopologySpec topo = balanced_topology(3, 3, LatencyModel::lognormal(1000.0, 0.1));
  const MultimodeSpec mm{PathKey::parse(kMultimodePath), {2, 6, 14}, {}, 1000};
  const GeneratedBatch batch = generate_multimode(topo, mm, 1500, 20240503);
  auto loaded = load(batch);
  AnalysisScope scope{RpcName::parse(kRoot)};
  scope.attr = AttributeKind::kFrequency;
  const json cl = loaded->service->node_clusters(scope, mm.path);

  std::map<std::uint32_t, std::size_t> expected;
  for (std::uint32_t level : batch.levels) ++expected[level];
  const int k = cl["k"].get<int>();
  v.check(k == 3, "k=" + std::to_string(k));
  const std::vector<double> want{2, 6, 14};
  std::vector<std::set<std::size_t>> bins;
  for (std::size_t c = 0; c < cl["clusters"].size() && c < 3; ++c) {
    const json& cluster = cl["clusters"][c];
    const double lo = cluster["lo"].get<double>(), hi = cluster["hi"].get<double>();
    const auto count = cluster["count"].get<std::size_t>();
    v.check(lo == want[c] && hi == want[c] &&
                count == expected[static_cast<std::uint32_t>(want[c])],
            "cluster {" + fmt(lo, 0) + (lo == hi ? "" : ".." + fmt(hi, 0)) + "} n=" +
                std::to_string(count));
    std::set<std::size_t> occupied;
    const json& mask = cluster["highlight"];
    for (std::size_t b = 0; b < mask.size(); ++b) {
      if (mask[b].get<std::uint64_t>() > 0) occupied.insert(b);
    }
    bins.push_back(std::move(occupied));
  }
  bool disjoint = bins.size() == 3;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    for (std::size_t j = i + 1; j < bins.size(); ++j) {
      for (std::size_t b : bins[i]) disjoint &= bins[j].count(b) == 0;
    }
  }
  v.check(disjoint, "highlight bins disjoint");
  return v;
}

Verdict statistics_oracles() {
  Verdict v;
  constexpr double kTol = 1e-9;
  std::mt19937_64 rng(20240504);

  // (a) CV
  {
    std::uniform_int_distribution<int> size(1, 200);
    std::uniform_int_distribution<int> family(0, 2);
    std::uniform_real_distribution<double> scale(1e-3, 1e3);
    double worst = 0.0, worst_scale = 0.0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(size(rng));
      const int f = family(rng);
      std::lognormal_distribution<double> ln(std::log(1000.0), 0.8);
      std::uniform_real_distribution<double> un(0.0, 50000.0);
      std::uniform_int_distribution<int> small(1, 20);
      for (double& e : x) e = f == 0 ? ln(rng) : f == 1 ? un(rng) : small(rng);
      const CvStat got = coefficient_of_variation(x, false);
      const oracle::CvRef want = oracle::cv(x);
      worst = std::max({worst, std::fabs(got.cv - want.cv),
                        std::fabs(got.mean - want.mean) / std::max(1.0, want.mean),
                        std::fabs(got.stddev - want.stddev) / std::max(1.0, want.mean)});
      const double c = scale(rng);
      std::vector<double> y(x);
      for (double& e : y) e *= c;
      worst_scale = std::max(worst_scale,
                             std::fabs(coefficient_of_variation(y, false).cv - got.cv));
    }
    v.check(worst <= kTol, "CV max err=" + fmt(worst * 1e12, 3) + "e-12");
    v.check(worst_scale <= kTol, "CV scale err=" + fmt(worst_scale * 1e12, 3) + "e-12");
  }

  // (b) partitions, n <= 12, k <= 5
  {
    std::uniform_int_distribution<int> size(2, 12);
    std::uniform_int_distribution<int> coarse(0, 6);
    std::normal_distribution<double> fine(0.0, 10.0);
    std::size_t cases = 0, failures = 0;
    for (int t = 0; t < 3000; ++t) {
      std::vector<double> x(size(rng));
      const bool ties = t % 2 == 0;
      for (double& e : x) e = ties ? coarse(rng) : fine(rng);
      const std::set<double> distinct(x.begin(), x.end());
      const int d = static_cast<int>(distinct.size());
      double best_sil = -2.0;
      int best_k = 1;
      for (int k = 1; k <= std::min(5, d); ++k) {
        ++cases;
        const Partition p = optimal_partition_1d(x, k);
        const double want = oracle::best_partition_sse(x, k);
        if (std::fabs(p.sse - want) > kTol * std::max(1.0, want)) ++failures;
        if (k >= 2) {
          const double s = oracle::silhouette(x, p.labels);
          if (s > best_sil + 1e-12) {
            best_sil = s;
            best_k = k;
          }
        }
      }
      const ClusterResult r = cluster_1d(x);
      ++cases;
      const bool k_ok = d < 2 ? r.k == 1 : r.k == best_k;
      const bool sse_ok =
          std::fabs(r.sse - oracle::best_partition_sse(x, r.k)) <=
          kTol * std::max(1.0, r.sse);
      if (!k_ok || !sse_ok) ++failures;
    }
    v.check(failures == 0, "partition cases=" + std::to_string(cases) +
                               " mismatches=" + std::to_string(failures));
  }

  // (c) silhouette
  {
    std::uniform_int_distribution<int> size(2, 80);
    std::normal_distribution<double> val(0.0, 100.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
      const int n = size(rng);
      std::uniform_int_distribution<int> kk(2, std::min(5, n));
      const int k = kk(rng);
      std::vector<double> x(n);
      for (double& e : x) e = t % 3 == 0 ? std::round(val(rng) / 50.0) : val(rng);
      std::vector<int> label(n);
      for (int i = 0; i < n; ++i) label[i] = i < k ? i : static_cast<int>(rng() % k);
      std::shuffle(label.begin(), label.end(), rng);
      const double want = oracle::silhouette(x, label);
      worst = std::max({worst, std::fabs(silhouette(x, label, Execution::kSerial) - want),
                        std::fabs(silhouette(x, label, Execution::kParallel) - want)});
    }
    v.check(worst <= kTol, "silhouette max err=" + fmt(worst * 1e12, 3) + "e-12");
  }

  // (d) KL
  {
    std::uniform_int_distribution<int> size(5, 300);
    std::uniform_int_distribution<int> nbins(2, 40);
    std::uniform_real_distribution<double> shift(-2.0, 2.0);
    const double alphas[] = {0.1, 0.5, 1.0};
    double worst = 0.0, min_kl = 1.0, self_kl = 0.0;
    for (int t = 0; t < 1000; ++t) {
      std::normal_distribution<double> a(0.0, 1.0), b(shift(rng), 1.0 + shift(rng) / 4);
      std::vector<double> p(size(rng)), q(size(rng));
      for (double& e : p) e = a(rng);
      for (double& e : q) e = b(rng);
      const std::size_t bins = nbins(rng);
      const double alpha = alphas[t % 3];
      const DivergenceStat got = kl_divergence(p, q, bins, alpha);
      worst = std::max(worst, std::fabs(got.kl - oracle::kl(p, q, bins, alpha)));
      min_kl = std::min(min_kl, got.kl);
      self_kl = std::max(self_kl, std::fabs(kl_divergence(p, p, bins, alpha).kl));
    }
    v.check(worst <= kTol, "KL max err=" + fmt(worst * 1e12, 3) + "e-12");
    v.check(min_kl >= 0.0, "KL min=" + fmt(min_kl, 6));
    v.check(self_kl == 0.0, "KL(P,P)=" + fmt(self_kl, 6));

    std::vector<double> sel(10, 0.0), oth(5, 0.0);
    oth.resize(10, 1.0);
    const double worked = kl_divergence(sel, oth, 2, 0.5).kl;
    v.check(std::fabs(worked - 0.5082397813921696) <= kTol,
            "worked example=" + fmt(worked, 10));
  }
  return v;
}

Verdict pipeline_scale() {
  Verdict v;
  TopologySpec topo = balanced_topology(3, 3, LatencyModel::lognormal(1000.0, 0.2));
  topo.root.children.push_back(TopologyNode{RpcName("cache", "get"), CallKind::kSync,
                                            LatencyModel::uniform(100, 300),
                                            CallCount::fixed(1), {}});
  topo.root.children.push_back(TopologyNode{RpcName("audit", "log"), CallKind::kAsync,
                                            LatencyModel::constant(200),
                                            CallCount::fixed(1), {}});
  const InjectionSpec sync{PathKey::parse(kSyncTarget), 0.10,
                           delay_for_e2e_increase(topo, 20.0), true};
  const GeneratedBatch batch = generate(topo, 20000, {&sync, 1}, 20240505);
  std::size_t spans = 0;
  for (const Trace& t : batch.traces) spans += t.spans().size();

  testing::TempDir dir;
  const auto file = dir / "corpus.json";
  {
    std::ofstream out(file, std::ios::binary);
    out << serialize_trace_batch(batch.traces);
  }
  const auto started = Clock::now();
  PreprocessSummary summary;
  {
    TraceStore store = TraceStore::open(dir / "store");
    std::vector<std::filesystem::path> inputs{file};
    summary = preprocess_batch(inputs, store);
  }
  const double pre_secs = seconds_since(started);
  v.check(summary.traces_ok == 20000 && pre_secs < 120.0,
          "preprocess " + std::to_string(summary.traces_ok) + " traces (" +
              fmt(static_cast<double>(spans) / 20000.0, 1) + " spans avg) in " +
              fmt(pre_secs, 2) + "s");

  auto service = std::make_shared<AnalysisService>(StoreReader::open(dir / "store"));
  HttpServer server(service);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  httplib::Client client("127.0.0.1", port);
  client.set_read_timeout(60, 0);

  std::vector<double> e2e;
  for (const Trace& t : batch.traces) e2e.push_back(static_cast<double>(t.response_time()));
  const auto lo = static_cast<Micros>(oracle::percentile(e2e, 95.0));
  const auto hi = static_cast<Micros>(*std::max_element(e2e.begin(), e2e.end()));
  const std::string queries[] = {
      "/api/tree?root=gateway:request&attr=execution-time",
      "/api/backward/tree?root=gateway:request&attr=execution-time&lo=" +
          std::to_string(lo) + "&hi=" + std::to_string(hi),
      "/api/tree?root=gateway:request&attr=frequency",
  };
  for (const std::string& q : queries) {
    const auto t = Clock::now();
    auto res = client.Get(q);
    const double secs = seconds_since(t);
    const bool ok = res && res->status == 200 &&
                    json::parse(res->body)["status"] == "ok";
    v.check(ok && secs < 2.0, q.substr(0, q.find('?')) + " " + fmt(secs, 3) + "s");
  }
  server.stop();
  return v;
}

Verdict structural_semantics() {
  Verdict v;
  // Parent invoking the same child three times.
  {
    using testing::span;
    std::vector<SpanRecord> spans{
        span("t", "a", "ui", "query", std::nullopt, 0, 100),
        span("t", "b1", "db", "get", "a", 5, 10),
        span("t", "b2", "db", "get", "a", 20, 10),
        span("t", "b3", "db", "get", "a", 40, 10),
        span("t", "c", "auth", "check", "a", 60, 20),
    };
    const Trace trace = validate_trace(spans);
    const Extraction x = extract_paths(trace);
    const AggregatedTree tree = build_tree(x.paths, std::span(&x.e2e, 1));
    const TreeNode* node = tree.find(PathKey::parse("ui:query/db:get"));
    v.check(tree.nodes().size() == 3 && node && node->occurrences.size() == 1 &&
                node->occurrences[0] == 3 && node->exec_times[0] == 10.0,
            "triple call -> 1 node, occurrences 3");
  }

  // 10,000 random traces over 100 random topologies.
  std::mt19937_64 rng(20240506);
  std::size_t traces = 0, closure_bad = 0, count_bad = 0, tree_bad = 0;
  for (int topo_i = 0; topo_i < 100; ++topo_i) {
    const TopologySpec topo = testing::random_topology(rng);
    const GeneratedBatch batch = generate(topo, 100, {}, rng());
    testing::Corpus corpus;
    for (const Trace& t : batch.traces) {
      ++traces;
      const Extraction x = extract_paths(t);
      std::set<std::string> present;
      std::uint64_t occ = 0;
      for (const PathRecord& r : x.paths) {
        present.insert(r.path.canonical());
        occ += r.occurrences;
      }
      for (const PathRecord& r : x.paths) {
        if (!r.path.is_root() && !present.count(r.path.parent().canonical())) ++closure_bad;
      }
      // Leaf spans versus occurrences of paths with no extension.
      std::size_t leaf_spans = 0;
      for (std::size_t i = 0; i < t.spans().size(); ++i) {
        leaf_spans += t.children(i).empty();
      }
      std::uint64_t leaf_occ = 0;
      for (const PathRecord& r : x.paths) {
        const bool extended = std::any_of(x.paths.begin(), x.paths.end(), [&](const PathRecord& o) {
          return r.path.is_proper_prefix_of(o.path);
        });
        if (!extended) leaf_occ += r.occurrences;
      }
      if (occ != t.spans().size() || leaf_occ != leaf_spans) ++count_bad;
      corpus.paths.insert(corpus.paths.end(), x.paths.begin(), x.paths.end());
      corpus.e2e.push_back(x.e2e);
    }
    const AggregatedTree tree = build_tree(corpus.paths, corpus.e2e);
    std::map<std::string, std::set<std::string>> ids;
    for (const PathRecord& r : corpus.paths) ids[r.path.canonical()].insert(r.trace_id);
    for (const TreeNode& n : tree.nodes()) {
      if (n.parent && !tree.find(*n.parent)) ++tree_bad;
      if (n.support() != ids[n.path.canonical()].size()) ++tree_bad;
    }
    if (tree.nodes().size() != ids.size()) ++tree_bad;
  }
  v.check(closure_bad == 0, "prefix closure violations=" + std::to_string(closure_bad));
  v.check(count_bad == 0, "span-count mismatches=" + std::to_string(count_bad));
  v.check(tree_bad == 0, "tree mismatches=" + std::to_string(tree_bad));
  v.check(traces == 10000, "traces=" + std::to_string(traces));
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict()> run;
  };
  const Criterion criteria[] = {
      {"injected-delay-detection", injected_delay_detection},
      {"async-no-effect-robustness", async_robustness},
      {"frequency-mode-correspondence", frequency_modes},
      {"statistics-oracle-suite", statistics_oracles},
      {"pipeline-scale", pipeline_scale},
      {"structural-semantics", structural_semantics},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto started = Clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failed += !v.ok();
    std::printf("%s %s (%.2fs): %s\n", v.ok() ? "PASS" : "FAIL", c.name,
                seconds_since(started), v.detail().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
