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


#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "httplib.h"
#include "oracles.h"
#include "pathlens/http_server.h"
#include "pathlens/kernels.h"
#include "pathlens/service.h"
#include "pathlens/synth_gen.h"
#include "test_support.h"

namespace pathlens {
namespace {

using nlohmann::json;

const char* kRoot = "gateway:request";
const char* kTarget = "gateway:request/svc2:op2/svc2-1:op2-1";

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir();
    TopologySpec topo = balanced_topology(3, 3, LatencyModel::lognormal(1000, 0.1));
    InjectionSpec inj{PathKey::parse(kTarget), 0.1, 6000, true};
    batch_ = new GeneratedBatch(generate(topo, 1500, {&inj, 1}, 404));
    TopologySpec other = balanced_topology(1, 1, LatencyModel::constant(500));
    other.root.rpc = RpcName("billing", "invoice");
    other.start_time += 10'000'000'000;
    GeneratedBatch billing = generate(other, 40, {}, 405);
    {
      TraceStore store = TraceStore::open(dir_->path() / "store");
      preprocess_traces(batch_->traces, store);
      preprocess_traces(billing.traces, store);
    }
    service_ = new AnalysisService(StoreReader::open(dir_->path() / "store"));
    corpus_ = new testing::Corpus(testing::extract_all(batch_->traces));
  }
  static void TearDownTestSuite() {
    delete service_;
    delete corpus_;
    delete batch_;
    delete dir_;
  }

  static AnalysisScope scope(AttributeKind attr = AttributeKind::kExecutionTime) {
    return AnalysisScope{RpcName::parse(kRoot), kMinTime, kMaxTime, attr};
  }
  // Lower bound of the slowest 10% of requests.
  static Micros slow_lo() {
    std::vector<double> e2e;
    for (const Trace& t : batch_->traces) e2e.push_back(static_cast<double>(t.response_time()));
    return static_cast<Micros>(oracle::percentile(e2e, 90.0));
  }

  static testing::TempDir* dir_;
  static GeneratedBatch* batch_;
  static testing::Corpus* corpus_;
  static AnalysisService* service_;
};

testing::TempDir* ServiceTest::dir_ = nullptr;
GeneratedBatch* ServiceTest::batch_ = nullptr;
testing::Corpus* ServiceTest::corpus_ = nullptr;
AnalysisService* ServiceTest::service_ = nullptr;

TEST(ParseTime, Forms) {
  EXPECT_EQ(parse_time("1704067200000000"), 1704067200000000);
  EXPECT_EQ(parse_time("-5"), -5);
  EXPECT_EQ(parse_time("2024-01-01T00:00:00Z"), 1704067200000000);
  EXPECT_EQ(parse_time("2024-01-01T01:00:00.25+01:00"), 1704067200250000);
  EXPECT_EQ(parse_time("2023-12-31T23:30:00-00:30"), 1704067200000000);
  EXPECT_EQ(parse_time("2024-01-01T00:00:00.000001Z"), 1704067200000001);
  for (const char* bad : {"", "yesterday", "2024-01-01", "2024-13-01T00:00:00Z",
                          "2024-01-01T00:00:00", "12abc"}) {
    EXPECT_THROW(parse_time(bad), Error) << bad;
  }
}

TEST_F(ServiceTest, RootsAndQuery) {
  json all = service_->roots(kMinTime, kMaxTime, "");
  ASSERT_EQ(all["roots"].size(), 2u);
  std::map<std::string, int> counts;
  for (const json& r : all["roots"]) counts[r["root"]] = r["count"];
  EXPECT_EQ(counts["gateway:request"], 1500);
  EXPECT_EQ(counts["billing:invoice"], 40);
  json filtered = service_->roots(kMinTime, kMaxTime, "BILL");
  ASSERT_EQ(filtered["roots"].size(), 1u);
  EXPECT_EQ(filtered["roots"][0]["root"], "billing:invoice");
  EXPECT_EQ(filtered["q"], "BILL");
  EXPECT_TRUE(service_->roots(kMinTime, kMaxTime, "zzz")["roots"].empty());
  EXPECT_THROW(service_->roots(5, 4, ""), Error);
}

TEST_F(ServiceTest, TreeEqualsComposition) {
  for (AttributeKind attr : {AttributeKind::kExecutionTime, AttributeKind::kFrequency}) {
    json payload = service_->tree(scope(attr));
    ASSERT_EQ(payload["status"], "ok");
    EXPECT_EQ(payload["request_count"], 1500);
    AggregatedTree tree = build_tree(corpus_->paths, corpus_->e2e);
    ASSERT_EQ(payload["nodes"].size(), tree.nodes().size());
    for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
      const TreeNode& node = tree.nodes()[i];
      const json& n = payload["nodes"][i];
      AttributeSample s = attribute_sample(node, attr);
      CvStat cv = coefficient_of_variation(s.values, false);
      EXPECT_EQ(n["path"], node.path.canonical());
      EXPECT_EQ(n["support"], node.support());
      EXPECT_EQ(n["cv"].get<double>(), cv.cv);
      EXPECT_EQ(n["color"], cv_color(cv.cv).hex());
      if (node.parent) {
        EXPECT_EQ(n["parent"], node.parent->canonical());
      } else {
        EXPECT_TRUE(n["parent"].is_null());
      }
    }
  }
}

TEST_F(ServiceTest, RepeatRequestsAreByteIdentical) {
  EXPECT_EQ(service_->tree(scope()).dump(), service_->tree(scope()).dump());
  const Micros lo = slow_lo();
  EXPECT_EQ(service_->backward_tree(scope(), lo, kMaxTime).dump(),
            service_->backward_tree(scope(), lo, kMaxTime).dump());
  AnalysisService fresh(StoreReader::open(dir_->path() / "store"), Execution::kSerial);
  EXPECT_EQ(fresh.tree(scope()).dump(), service_->tree(scope()).dump());
  EXPECT_EQ(fresh.node_clusters(scope(), PathKey::parse(kTarget)).dump(),
            service_->node_clusters(scope(), PathKey::parse(kTarget)).dump());
}

TEST_F(ServiceTest, UnknownRootHasNoData) {
  AnalysisScope s{RpcName("ghost", "op")};
  EXPECT_EQ(service_->tree(s)["status"], "no data");
  EXPECT_EQ(service_->histogram(s.root, kMinTime, kMaxTime)["status"], "no data");
  EXPECT_EQ(service_->backward_tree(s, 0, 10)["status"], "no data");
  EXPECT_EQ(service_->node_clusters(s, PathKey::parse("ghost:op"))["status"], "no data");
}

TEST_F(ServiceTest, TimeWindowRestrictsRequests) {
  std::vector<Micros> ts;
  for (const Trace& t : batch_->traces) ts.push_back(t.root_span().start_time);
  std::sort(ts.begin(), ts.end());
  AnalysisScope s = scope();
  s.t0 = ts[100];
  s.t1 = ts[599];
  json payload = service_->tree(s);
  EXPECT_EQ(payload["request_count"], 500);
  json hist = service_->histogram(s.root, s.t0, s.t1, 10);
  EXPECT_EQ(hist["histogram"]["total"], 500);
  json roots = service_->roots(s.t0, s.t1, "");
  ASSERT_EQ(roots["roots"].size(), 1u);
}

TEST_F(ServiceTest, HistogramMatchesResponseTimes) {
  json payload = service_->histogram(RpcName::parse(kRoot), kMinTime, kMaxTime, 25);
  std::vector<double> e2e;
  for (const Trace& t : batch_->traces) e2e.push_back(static_cast<double>(t.response_time()));
  Histogram h = make_histogram(e2e, 25);
  EXPECT_EQ(payload["histogram"]["counts"].get<std::vector<std::uint64_t>>(), h.counts);
  EXPECT_EQ(payload["histogram"]["edges"].get<std::vector<double>>(), h.edges);
}

TEST_F(ServiceTest, NodeClustersFindInjectedMode) {
  json payload = service_->node_clusters(scope(), PathKey::parse(kTarget));
  ASSERT_EQ(payload["status"], "ok");
  EXPECT_EQ(payload["k"], 2);
  EXPECT_TRUE(payload["distinct_behaviors"].get<bool>());
  const auto e2e_counts = payload["e2e_histogram"]["counts"].get<std::vector<std::uint64_t>>();
  double share = 0.0;
  std::size_t members = 0;
  for (const json& c : payload["clusters"]) {
    share += c["share"].get<double>();
    members += c["count"].get<std::size_t>();
    auto mask = c["highlight"].get<std::vector<std::uint64_t>>();
    EXPECT_EQ(std::accumulate(mask.begin(), mask.end(), std::uint64_t{0}), c["count"]);
    EXPECT_EQ(c["member_trace_ids"].size(), c["count"]);
    for (std::size_t b = 0; b < mask.size(); ++b) EXPECT_LE(mask[b], e2e_counts[b]);
  }
  EXPECT_NEAR(share, 1.0, 1e-9);
  EXPECT_EQ(members, payload["n_used"]);

  // Slow cluster members are exactly the requests the injection hit (after p99 trim).
  std::set<std::string> fired;
  for (std::size_t i = 0; i < batch_->traces.size(); ++i) {
    if (batch_->fired[i][0]) fired.insert(batch_->traces[i].trace_id());
  }
  for (const json& id : payload["clusters"][1]["member_trace_ids"]) {
    EXPECT_EQ(fired.count(id.get<std::string>()), 1u);
  }
  EXPECT_THROW(service_->node_clusters(scope(), PathKey::parse("gateway:request/x:y")), Error);
}

TEST_F(ServiceTest, RootFrequencyIsSingleCluster) {
  json payload =
      service_->node_clusters(scope(AttributeKind::kFrequency), PathKey::parse(kRoot));
  EXPECT_EQ(payload["k"], 1);
  EXPECT_FALSE(payload["distinct_behaviors"].get<bool>());
  EXPECT_TRUE(payload["silhouette"].is_null());
  ASSERT_EQ(payload["clusters"].size(), 1u);
  EXPECT_EQ(payload["clusters"][0]["lo"], 1.0);
  EXPECT_EQ(payload["clusters"][0]["hi"], 1.0);
  EXPECT_EQ(payload["clusters"][0]["share"], 1.0);
}

TEST_F(ServiceTest, BackwardViewRanksInjectedNode) {
  json payload = service_->backward_tree(scope(), slow_lo(), kMaxTime);
  ASSERT_EQ(payload["status"], "ok");
  json forward = service_->tree(scope());
  ASSERT_EQ(payload["nodes"].size(), forward["nodes"].size());
  std::string best;
  double best_kl = -1.0;
  for (std::size_t i = 0; i < payload["nodes"].size(); ++i) {
    const json& n = payload["nodes"][i];
    EXPECT_EQ(n["path"], forward["nodes"][i]["path"]);
    EXPECT_EQ(n["n_selected"].get<std::size_t>() + n["n_other"].get<std::size_t>(),
              forward["nodes"][i]["n_used"].get<std::size_t>());
    const std::string path = n["path"];
    // Ancestors of the target inherit its delay, so compare off the chain.
    if (PathKey::parse(path).is_proper_prefix_of(PathKey::parse(kTarget))) continue;
    if (n["kl"].get<double>() > best_kl) {
      best_kl = n["kl"].get<double>();
      best = path;
    }
  }
  EXPECT_EQ(best, kTarget);
  EXPECT_EQ(payload["n_selected"].get<std::size_t>() + payload["n_other"].get<std::size_t>(),
            1500u);
}

TEST_F(ServiceTest, FullRangeIsInsufficient) {
  json payload = service_->backward_tree(scope(), kMinTime, kMaxTime);
  EXPECT_EQ(payload["status"], "insufficient-data");
  EXPECT_EQ(payload["n_other"], 0);
  for (const json& n : payload["nodes"]) {
    EXPECT_TRUE(n["kl"].is_null());
    EXPECT_EQ(n["color"], kNeutralGrey.hex());
    EXPECT_EQ(n["status"], "insufficient-data");
  }
  json detail = service_->backward_node(scope(), PathKey::parse(kTarget), kMinTime, kMaxTime);
  EXPECT_EQ(detail["status"], "insufficient-data");
  EXPECT_THROW(service_->backward_tree(scope(), 10, 5), Error);
}

TEST_F(ServiceTest, BackwardDetailSharesEdges) {
  const Micros lo = slow_lo();
  json tree = service_->backward_tree(scope(), lo, kMaxTime);
  for (const json& n : tree["nodes"]) {
    json d = service_->backward_node(scope(), PathKey::parse(n["path"].get<std::string>()), lo,
                                     kMaxTime);
    auto edges = d["edges"].get<std::vector<double>>();
    auto sel = d["selected"].get<std::vector<std::uint64_t>>();
    auto oth = d["other"].get<std::vector<std::uint64_t>>();
    ASSERT_EQ(edges.size(), kDefaultHistogramBins + 1);
    EXPECT_EQ(sel.size(), kDefaultHistogramBins);
    EXPECT_EQ(oth.size(), kDefaultHistogramBins);
    EXPECT_TRUE(std::is_sorted(edges.begin(), edges.end()));
    EXPECT_EQ(std::accumulate(sel.begin(), sel.end(), std::uint64_t{0}), d["n_selected"]);
    EXPECT_EQ(std::accumulate(oth.begin(), oth.end(), std::uint64_t{0}), d["n_other"]);
    EXPECT_EQ(d["n_selected"], n["n_selected"]);
    EXPECT_EQ(d["kl"], n["kl"]);
    EXPECT_EQ(d["color"], n["color"]);
  }
}

class HttpTest : public ServiceTest {
 protected:
  static void SetUpTestSuite() {
    ServiceTest::SetUpTestSuite();
    shared_ = std::make_shared<AnalysisService>(StoreReader::open(dir_->path() / "store"));
    server_ = new HttpServer(shared_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
  }
  static void TearDownTestSuite() {
    server_->stop();
    delete server_;
    shared_.reset();
    ServiceTest::TearDownTestSuite();
  }
  static httplib::Result get(const std::string& target) {
    httplib::Client client("127.0.0.1", port_);
    client.set_read_timeout(30, 0);
    return client.Get(target);
  }
  static inline std::shared_ptr<AnalysisService> shared_;
  static inline HttpServer* server_ = nullptr;
  static inline int port_ = 0;
};

TEST_F(HttpTest, EndpointsMirrorService) {
  auto res = get("/api/roots?q=gate");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(res->body, service_->roots(kMinTime, kMaxTime, "gate").dump());

  res = get(std::string("/api/tree?root=") + kRoot);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, service_->tree(scope()).dump());

  res = get(std::string("/api/tree?root=") + kRoot + "&attr=frequency");
  EXPECT_EQ(res->body, service_->tree(scope(AttributeKind::kFrequency)).dump());

  res = get(std::string("/api/histogram?root=") + kRoot + "&bins=7");
  EXPECT_EQ(res->body,
            service_->histogram(RpcName::parse(kRoot), kMinTime, kMaxTime, 7).dump());

  res = get(std::string("/api/node/clusters?root=") + kRoot + "&path=" + kTarget);
  EXPECT_EQ(res->body, service_->node_clusters(scope(), PathKey::parse(kTarget)).dump());

  const std::string lo = std::to_string(slow_lo());
  res = get(std::string("/api/backward/tree?root=") + kRoot + "&lo=" + lo + "&hi=99999999");
  EXPECT_EQ(res->body, service_->backward_tree(scope(), slow_lo(), 99999999).dump());

  res = get(std::string("/api/backward/node?root=") + kRoot + "&path=" + kTarget + "&lo=" + lo +
            "&hi=99999999");
  EXPECT_EQ(res->body,
            service_->backward_node(scope(), PathKey::parse(kTarget), slow_lo(), 99999999).dump());

  res = get(std::string("/api/tree?root=") + kRoot + "&from=2024-01-01T00:00:00Z&to=" +
            std::to_string(kMaxTime));
  EXPECT_EQ(json::parse(res->body)["request_count"], 1500);
}

TEST_F(HttpTest, ErrorStatuses) {
  struct Case {
    std::string target;
    int status;
  };
  const std::string r = std::string("root=") + kRoot;
  const Case cases[] = {
      {"/api/tree", 400},
      {"/api/tree?root=nocolon", 400},
      {"/api/tree?" + r + "&attr=bogus", 400},
      {"/api/tree?" + r + "&from=tomorrow", 400},
      {"/api/tree?" + r + "&from=10&to=5", 400},
      {"/api/histogram?" + r + "&bins=0", 400},
      {"/api/histogram?" + r + "&bins=10001", 400},
      {"/api/histogram?" + r + "&bins=abc", 400},
      {"/api/node/clusters?" + r, 400},
      {"/api/node/clusters?" + r + "&path=gateway:request/nope:x", 404},
      {"/api/backward/tree?" + r + "&lo=5", 400},
      {"/api/backward/tree?" + r + "&lo=5&hi=4", 400},
      {"/api/backward/node?" + r + "&path=gateway:request/nope:x&lo=1&hi=2", 404},
      {"/api/tree?root=ghost:op", 200},
  };
  for (const Case& c : cases) {
    auto res = get(c.target);
    ASSERT_TRUE(res) << c.target;
    EXPECT_EQ(res->status, c.status) << c.target << " " << res->body;
    json body = json::parse(res->body);
    if (c.status != 200) {
      EXPECT_TRUE(body.contains("error")) << c.target;
      EXPECT_TRUE(body.contains("kind")) << c.target;
    }
  }
  EXPECT_EQ(json::parse(get("/api/tree?root=ghost:op")->body)["status"], "no data");
  EXPECT_EQ(get("/api/unknown")->status, 404);
}

TEST_F(HttpTest, BusyPortFailsToBind) {
  HttpServer second(shared_);
  try {
    second.bind("127.0.0.1", port_);
    FAIL() << "bound a busy port";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST_F(HttpTest, ConcurrentClientsSeeSamePayload) {
  const std::string expected = service_->tree(scope()).dump();
  std::vector<std::thread> threads;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 5; ++i) {
        auto res = get(std::string("/api/tree?root=") + kRoot);
        if (!res || res->body != expected) ++mismatches;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(mismatches.load(), 0);
}

}  // namespace
}  // namespace pathlens
