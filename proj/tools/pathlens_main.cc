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

// pathlens: preprocess, serve, report, generate and inspect.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

#include <algorithm>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pathlens/http_server.h"
#include "pathlens/path_extractor.h"
#include "pathlens/service.h"
#include "pathlens/synth_gen.h"
#include "pathlens/trace_store.h"

namespace {

using namespace pathlens;
using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitIo = 3;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return kExitUsage;
    case ErrorKind::kIo:
    case ErrorKind::kVersionMismatch: return kExitIo;
    default: return kExitData;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path);
  out << text;
  if (!out.flush()) throw Error(ErrorKind::kIo, "cannot write " + path);
}

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// ---- preprocess ----

struct PreprocessArgs {
  std::vector<std::string> inputs;
  std::string store;
  bool serial = false;
};

int cmd_preprocess(const PreprocessArgs& a) {
  std::vector<std::filesystem::path> files(a.inputs.begin(), a.inputs.end());
  TraceStore store = TraceStore::open(a.store);
  PreprocessSummary s = preprocess_batch(
      files, store, a.serial ? Execution::kSerial : Execution::kParallel);
  std::cout << summary_to_json(s) << "\n";
  return 0;
}

// ---- serve ----

HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string store;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a) {
  auto service = std::make_shared<AnalysisService>(StoreReader::open(a.store));
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  std::cerr << "pathlens: serving " << a.store << " on http://" << a.host << ":"
            << port << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return 0;
}

// ---- report ----

struct ReportArgs {
  std::string store;
  std::string root;
  std::string from, to;
  std::string attr = "execution-time";
  std::string path;
  std::string lo, hi;
  std::string format = "text";
};

void print_tree_text(const json& p) {
  std::cout << "root " << p["root"].get<std::string>() << "  attr "
            << p["attr"].get<std::string>() << "  requests "
            << p["request_count"] << "\n";
  std::vector<const json*> nodes;
  for (const json& n : p["nodes"]) nodes.push_back(&n);
  std::stable_sort(nodes.begin(), nodes.end(), [](const json* a, const json* b) {
    return (*a)["cv"].get<double>() > (*b)["cv"].get<double>();
  });
  std::cout << "cv        support  color    path\n";
  for (const json* n : nodes) {
    std::cout << fmt((*n)["cv"].get<double>()) << "    " << (*n)["support"] << "  "
              << (*n)["color"].get<std::string>() << "  "
              << (*n)["path"].get<std::string>() << "\n";
  }
}

void print_clusters_text(const json& p) {
  std::cout << "path " << p["path"].get<std::string>() << "  attr "
            << p["attr"].get<std::string>() << "\n";
  std::cout << "support " << p["support"] << "  used " << p["n_used"]
            << "  filtered " << p["n_filtered"] << "\n";
  if (!p["distinct_behaviors"].get<bool>()) {
    std::cout << "k=1: no distinct behaviors\n";
  } else {
    std::cout << "k=" << p["k"] << "  silhouette "
              << fmt(p["silhouette"].get<double>()) << "\n";
  }
  const auto& edges = p["e2e_histogram"]["edges"];
  for (const json& c : p["clusters"]) {
    std::cout << "cluster " << c["index"] << ": [" << fmt(c["lo"].get<double>(), 1)
              << ", " << fmt(c["hi"].get<double>(), 1) << "]  count " << c["count"]
              << "  share " << fmt(c["share"].get<double>()) << "\n";
    const auto& h = c["highlight"];
    std::size_t first = h.size(), last = 0, peak = 0;
    for (std::size_t b = 0; b < h.size(); ++b) {
      if (h[b].get<std::uint64_t>() == 0) continue;
      first = std::min(first, b);
      last = b;
      if (h[b].get<std::uint64_t>() > h[peak].get<std::uint64_t>()) peak = b;
    }
    if (first < h.size()) {
      std::cout << "  e2e highlight: bins " << first << ".." << last << " ("
                << fmt(edges[first].get<double>(), 0) << " to "
                << fmt(edges[last + 1].get<double>(), 0) << " us), peak bin "
                << peak << "\n";
    }
  }
}

void print_backward_text(const json& p) {
  std::cout << "root " << p["root"].get<std::string>() << "  attr "
            << p["attr"].get<std::string>() << "  selection [" << p["lo"] << ", "
            << p["hi"] << "]  selected " << p["n_selected"] << "  other "
            << p["n_other"] << "\n";
  std::vector<const json*> nodes;
  for (const json& n : p["nodes"]) nodes.push_back(&n);
  std::stable_sort(nodes.begin(), nodes.end(), [](const json* a, const json* b) {
    const json& ka = (*a)["kl"];
    const json& kb = (*b)["kl"];
    if (ka.is_null() != kb.is_null()) return kb.is_null();
    return !ka.is_null() && ka.get<double>() > kb.get<double>();
  });
  std::cout << "rank  kl        status             path\n";
  std::size_t rank = 1;
  for (const json* n : nodes) {
    const json& kl = (*n)["kl"];
    std::string status = (*n)["status"].get<std::string>();
    status.resize(std::max<std::size_t>(status.size(), 17), ' ');
    std::cout << rank++ << "     " << (kl.is_null() ? std::string("-       ") : fmt(kl.get<double>()))
              << "    " << status << "  " << (*n)["path"].get<std::string>() << "\n";
  }
}

void print_backward_node_text(const json& p) {
  std::cout << "path " << p["path"].get<std::string>() << "  status "
            << p["status"].get<std::string>() << "  kl "
            << (p["kl"].is_null() ? std::string("-") : fmt(p["kl"].get<double>()))
            << "  selected " << p["n_selected"] << "  other " << p["n_other"] << "\n";
  const auto& edges = p["edges"];
  for (std::size_t b = 0; b < p["selected"].size(); ++b) {
    const auto s = p["selected"][b].get<std::uint64_t>();
    const auto o = p["other"][b].get<std::uint64_t>();
    if (s == 0 && o == 0) continue;
    std::cout << "  [" << fmt(edges[b].get<double>(), 1) << ", "
              << fmt(edges[b + 1].get<double>(), 1) << ")  selected " << s
              << "  other " << o << "\n";
  }
}

int cmd_report(const ReportArgs& a) {
  const bool backward = !a.lo.empty() || !a.hi.empty();
  if (backward && (a.lo.empty() || a.hi.empty())) {
    throw Error(ErrorKind::kInvalidArgument, "--lo and --hi go together");
  }
  if (a.format != "text" && a.format != "json") {
    throw Error(ErrorKind::kInvalidArgument, "--format must be text or json");
  }
  AnalysisService service(StoreReader::open(a.store));
  AnalysisScope scope{RpcName::parse(a.root)};
  if (!a.from.empty()) scope.t0 = parse_time(a.from);
  if (!a.to.empty()) scope.t1 = parse_time(a.to);
  scope.attr = parse_attribute_kind(a.attr);

  json payload;
  void (*printer)(const json&) = nullptr;
  if (backward && !a.path.empty()) {
    payload = service.backward_node(scope, PathKey::parse(a.path),
                                    parse_time(a.lo), parse_time(a.hi));
    printer = print_backward_node_text;
  } else if (backward) {
    payload = service.backward_tree(scope, parse_time(a.lo), parse_time(a.hi));
    printer = print_backward_text;
  } else if (!a.path.empty()) {
    payload = service.node_clusters(scope, PathKey::parse(a.path));
    printer = print_clusters_text;
  } else {
    payload = service.tree(scope);
    printer = print_tree_text;
  }
  const std::string status = payload["status"].get<std::string>();
  if (a.format == "json") {
    std::cout << payload.dump() << "\n";
  } else if (status == "ok") {
    printer(payload);
  }
  if (status != "ok") {
    std::cerr << "pathlens: " << status << "\n";
    return kExitData;
  }
  return 0;
}

// ---- generate ----

struct GenerateArgs {
  std::string topology;
  std::string injections;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  std::string truth;
};

int cmd_generate(const GenerateArgs& a) {
  TopologySpec topo = topology_from_json(read_file(a.topology));
  InjectionFile inj;
  if (!a.injections.empty()) inj = injections_from_json(read_file(a.injections), topo);
  if (inj.multimode && !inj.injections.empty()) {
    throw Error(ErrorKind::kSpec, "multimode and delay injections cannot be combined");
  }
  GeneratedBatch batch = inj.multimode
                             ? generate_multimode(topo, *inj.multimode, a.n, a.seed)
                             : generate(topo, a.n, inj.injections, a.seed);
  write_file(a.out, serialize_trace_batch(batch.traces));
  if (!a.truth.empty()) {
    json specs = json::array();
    for (const InjectionSpec& s : inj.injections) {
      specs.push_back({{"target", s.target.canonical()},
                       {"fraction", s.fraction},
                       {"delay_us", s.delay},
                       {"propagate", s.propagate}});
    }
    json traces = json::array();
    for (std::size_t i = 0; i < batch.traces.size(); ++i) {
      json t = {{"trace_id", batch.traces[i].trace_id()},
                {"response_time", batch.traces[i].response_time()},
                {"fired", batch.fired[i]}};
      if (!batch.levels.empty()) t["level"] = batch.levels[i];
      traces.push_back(std::move(t));
    }
    json truth = {{"seed", a.seed},
                  {"n", a.n},
                  {"baseline_e2e_mean_us", baseline_e2e_mean(topo)},
                  {"injections", std::move(specs)},
                  {"traces", std::move(traces)}};
    write_file(a.truth, truth.dump(2) + "\n");
  }
  std::cerr << "pathlens: wrote " << batch.traces.size() << " traces to " << a.out << "\n";
  return 0;
}

// ---- store ----

int cmd_store_inspect(const std::string& dir) {
  std::cout << inspect_store(dir);
  return 0;
}

int cmd_store_verify(const std::string& dir) {
  std::string problem = StoreReader::open(dir).verify();
  if (!problem.empty()) {
    std::cerr << "pathlens: store inconsistent: " << problem << "\n";
    return kExitData;
  }
  std::cout << "ok\n";
  return 0;
}

int cmd_store_compact(const std::string& dir) {
  TraceStore store = TraceStore::open(dir, /*create=*/false);
  store.compact();
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pathlens: execution-path analytics over distributed traces"};
  app.require_subcommand(1);
  std::function<int()> action;

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Extract paths from trace files into a store");
  c_pre->add_option("--input,-i", pre.inputs, "Trace export files")->required();
  c_pre->add_option("--store,-s", pre.store, "Store directory")->required();
  c_pre->add_flag("--serial", pre.serial, "Disable parallel extraction");
  c_pre->callback([&] { action = [&] { return cmd_preprocess(pre); }; });

  ServeArgs srv;
  auto* c_srv = app.add_subcommand("serve", "Serve the dashboard API");
  c_srv->add_option("--store,-s", srv.store, "Store directory")->required();
  c_srv->add_option("--host", srv.host, "Bind address")->capture_default_str();
  c_srv->add_option("--port,-p", srv.port, "Port (0 picks a free one)")
      ->capture_default_str()
      ->check(CLI::Range(0, 65535));
  c_srv->callback([&] { action = [&] { return cmd_serve(srv); }; });

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Headless forward or backward analysis");
  c_rep->add_option("--store,-s", rep.store, "Store directory")->required();
  c_rep->add_option("--root,-r", rep.root, "Root RPC, service:operation")->required();
  c_rep->add_option("--from", rep.from, "Start time, us or RFC 3339");
  c_rep->add_option("--to", rep.to, "End time, us or RFC 3339");
  c_rep->add_option("--attr", rep.attr, "execution-time or frequency")->capture_default_str();
  c_rep->add_option("--path", rep.path, "Node path for cluster or divergence detail");
  c_rep->add_option("--lo", rep.lo, "Backward selection lower E2E bound (us)");
  c_rep->add_option("--hi", rep.hi, "Backward selection upper E2E bound (us)");
  c_rep->add_option("--format", rep.format, "text or json")->capture_default_str();
  c_rep->callback([&] { action = [&] { return cmd_report(rep); }; });

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Generate a synthetic trace corpus");
  c_gen->add_option("--topology,-t", gen.topology, "Topology JSON file")->required();
  c_gen->add_option("--injections", gen.injections, "Injection JSON file");
  c_gen->add_option("--n,-n", gen.n, "Number of traces")->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "RNG seed")->capture_default_str();
  c_gen->add_option("--out,-o", gen.out, "Output trace file")->required();
  c_gen->add_option("--truth", gen.truth, "Write ground truth JSON here");
  c_gen->callback([&] { action = [&] { return cmd_generate(gen); }; });

  std::string store_dir;
  auto* c_store = app.add_subcommand("store", "Store maintenance");
  c_store->require_subcommand(1);
  auto* c_inspect = c_store->add_subcommand("inspect", "Print the manifest");
  c_inspect->add_option("dir", store_dir, "Store directory")->required();
  c_inspect->callback([&] { action = [&] { return cmd_store_inspect(store_dir); }; });
  auto* c_verify = c_store->add_subcommand("verify", "Check files against the manifest");
  c_verify->add_option("dir", store_dir, "Store directory")->required();
  c_verify->callback([&] { action = [&] { return cmd_store_verify(store_dir); }; });
  auto* c_compact = c_store->add_subcommand("compact", "Rewrite segments in sorted order");
  c_compact->add_option("dir", store_dir, "Store directory")->required();
  c_compact->callback([&] { action = [&] { return cmd_store_compact(store_dir); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "pathlens: parse error at byte offset " << e.byte_offset() << ": "
              << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    std::cerr << "pathlens: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "pathlens: " << e.what() << "\n";
    return kExitIo;
  }
}
