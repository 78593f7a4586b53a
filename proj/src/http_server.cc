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

#include "pathlens/http_server.h"

#include <sys/socket.h>

#include <charconv>
#include <functional>

#include "httplib.h"

namespace pathlens {

using nlohmann::json;

namespace {

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

std::string require(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v || v->empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                std::string("missing query parameter '") + name + "'");
  }
  return *v;
}

Micros time_param(const httplib::Request& req, const char* name, Micros fallback) {
  auto v = param(req, name);
  return v && !v->empty() ? parse_time(*v) : fallback;
}

AnalysisScope scope_of(const httplib::Request& req) {
  AnalysisScope scope{RpcName::parse(require(req, "root"))};
  scope.t0 = time_param(req, "from", kMinTime);
  scope.t1 = time_param(req, "to", kMaxTime);
  if (auto a = param(req, "attr"); a && !a->empty()) {
    scope.attr = parse_attribute_kind(*a);
  }
  return scope;
}

std::size_t bins_param(const httplib::Request& req) {
  auto v = param(req, "bins");
  if (!v || v->empty()) return kDefaultHistogramBins;
  std::size_t bins = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), bins);
  if (ec != std::errc() || ptr != v->data() + v->size() || bins < 1 || bins > 10000) {
    throw Error(ErrorKind::kInvalidArgument, "bins must be an integer in [1, 10000]");
  }
  return bins;
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kParse:
      return 400;
    case ErrorKind::kNotFound:
      return 404;
    default:
      return 500;
  }
}

using Handler = std::function<json(const httplib::Request&)>;

httplib::Server::Handler wrap(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req,
                                        httplib::Response& res) {
    json body;
    try {
      body = handler(req);
      res.status = 200;
    } catch (const Error& e) {
      res.status = status_for(e.kind());
      body = {{"error", e.what()}, {"kind", to_string(e.kind())}};
    } catch (const std::exception& e) {
      res.status = 500;
      body = {{"error", e.what()}, {"kind", "internal"}};
    }
    res.set_content(body.dump(), "application/json");
  };
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<const AnalysisService> service)
    : service_(std::move(service)), server_(std::make_unique<httplib::Server>()) {
  // SO_REUSEADDR only: a second server on a busy port must fail to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  const AnalysisService* svc = service_.get();
  server_->Get("/api/roots", wrap([svc](const httplib::Request& req) {
    return svc->roots(time_param(req, "from", kMinTime), time_param(req, "to", kMaxTime),
                      param(req, "q").value_or(""));
  }));
  server_->Get("/api/tree", wrap([svc](const httplib::Request& req) {
    return svc->tree(scope_of(req));
  }));
  server_->Get("/api/histogram", wrap([svc](const httplib::Request& req) {
    return svc->histogram(RpcName::parse(require(req, "root")),
                          time_param(req, "from", kMinTime),
                          time_param(req, "to", kMaxTime), bins_param(req));
  }));
  server_->Get("/api/node/clusters", wrap([svc](const httplib::Request& req) {
    AnalysisScope scope = scope_of(req);
    return svc->node_clusters(scope, PathKey::parse(require(req, "path")));
  }));
  server_->Get("/api/backward/tree", wrap([svc](const httplib::Request& req) {
    AnalysisScope scope = scope_of(req);
    return svc->backward_tree(scope, parse_time(require(req, "lo")),
                              parse_time(require(req, "hi")));
  }));
  server_->Get("/api/backward/node", wrap([svc](const httplib::Request& req) {
    AnalysisScope scope = scope_of(req);
    return svc->backward_node(scope, PathKey::parse(require(req, "path")),
                              parse_time(require(req, "lo")),
                              parse_time(require(req, "hi")));
  }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ < 0) {
    throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port_;
}

void HttpServer::run() {
  if (port_ < 0) throw Error(ErrorKind::kInvalidArgument, "server is not bound");
  server_->listen_after_bind();
}

void HttpServer::start() {
  if (port_ < 0) throw Error(ErrorKind::kInvalidArgument, "server is not bound");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace pathlens
