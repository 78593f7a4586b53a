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

#pragma once

#include <memory>
#include <string>
#include <thread>

#include "pathlens/service.h"

namespace httplib {
class Server;
}

namespace pathlens {

// Read-only JSON API over an AnalysisService. Bad parameters answer 400,
// unknown paths 404.
class HttpServer {
 public:
  explicit HttpServer(std::shared_ptr<const AnalysisService> service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws Error(kIo) when
  // the address cannot be bound.
  int bind(const std::string& host, int port);

  // Serves until stop(). bind() first.
  void run();
  // run() on a background thread.
  void start();
  void stop();

  int port() const noexcept { return port_; }

 private:
  std::shared_ptr<const AnalysisService> service_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace pathlens
