/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#include "saferd/http_transport.hpp"

#include <charconv>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "saferd/errors.hpp"

namespace saferd {

std::pair<std::string, int> split_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= addr.size()) {
    throw Error("address must be host:port, got '" + addr + "'");
  }
  int port = 0;
  const char* begin = addr.data() + colon + 1;
  const char* end = addr.data() + addr.size();
  const auto result = std::from_chars(begin, end, port);
  if (result.ec != std::errc{} || result.ptr != end || port <= 0 || port > 65535) {
    throw Error("bad port in address '" + addr + "'");
  }
  return {addr.substr(0, colon), port};
}

std::optional<wire::RawResponse> HttpChannel::exchange(const std::string& addr,
                                                       const std::string& method,
                                                       const std::string& path,
                                                       const std::string& body, int timeout_ms,
                                                       const std::string& source) {
  const auto start = std::chrono::steady_clock::now();
  const auto [host, port] = split_address(addr);
  const auto budget = std::chrono::milliseconds(timeout_ms);

  httplib::Client client(host, port);
  client.set_connection_timeout(budget);
  client.set_read_timeout(budget);
  client.set_write_timeout(budget);
  const httplib::Headers headers{{"X-Saferd-Source", source}};

  const httplib::Result result = method == "GET"
                                     ? client.Get(path, headers)
                                     : client.Post(path, headers, body, "application/json");
  if (result) {
    return wire::RawResponse{result->status, result->body};
  }
  // An early failure still costs the whole budget: the detector's contract
  // is "no answer within the timeout", never "refused instantly".
  std::this_thread::sleep_until(start + budget);
  return std::nullopt;
}

struct HttpNodeServer::Impl {
  Impl(wire::NodeService& service_in, std::string host_in, int port_in, int stall_in)
      : service(service_in), host(std::move(host_in)), port(port_in), stall_ms(stall_in) {}

  void handle(const httplib::Request& req, httplib::Response& res, const char* method) {
    if (wire::silenced(service, req.path)) {
      std::this_thread::sleep_for(std::chrono::milliseconds(stall_ms));
      res.status = 503;
      res.set_content("terminated", "text/plain");
      return;
    }
    std::string source = req.get_header_value("X-Saferd-Source");
    if (source.empty()) {
      source = req.remote_addr;
    }
    const wire::RawResponse out = wire::dispatch(service, method, req.path, req.body, source);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  }

  wire::NodeService& service;
  std::string host;
  int port;
  int stall_ms;
  httplib::Server server;
  std::thread thread;
};

HttpNodeServer::HttpNodeServer(wire::NodeService& service, const std::string& addr, int stall_ms) {
  const auto [host, port] = split_address(addr);
  impl_ = std::make_unique<Impl>(service, host, port, stall_ms);
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(16); };
  // SO_REUSEADDR only: the library default adds SO_REUSEPORT where
  // available, which would let two nodes share one address silently
  // instead of failing the second bind.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes),
                 sizeof(yes));
  });
  impl_->server.Get(R"(.*)", [impl = impl_.get()](const httplib::Request& req,
                                                  httplib::Response& res) {
    impl->handle(req, res, "GET");
  });
  impl_->server.Post(R"(.*)", [impl = impl_.get()](const httplib::Request& req,
                                                   httplib::Response& res) {
    impl->handle(req, res, "POST");
  });
}

HttpNodeServer::~HttpNodeServer() { stop(); }

void HttpNodeServer::start() {
  if (!impl_->server.bind_to_port(impl_->host, impl_->port)) {
    throw HarnessError("cannot bind " + impl_->host + ":" + std::to_string(impl_->port));
  }
  impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void HttpNodeServer::stop() {
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

}  // namespace saferd
