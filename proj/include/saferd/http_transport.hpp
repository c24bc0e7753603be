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
#ifndef SAFERD_HTTP_TRANSPORT_HPP
#define SAFERD_HTTP_TRANSPORT_HPP

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "saferd/wire.hpp"

namespace saferd {

/// Splits "host:port"; throws Error on a missing or invalid port.
[[nodiscard]] std::pair<std::string, int> split_address(const std::string& addr);

/// HTTP client carrier: one connection per exchange. An exchange that fails
/// early (refused connection, reset) still costs the whole budget, so the
/// failure detector always reads "no answer within the timeout".
class HttpChannel final : public wire::RawChannel {
 public:
  std::optional<wire::RawResponse> exchange(const std::string& addr, const std::string& method,
                                            const std::string& path, const std::string& body,
                                            int timeout_ms, const std::string& source) override;
};

/// Serves one node's wire API over HTTP on a background thread. A
/// terminated node keeps its listener: handlers stall one second past the
/// peer budget and answer 503, so peers experience a timeout rather than an
/// instant refusal, and the revive command still lands.
class HttpNodeServer final {
 public:
  /// stall_ms: how long a silenced handler holds the request before 503.
  HttpNodeServer(wire::NodeService& service, const std::string& addr, int stall_ms);
  ~HttpNodeServer();
  HttpNodeServer(const HttpNodeServer&) = delete;
  HttpNodeServer& operator=(const HttpNodeServer&) = delete;

  /// Binds and serves; throws HarnessError when the address cannot be bound.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace saferd

#endif  // SAFERD_HTTP_TRANSPORT_HPP
