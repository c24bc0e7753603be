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
#ifndef SAFERD_REAL_CLUSTER_HPP
#define SAFERD_REAL_CLUSTER_HPP

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "saferd/config.hpp"
#include "saferd/http_transport.hpp"
#include "saferd/node.hpp"

namespace saferd {

/// One subsystem running for real: its HTTP server plus a fixed-rate
/// control thread (next cycle at max(previous due + heartbeat, now)).
class RealNodeRuntime final {
 public:
  /// The channel, clock and sink must outlive the runtime.
  RealNodeRuntime(NodeConfig config, wire::RawChannel& channel, const Clock& clock,
                  RecordSink* sink);
  ~RealNodeRuntime();
  RealNodeRuntime(const RealNodeRuntime&) = delete;
  RealNodeRuntime& operator=(const RealNodeRuntime&) = delete;

  /// Throws HarnessError when the node's address cannot be bound.
  void start_server();
  void start_control();
  void start();
  void stop();

  [[nodiscard]] Node& node() { return *node_; }

 private:
  void control_loop();

  std::unique_ptr<Node> node_;
  std::unique_ptr<HttpNodeServer> server_;
  std::thread control_;
  std::mutex mutex_;
  std::condition_variable cv_;
  bool stop_ = false;
  int heartbeat_ms_;
};

/// A whole cluster in this process over real HTTP loopback: every server is
/// up before any control loop starts, so a fresh cluster never begins in a
/// falsely degraded mode.
class RealCluster final {
 public:
  explicit RealCluster(const ParsedConfig& config);
  ~RealCluster();
  RealCluster(const RealCluster&) = delete;
  RealCluster& operator=(const RealCluster&) = delete;

  /// Binds every server, then starts every control loop. Throws
  /// HarnessError (after tearing down anything already started) when an
  /// address cannot be bound.
  void start();
  void stop();

  [[nodiscard]] const ParsedConfig& cluster_config() const { return config_; }
  [[nodiscard]] const Topology& topology() const { return *config_.topology; }
  [[nodiscard]] Node& node(NodeId id);
  [[nodiscard]] MemorySink& sink() { return sink_; }
  [[nodiscard]] const Clock& clock() const { return clock_; }
  [[nodiscard]] int heartbeat_ms() const { return heartbeat_ms_; }
  [[nodiscard]] int timeout_ms() const { return timeout_ms_; }

 private:
  ParsedConfig config_;
  SteadyClock clock_;
  HttpChannel channel_;
  MemorySink sink_;
  std::map<NodeId, std::unique_ptr<RealNodeRuntime>> runtimes_;
  int heartbeat_ms_ = 0;
  int timeout_ms_ = 0;
  bool started_ = false;
};

}  // namespace saferd

#endif  // SAFERD_REAL_CLUSTER_HPP
