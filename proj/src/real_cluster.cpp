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
#include "saferd/real_cluster.hpp"

#include <algorithm>
#include <chrono>

#include "saferd/errors.hpp"

namespace saferd {

RealNodeRuntime::RealNodeRuntime(NodeConfig config, wire::RawChannel& channel, const Clock& clock,
                                 RecordSink* sink)
    : heartbeat_ms_(config.heartbeat_ms) {
  const std::string addr = config.topology->spec(config.id).address;
  const int stall_ms = config.timeout_ms + 1000;
  node_ = std::make_unique<Node>(std::move(config), channel, clock, sink);
  server_ = std::make_unique<HttpNodeServer>(*node_, addr, stall_ms);
}

RealNodeRuntime::~RealNodeRuntime() { stop(); }

void RealNodeRuntime::start_server() { server_->start(); }

void RealNodeRuntime::start_control() {
  control_ = std::thread([this] { control_loop(); });
}

void RealNodeRuntime::start() {
  start_server();
  start_control();
}

void RealNodeRuntime::stop() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  cv_.notify_all();
  if (control_.joinable()) {
    control_.join();
  }
  server_->stop();
}

void RealNodeRuntime::control_loop() {
  auto next = std::chrono::steady_clock::now();
  const auto interval = std::chrono::milliseconds(heartbeat_ms_);
  while (true) {
    {
      std::unique_lock lock(mutex_);
      cv_.wait_until(lock, next, [this] { return stop_; });
      if (stop_) {
        return;
      }
    }
    node_->run_cycle();
    next = std::max(next + interval, std::chrono::steady_clock::now());
  }
}

RealCluster::RealCluster(const ParsedConfig& config) : config_(config) {
  for (const NodeId id : config_.topology->ids()) {
    NodeConfig node_config = node_config_from(config_, id);
    heartbeat_ms_ = node_config.heartbeat_ms;
    timeout_ms_ = node_config.timeout_ms;
    runtimes_.emplace(id, std::make_unique<RealNodeRuntime>(std::move(node_config), channel_,
                                                            clock_, &sink_));
  }
}

RealCluster::~RealCluster() { stop(); }

void RealCluster::start() {
  try {
    for (auto& [id, runtime] : runtimes_) {
      runtime->start_server();
    }
  } catch (const HarnessError&) {
    stop();
    throw;
  }
  for (auto& [id, runtime] : runtimes_) {
    runtime->start_control();
  }
  started_ = true;
}

void RealCluster::stop() {
  for (auto& [id, runtime] : runtimes_) {
    runtime->stop();
  }
  started_ = false;
}

Node& RealCluster::node(NodeId id) {
  const auto it = runtimes_.find(id);
  if (it == runtimes_.end()) {
    throw UnknownSubsystemError("no node " + std::to_string(id));
  }
  return it->second->node();
}

}  // namespace saferd
