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
#ifndef SAFERD_SIM_CLUSTER_HPP
#define SAFERD_SIM_CLUSTER_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "saferd/config.hpp"
#include "saferd/node.hpp"
#include "saferd/sim_transport.hpp"

namespace saferd {

/// A whole cluster on the simulated transport: one node per subsystem, all
/// attached to one SimNetwork, control cycles driven in virtual time at a
/// fixed rate. Ties in the schedule break by ascending node id, which makes
/// runs deterministic for a given seed.
class SimCluster final {
 public:
  SimCluster(const ParsedConfig& config, SimNetwork::Options options = {});

  [[nodiscard]] SimNetwork& network() { return network_; }
  [[nodiscard]] const ParsedConfig& cluster_config() const { return config_; }
  [[nodiscard]] const Topology& topology() const { return *config_.topology; }
  [[nodiscard]] Node& node(NodeId id);
  [[nodiscard]] MemorySink& sink() { return sink_; }
  [[nodiscard]] int heartbeat_ms() const { return heartbeat_ms_; }
  [[nodiscard]] int timeout_ms() const { return timeout_ms_; }

  /// Runs due cycles until the virtual clock would pass `until_ms`.
  void run_until(std::int64_t until_ms);

  /// Runs due cycles until `pred` holds (checked before the run and after
  /// every cycle) or the horizon passes; returns whether pred held.
  bool run_until(const std::function<bool()>& pred, std::int64_t horizon_ms);

  /// Out-of-band wire access to one node, clock untouched.
  [[nodiscard]] std::optional<wire::RawResponse> observe(NodeId id, const std::string& method,
                                                         const std::string& path,
                                                         const std::string& body);

 private:
  struct Entry {
    std::unique_ptr<Node> node;
    std::int64_t due_ms = 0;
  };

  [[nodiscard]] NodeId next_due() const;

  ParsedConfig config_;
  SimNetwork network_;
  MemorySink sink_;
  std::map<NodeId, Entry> entries_;
  int heartbeat_ms_ = 0;
  int timeout_ms_ = 0;
};

}  // namespace saferd

#endif  // SAFERD_SIM_CLUSTER_HPP
