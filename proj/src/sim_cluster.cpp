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
#include "saferd/sim_cluster.hpp"

#include <algorithm>
#include <limits>

#include "saferd/errors.hpp"

namespace saferd {

SimCluster::SimCluster(const ParsedConfig& config, SimNetwork::Options options)
    : config_(config), network_(options) {
  for (const NodeId id : config_.topology->ids()) {
    NodeConfig node_config = node_config_from(config_, id);
    heartbeat_ms_ = node_config.heartbeat_ms;
    timeout_ms_ = node_config.timeout_ms;
    Entry entry;
    entry.node = std::make_unique<Node>(std::move(node_config), network_, network_, &sink_);
    entry.due_ms = 0;
    const std::string& addr = config_.topology->spec(id).address;
    network_.attach(addr, entry.node.get());
    entries_.emplace(id, std::move(entry));
  }
}

Node& SimCluster::node(NodeId id) {
  const auto it = entries_.find(id);
  if (it == entries_.end()) {
    throw UnknownSubsystemError("no node " + std::to_string(id));
  }
  return *it->second.node;
}

NodeId SimCluster::next_due() const {
  NodeId best = 0;
  std::int64_t best_due = std::numeric_limits<std::int64_t>::max();
  for (const auto& [id, entry] : entries_) {
    if (entry.due_ms < best_due) {  // map order breaks ties by ascending id
      best = id;
      best_due = entry.due_ms;
    }
  }
  return best;
}

void SimCluster::run_until(std::int64_t until_ms) {
  (void)run_until([] { return false; }, until_ms);
  network_.advance_to(until_ms);
}

bool SimCluster::run_until(const std::function<bool()>& pred, std::int64_t horizon_ms) {
  if (pred()) {
    return true;
  }
  while (true) {
    const NodeId id = next_due();
    Entry& entry = entries_.at(id);
    if (entry.due_ms > horizon_ms) {
      return false;
    }
    network_.advance_to(entry.due_ms);
    entry.node->run_cycle();
    entry.due_ms = std::max(entry.due_ms + heartbeat_ms_, network_.now_ms());
    if (pred()) {
      return true;
    }
  }
}

std::optional<wire::RawResponse> SimCluster::observe(NodeId id, const std::string& method,
                                                     const std::string& path,
                                                     const std::string& body) {
  const std::string& addr = config_.topology->spec(id).address;
  return network_.observe(addr, method, path, body, "harness");
}

}  // namespace saferd
