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
#include "saferd/global_loop.hpp"

#include <sstream>

namespace saferd {

std::string AdaptationMode::label() const {
  if (full()) {
    return "FA";
  }
  std::ostringstream out;
  out << "PA[";
  bool first = true;
  for (const NodeId id : excluded) {
    if (!first) {
      out << ",";
    }
    out << id;
    first = false;
  }
  out << "]";
  return out.str();
}

int traverse_budget_ms(const Topology& topology, NodeId from, NodeId to, int base_timeout_ms) {
  return base_timeout_ms * (1 + static_cast<int>(topology.side_size(from, to)));
}

namespace {

struct TraversalOutcome {
  std::set<NodeId> reachable;
  std::map<NodeId, int> levels;
  std::set<NodeId> failed;  // targets that stopped answering mid-traversal
};

/// Shared recursion core. `gate` guards each hop with a base-timeout health
/// probe; the origin skips the gate for peers that just answered the level
/// query.
TraversalOutcome traverse_into(wire::PeerClient& client, const Topology& topology, NodeId self,
                               NodeId origin, const std::set<NodeId>& visited,
                               const std::vector<NodeId>& targets, int base_timeout_ms,
                               bool gate) {
  TraversalOutcome out;
  for (const NodeId peer : targets) {
    if (visited.contains(peer)) {
      continue;
    }
    const std::string& addr = topology.spec(peer).address;
    if (gate) {
      const auto health = client.fetch_health(addr, base_timeout_ms);
      if (!health.ok()) {
        out.failed.insert(peer);
        continue;
      }
    }
    wire::TraverseRequest request;
    request.origin = origin;
    request.visited = visited;
    const int budget = traverse_budget_ms(topology, self, peer, base_timeout_ms);
    const auto response = client.post_traverse(addr, request, budget);
    if (!response.ok() || !response.value->reachable.contains(peer)) {
      out.failed.insert(peer);
      continue;
    }
    out.reachable.insert(response.value->reachable.begin(), response.value->reachable.end());
    for (const auto& [id, level] : response.value->levels) {
      out.levels[id] = level;
    }
  }
  return out;
}

}  // namespace

wire::TraverseResponse serve_traverse(wire::PeerClient& client, const Topology& topology,
                                      NodeId self, int self_level,
                                      const std::set<NodeId>& active,
                                      const wire::TraverseRequest& request,
                                      int base_timeout_ms) {
  std::set<NodeId> visited = request.visited;
  visited.insert(self);

  std::vector<NodeId> targets;
  for (const NodeId peer : topology.neighbor_query_order(self)) {
    if (active.contains(peer)) {
      targets.push_back(peer);
    }
  }
  const TraversalOutcome out = traverse_into(client, topology, self, request.origin, visited,
                                             targets, base_timeout_ms, /*gate=*/true);

  wire::TraverseResponse response;
  response.reachable = out.reachable;
  response.reachable.insert(self);
  response.levels = out.levels;
  response.levels[self] = self_level;
  return response;
}

ReachabilitySnapshot monitor_network(wire::PeerClient& client, const Topology& topology,
                                     NodeId self, int self_level, const AdaptationMode& mode,
                                     const GlobalTimeouts& timeouts, std::int64_t cycle_start_ms,
                                     const Clock& clock) {
  ReachabilitySnapshot snapshot;
  snapshot.cycle_start_ms = cycle_start_ms;

  std::vector<NodeId> responders;
  for (const NodeId peer : topology.neighbor_query_order(self)) {
    if (mode.excluded.contains(peer)) {
      continue;
    }
    PeerStatus status;
    status.peer = peer;
    const auto level = client.fetch_level(topology.spec(peer).address, timeouts.base_ms);
    if (level.ok()) {
      status.reachable = true;
      status.reported_level = level.value->level;
      status.last_seen_ms = clock.now_ms();
      responders.push_back(peer);
    }
    snapshot.peers[peer] = status;
  }

  const std::set<NodeId> visited{self};
  const TraversalOutcome out = traverse_into(client, topology, self, self, visited, responders,
                                             timeouts.base_ms, /*gate=*/false);
  for (const NodeId peer : out.failed) {
    // Answered the level query but not the traversal: count it unresponsive.
    snapshot.peers[peer].reachable = false;
    snapshot.peers[peer].reported_level.reset();
  }
  snapshot.traversal_reachable = out.reachable;
  snapshot.traversal_reachable.insert(self);
  snapshot.traversal_levels = out.levels;
  snapshot.traversal_levels[self] = self_level;

  const std::set<NodeId> revived =
      recovery_probe(client, topology, mode.excluded, timeouts.recovery_ms);
  for (const NodeId peer : mode.excluded) {
    PeerStatus status;
    status.peer = peer;
    status.reachable = revived.contains(peer);
    if (status.reachable) {
      status.last_seen_ms = clock.now_ms();
    }
    snapshot.peers[peer] = status;
  }
  return snapshot;
}

AdaptationMode analyze_and_plan(const ReachabilitySnapshot& snapshot,
                                const AdaptationMode& previous,
                                const std::set<NodeId>& neighbors) {
  AdaptationMode next;
  for (const NodeId peer : neighbors) {
    const auto it = snapshot.peers.find(peer);
    if (it == snapshot.peers.end()) {
      if (previous.excluded.contains(peer)) {
        next.excluded.insert(peer);
      }
      continue;
    }
    if (!it->second.reachable) {
      next.excluded.insert(peer);
    }
  }
  return next;
}

void execute_mode(ApiClientConfig& config, const AdaptationMode& mode,
                  const std::set<NodeId>& neighbors) {
  std::set<NodeId> active;
  for (const NodeId peer : neighbors) {
    if (!mode.excluded.contains(peer)) {
      active.insert(peer);
    }
  }
  config.active = std::move(active);
}

std::set<NodeId> recovery_probe(wire::PeerClient& client, const Topology& topology,
                                const std::set<NodeId>& excluded, int short_timeout_ms) {
  std::set<NodeId> revived;
  for (const NodeId peer : excluded) {
    const auto health = client.fetch_health(topology.spec(peer).address, short_timeout_ms);
    if (health.ok()) {
      revived.insert(peer);
    }
  }
  return revived;
}

}  // namespace saferd
