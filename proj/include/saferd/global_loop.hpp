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
#ifndef SAFERD_GLOBAL_LOOP_HPP
#define SAFERD_GLOBAL_LOOP_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "saferd/clock.hpp"
#include "saferd/topology.hpp"
#include "saferd/wire.hpp"

namespace saferd {

/// What the last monitor pass learned about one neighbor.
struct PeerStatus {
  NodeId peer = 0;
  bool reachable = false;
  std::optional<int> reported_level;  // present implies reachable
  std::int64_t last_seen_ms = 0;

  bool operator==(const PeerStatus&) const = default;
};

/// Peer-API operating mode. Full adaptation iff nothing is excluded.
struct AdaptationMode {
  std::set<NodeId> excluded;

  [[nodiscard]] bool full() const { return excluded.empty(); }
  /// "FA", or "PA[2,6]" listing the exclusions.
  [[nodiscard]] std::string label() const;

  bool operator==(const AdaptationMode&) const = default;
};

/// One cycle's view of the neighborhood: a status per neighbor (active ones
/// from the query pass, excluded ones from the recovery probe) plus the
/// reachable set found by the recursive traversal.
struct ReachabilitySnapshot {
  std::int64_t cycle_start_ms = 0;
  std::map<NodeId, PeerStatus> peers;
  std::set<NodeId> traversal_reachable;  // always contains self
  std::map<NodeId, int> traversal_levels;
};

/// Which neighbors the peer API currently requests adaptation data from.
struct ApiClientConfig {
  std::set<NodeId> active;
};

struct GlobalTimeouts {
  int base_ms = 3000;
  int recovery_ms = 300;
};

/// Per-hop budget for a recursive traversal into `to`: the base timeout plus
/// one base timeout per node on the far side, so nested failure detection
/// deeper in the tree cannot make an honest responder look dead.
[[nodiscard]] int traverse_budget_ms(const Topology& topology, NodeId from, NodeId to,
                                     int base_timeout_ms);

/// Handler-side traversal: answers for self, then recurses through own
/// active, unvisited neighbors (query order), gating each hop with a health
/// probe at the base timeout so a dead child costs exactly one timeout.
[[nodiscard]] wire::TraverseResponse serve_traverse(wire::PeerClient& client,
                                                    const Topology& topology, NodeId self,
                                                    int self_level,
                                                    const std::set<NodeId>& active,
                                                    const wire::TraverseRequest& request,
                                                    int base_timeout_ms);

/// Monitor stage: sequential level query per active neighbor (parent first,
/// then children in list order), recursive traversal through the responders,
/// then a short-timeout recovery probe per excluded neighbor. Every neighbor
/// lands in the snapshot exactly once.
[[nodiscard]] ReachabilitySnapshot monitor_network(wire::PeerClient& client,
                                                   const Topology& topology, NodeId self,
                                                   int self_level, const AdaptationMode& mode,
                                                   const GlobalTimeouts& timeouts,
                                                   std::int64_t cycle_start_ms,
                                                   const Clock& clock);

/// Analyze+plan (pure): the next mode excludes exactly the unreachable
/// neighbors. A neighbor missing from the snapshot keeps its previous
/// membership.
[[nodiscard]] AdaptationMode analyze_and_plan(const ReachabilitySnapshot& snapshot,
                                              const AdaptationMode& previous,
                                              const std::set<NodeId>& neighbors);

/// Execute stage: reconfigures which neighbors the peer API queries.
/// Idempotent.
void execute_mode(ApiClientConfig& config, const AdaptationMode& mode,
                  const std::set<NodeId>& neighbors);

/// Health-checks each excluded neighbor at the short timeout; returns the
/// responsive ones (reintegration threshold is one successful probe).
[[nodiscard]] std::set<NodeId> recovery_probe(wire::PeerClient& client, const Topology& topology,
                                              const std::set<NodeId>& excluded,
                                              int short_timeout_ms);

}  // namespace saferd

#endif  // SAFERD_GLOBAL_LOOP_HPP
