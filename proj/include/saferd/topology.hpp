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
#ifndef SAFERD_TOPOLOGY_HPP
#define SAFERD_TOPOLOGY_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace saferd {

using NodeId = std::uint32_t;

/// One subsystem in the hierarchy. The parent link is derived from the
/// children lists during validation, never declared in the input.
struct SubsystemSpec {
  NodeId id = 0;
  int layer = 0;
  std::string address;           // host:port of the wire endpoint
  std::vector<NodeId> children;  // order is significant: it fixes query order
  std::optional<NodeId> parent;
};

/// Validated, immutable tree of subsystems. All queries are read-only, so a
/// fully constructed instance may be shared across threads freely.
class Topology {
 public:
  /// Parses a configuration document. Processes `node` records; `level`,
  /// `transition`, `probe` and `option` records are left to the node
  /// configuration loader, so one file can serve both purposes. `#` starts a
  /// comment. Throws SyntaxError (with line number) on malformed records and
  /// StructureError (naming the invariant) on an inconsistent tree.
  [[nodiscard]] static Topology parse(const std::string& text);

  /// Builds a topology from bare specs (parents ignored, then derived).
  /// Same structural validation as parse().
  [[nodiscard]] static Topology from_specs(std::vector<SubsystemSpec> specs);

  [[nodiscard]] std::size_t size() const { return specs_.size(); }
  [[nodiscard]] NodeId root() const { return root_; }
  [[nodiscard]] bool contains(NodeId id) const { return specs_.contains(id); }

  /// Throws UnknownSubsystemError for ids outside the tree.
  [[nodiscard]] const SubsystemSpec& spec(NodeId id) const;

  /// All ids in ascending order.
  [[nodiscard]] std::vector<NodeId> ids() const;

  /// Direct tree neighbors: parent (if any) plus children.
  [[nodiscard]] std::set<NodeId> neighbors(NodeId id) const;

  /// Neighbors in the order the loops query them: parent first, then
  /// children in children-list order.
  [[nodiscard]] std::vector<NodeId> neighbor_query_order(NodeId id) const;

  /// Connected components of the tree after removing `failed` nodes and
  /// their edges. Components are sorted by smallest member; the failed set
  /// must be a subset of the tree.
  [[nodiscard]] std::vector<std::set<NodeId>> subgroups_after_failures(
      const std::set<NodeId>& failed) const;

  /// Edge count of the unique path between two members.
  [[nodiscard]] int hop_distance(NodeId a, NodeId b) const;

  /// Number of nodes in the subtree rooted at `id` (inclusive).
  [[nodiscard]] std::size_t subtree_size(NodeId id) const;

  /// Number of nodes on the `to` side once the edge (from, to) is removed.
  /// `to` must be a direct neighbor of `from`. Used to budget how long a
  /// recursive traversal into that side may legitimately take.
  [[nodiscard]] std::size_t side_size(NodeId from, NodeId to) const;

 private:
  Topology() = default;
  void validate();

  std::map<NodeId, SubsystemSpec> specs_;
  NodeId root_ = 0;
};

}  // namespace saferd

#endif  // SAFERD_TOPOLOGY_HPP
