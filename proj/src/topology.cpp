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
#include "saferd/topology.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "saferd/errors.hpp"
#include "record_format.hpp"

namespace saferd {

namespace {

// Record kinds that belong to the node configuration loader; the topology
// parser skips them so one document can serve both interfaces.
bool is_foreign_record(const std::string& kind) {
  return kind == "level" || kind == "transition" || kind == "probe" || kind == "option";
}

SubsystemSpec parse_node_record(const detail::Record& record) {
  if (record.tokens.size() < 2) {
    throw SyntaxError(record.line, "node record needs an id");
  }
  SubsystemSpec spec;
  if (!detail::parse_u32(record.tokens[1], spec.id) || spec.id == 0) {
    throw SyntaxError(record.line, "node id must be a positive integer, got '" +
                                       record.tokens[1] + "'");
  }
  bool saw_layer = false;
  bool saw_children = false;
  for (std::size_t i = 2; i < record.tokens.size(); ++i) {
    const auto kv = detail::split_key_value(record.tokens[i]);
    if (!kv) {
      throw SyntaxError(record.line, "expected key=value, got '" + record.tokens[i] + "'");
    }
    const auto& [key, value] = *kv;
    if (key == "layer") {
      std::int64_t layer = 0;
      if (!detail::parse_i64(value, layer) || layer < 0) {
        throw SyntaxError(record.line, "layer must be a non-negative integer");
      }
      spec.layer = static_cast<int>(layer);
      saw_layer = true;
    } else if (key == "addr") {
      if (value.empty()) {
        throw SyntaxError(record.line, "addr must not be empty");
      }
      spec.address = value;
    } else if (key == "children") {
      const auto items = detail::split_bracket_list(value);
      if (!items) {
        throw SyntaxError(record.line, "children must look like [1,2,3] or []");
      }
      for (const auto& item : *items) {
        NodeId child = 0;
        if (!detail::parse_u32(item, child) || child == 0) {
          throw SyntaxError(record.line, "child id must be a positive integer, got '" +
                                             item + "'");
        }
        spec.children.push_back(child);
      }
      saw_children = true;
    } else {
      throw SyntaxError(record.line, "unknown node attribute '" + key + "'");
    }
  }
  if (!saw_layer) {
    throw SyntaxError(record.line, "node record is missing layer=");
  }
  if (!saw_children) {
    throw SyntaxError(record.line, "node record is missing children=");
  }
  return spec;
}

std::string join_ids(const std::set<NodeId>& ids) {
  std::ostringstream out;
  bool first = true;
  for (const NodeId id : ids) {
    if (!first) {
      out << ",";
    }
    out << id;
    first = false;
  }
  return out.str();
}

}  // namespace

Topology Topology::parse(const std::string& text) {
  std::vector<SubsystemSpec> specs;
  for (const auto& record : detail::tokenize_document(text)) {
    const std::string& kind = record.tokens.front();
    if (kind == "node") {
      specs.push_back(parse_node_record(record));
    } else if (!is_foreign_record(kind)) {
      throw SyntaxError(record.line, "unknown record kind '" + kind + "'");
    }
  }
  return from_specs(std::move(specs));
}

Topology Topology::from_specs(std::vector<SubsystemSpec> specs) {
  Topology topology;
  for (auto& spec : specs) {
    spec.parent.reset();
    const NodeId id = spec.id;
    if (!topology.specs_.emplace(id, std::move(spec)).second) {
      throw StructureError("duplicate id", "node " + std::to_string(id) + " is declared twice");
    }
  }
  topology.validate();
  return topology;
}

void Topology::validate() {
  if (specs_.empty()) {
    throw StructureError("empty topology", "no node records");
  }
  for (auto& [id, spec] : specs_) {
    std::set<NodeId> seen;
    for (const NodeId child : spec.children) {
      if (child == id) {
        throw StructureError("cycle", "node " + std::to_string(id) + " lists itself as a child");
      }
      if (!seen.insert(child).second) {
        throw StructureError("duplicate child", "node " + std::to_string(id) + " lists child " +
                                                    std::to_string(child) + " twice");
      }
      const auto it = specs_.find(child);
      if (it == specs_.end()) {
        throw StructureError("orphan", "node " + std::to_string(id) + " references child " +
                                           std::to_string(child) + " which is not declared");
      }
      if (it->second.parent) {
        throw StructureError("multiple parents",
                             "node " + std::to_string(child) + " is claimed by nodes " +
                                 std::to_string(*it->second.parent) + " and " +
                                 std::to_string(id));
      }
      it->second.parent = id;
    }
  }

  std::set<NodeId> roots;
  for (const auto& [id, spec] : specs_) {
    if (!spec.parent) {
      roots.insert(id);
    }
  }
  if (roots.empty()) {
    throw StructureError("cycle", "every node is claimed as a child; the graph has no root");
  }
  if (roots.size() > 1) {
    throw StructureError("multiple roots", "nodes {" + join_ids(roots) + "} all lack a parent");
  }
  root_ = *roots.begin();

  std::set<NodeId> reached;
  std::deque<NodeId> frontier{root_};
  while (!frontier.empty()) {
    const NodeId id = frontier.front();
    frontier.pop_front();
    if (!reached.insert(id).second) {
      continue;
    }
    for (const NodeId child : specs_.at(id).children) {
      frontier.push_back(child);
    }
  }
  if (reached.size() != specs_.size()) {
    std::set<NodeId> unreachable;
    for (const auto& [id, spec] : specs_) {
      if (!reached.contains(id)) {
        unreachable.insert(id);
      }
    }
    throw StructureError("cycle", "nodes {" + join_ids(unreachable) +
                                      "} are not reachable from root " + std::to_string(root_));
  }

  for (const auto& [id, spec] : specs_) {
    for (const NodeId child : spec.children) {
      const int expected = spec.layer + 1;
      const int actual = specs_.at(child).layer;
      if (actual != expected) {
        throw StructureError("layer mismatch",
                             "node " + std::to_string(child) + " has layer " +
                                 std::to_string(actual) + " but its parent " +
                                 std::to_string(id) + " has layer " + std::to_string(spec.layer));
      }
    }
  }
}

const SubsystemSpec& Topology::spec(NodeId id) const {
  const auto it = specs_.find(id);
  if (it == specs_.end()) {
    throw UnknownSubsystemError("subsystem " + std::to_string(id) +
                                " is not part of the topology");
  }
  return it->second;
}

std::vector<NodeId> Topology::ids() const {
  std::vector<NodeId> out;
  out.reserve(specs_.size());
  for (const auto& [id, spec] : specs_) {
    out.push_back(id);
  }
  return out;
}

std::set<NodeId> Topology::neighbors(NodeId id) const {
  const SubsystemSpec& s = spec(id);
  std::set<NodeId> out(s.children.begin(), s.children.end());
  if (s.parent) {
    out.insert(*s.parent);
  }
  return out;
}

std::vector<NodeId> Topology::neighbor_query_order(NodeId id) const {
  const SubsystemSpec& s = spec(id);
  std::vector<NodeId> out;
  out.reserve(s.children.size() + 1);
  if (s.parent) {
    out.push_back(*s.parent);
  }
  out.insert(out.end(), s.children.begin(), s.children.end());
  return out;
}

std::vector<std::set<NodeId>> Topology::subgroups_after_failures(
    const std::set<NodeId>& failed) const {
  for (const NodeId id : failed) {
    spec(id);  // membership check
  }
  std::vector<std::set<NodeId>> components;
  std::set<NodeId> assigned;
  for (const auto& [start, start_spec] : specs_) {
    if (failed.contains(start) || assigned.contains(start)) {
      continue;
    }
    std::set<NodeId> component;
    std::deque<NodeId> frontier{start};
    while (!frontier.empty()) {
      const NodeId id = frontier.front();
      frontier.pop_front();
      if (failed.contains(id) || !component.insert(id).second) {
        continue;
      }
      for (const NodeId next : neighbors(id)) {
        if (!failed.contains(next) && !component.contains(next)) {
          frontier.push_back(next);
        }
      }
    }
    assigned.insert(component.begin(), component.end());
    components.push_back(std::move(component));
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return *a.begin() < *b.begin(); });
  return components;
}

int Topology::hop_distance(NodeId a, NodeId b) const {
  spec(a);
  spec(b);
  if (a == b) {
    return 0;
  }
  std::map<NodeId, int> dist{{a, 0}};
  std::deque<NodeId> frontier{a};
  while (!frontier.empty()) {
    const NodeId id = frontier.front();
    frontier.pop_front();
    for (const NodeId next : neighbors(id)) {
      if (dist.contains(next)) {
        continue;
      }
      dist[next] = dist[id] + 1;
      if (next == b) {
        return dist[next];
      }
      frontier.push_back(next);
    }
  }
  throw UnknownSubsystemError("no path between " + std::to_string(a) + " and " +
                              std::to_string(b));
}

std::size_t Topology::subtree_size(NodeId id) const {
  spec(id);
  std::size_t count = 0;
  std::deque<NodeId> frontier{id};
  while (!frontier.empty()) {
    const NodeId current = frontier.front();
    frontier.pop_front();
    ++count;
    for (const NodeId child : specs_.at(current).children) {
      frontier.push_back(child);
    }
  }
  return count;
}

std::size_t Topology::side_size(NodeId from, NodeId to) const {
  const SubsystemSpec& s = spec(from);
  if (s.parent && *s.parent == to) {
    return size() - subtree_size(from);
  }
  if (std::find(s.children.begin(), s.children.end(), to) != s.children.end()) {
    return subtree_size(to);
  }
  throw UnknownSubsystemError("subsystem " + std::to_string(to) + " is not a neighbor of " +
                              std::to_string(from));
}

}  // namespace saferd
