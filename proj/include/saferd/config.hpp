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
#ifndef SAFERD_CONFIG_HPP
#define SAFERD_CONFIG_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "saferd/node.hpp"
#include "saferd/seclevel.hpp"
#include "saferd/topology.hpp"

namespace saferd {

/// One cluster description: the topology plus the level set, transition
/// table, probe rules and options shared by every node. Produced by
/// parse_config from the record format described in the README.
struct ParsedConfig {
  std::shared_ptr<const Topology> topology;
  LevelSet levels = LevelSet::standard();
  TransitionTable table = TransitionTable::adjacent(levels);
  std::vector<ProbeRule> probe_rules;
  std::map<std::string, std::string> options;
};

/// Parses a cluster description. Record kinds: node, level, transition,
/// probe, option. Declaring any level record replaces the standard level
/// set; transition records extend the adjacent-step table. Throws
/// SyntaxError with the offending line, or the level/topology constructor
/// errors for semantic violations.
[[nodiscard]] ParsedConfig parse_config(const std::string& text);

/// Builds the runtime configuration for one subsystem, applying the
/// recognized options (heartbeat_ms, timeout_ms, recovery_timeout_ms,
/// rate_limit_per_sec, approval_token). The result is validated.
[[nodiscard]] NodeConfig node_config_from(const ParsedConfig& parsed, NodeId id);

/// Reads a whole file; throws Error when it cannot be opened.
[[nodiscard]] std::string read_text_file(const std::string& path);

}  // namespace saferd

#endif  // SAFERD_CONFIG_HPP
