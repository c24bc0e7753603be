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
#include "saferd/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "saferd/errors.hpp"
#include "saferd/local_loop.hpp"
#include "record_format.hpp"

namespace saferd {

namespace {

using detail::Record;

std::string expect_value(const Record& record, const std::string& token,
                         const std::string& key) {
  const auto pair = detail::split_key_value(token);
  if (!pair || pair->first != key || pair->second.empty()) {
    throw SyntaxError(record.line, "expected " + key + "=<value>, got '" + token + "'");
  }
  return pair->second;
}

int parse_ordinal(const Record& record, const std::string& token) {
  std::uint32_t value = 0;
  if (!detail::parse_u32(token, value) || value == 0 || value > 1000) {
    throw SyntaxError(record.line, "bad level ordinal '" + token + "'");
  }
  return static_cast<int>(value);
}

double parse_bound(const Record& record, const std::string& token) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end || value < 0.0) {
    throw SyntaxError(record.line, "bad threshold bound '" + token + "'");
  }
  return value;
}

SecurityLevel parse_level_record(const Record& record) {
  if (record.tokens.size() != 4) {
    throw SyntaxError(record.line, "level records take <ordinal> name=<n> countermeasure=<c>");
  }
  SecurityLevel level;
  level.ordinal = parse_ordinal(record, record.tokens[1]);
  level.name = expect_value(record, record.tokens[2], "name");
  level.countermeasure = expect_value(record, record.tokens[3], "countermeasure");
  return level;
}

std::pair<int, int> parse_transition_record(const Record& record) {
  if (record.tokens.size() != 3) {
    throw SyntaxError(record.line, "transition records take <from> <to>");
  }
  return {parse_ordinal(record, record.tokens[1]), parse_ordinal(record, record.tokens[2])};
}

ProbeRule parse_probe_record(const Record& record) {
  if (record.tokens.size() != 4) {
    throw SyntaxError(record.line, "probe records take <id> metric=<m> thresholds=[b:l,...]");
  }
  ProbeRule rule;
  rule.probe = record.tokens[1];
  rule.metric = expect_value(record, record.tokens[2], "metric");
  const auto items = detail::split_bracket_list(expect_value(record, record.tokens[3], "thresholds"));
  if (!items || items->empty()) {
    throw SyntaxError(record.line, "thresholds must be a non-empty [bound:level,...] list");
  }
  for (const auto& item : *items) {
    const auto colon = item.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= item.size()) {
      throw SyntaxError(record.line, "bad threshold '" + item + "'");
    }
    const double bound = parse_bound(record, item.substr(0, colon));
    const int level = parse_ordinal(record, item.substr(colon + 1));
    rule.thresholds.emplace_back(bound, level);
  }
  return rule;
}

const std::set<std::string>& known_options() {
  static const std::set<std::string> keys = {
      "heartbeat_ms", "timeout_ms", "recovery_timeout_ms", "rate_limit_per_sec",
      "approval_token"};
  return keys;
}

void parse_option_record(const Record& record, std::map<std::string, std::string>& options) {
  if (record.tokens.size() != 2) {
    throw SyntaxError(record.line, "option records take <key>=<value>");
  }
  const auto pair = detail::split_key_value(record.tokens[1]);
  if (!pair || pair->second.empty()) {
    throw SyntaxError(record.line, "option records take <key>=<value>");
  }
  if (!known_options().contains(pair->first)) {
    throw SyntaxError(record.line, "unknown option '" + pair->first + "'");
  }
  if (!options.emplace(pair->first, pair->second).second) {
    throw SyntaxError(record.line, "duplicate option '" + pair->first + "'");
  }
}

int option_int(const ParsedConfig& parsed, const std::string& key, int fallback) {
  const auto it = parsed.options.find(key);
  if (it == parsed.options.end()) {
    return fallback;
  }
  std::int64_t value = 0;
  if (!detail::parse_i64(it->second, value) || value < 0 ||
      value > std::numeric_limits<int>::max()) {
    throw StructureError("option " + key, "not a valid integer: " + it->second);
  }
  return static_cast<int>(value);
}

double option_double(const ParsedConfig& parsed, const std::string& key, double fallback) {
  const auto it = parsed.options.find(key);
  if (it == parsed.options.end()) {
    return fallback;
  }
  double value = 0.0;
  const char* begin = it->second.data();
  const char* end = begin + it->second.size();
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc{} || result.ptr != end) {
    throw StructureError("option " + key, "not a valid number: " + it->second);
  }
  return value;
}

}  // namespace

ParsedConfig parse_config(const std::string& text) {
  ParsedConfig out;
  out.topology = std::make_shared<Topology>(Topology::parse(text));

  std::vector<SecurityLevel> declared_levels;
  std::set<std::pair<int, int>> extra_transitions;
  for (const Record& record : detail::tokenize_document(text)) {
    const std::string& kind = record.tokens.front();
    if (kind == "node") {
      continue;  // consumed by Topology::parse
    }
    if (kind == "level") {
      declared_levels.push_back(parse_level_record(record));
    } else if (kind == "transition") {
      extra_transitions.insert(parse_transition_record(record));
    } else if (kind == "probe") {
      out.probe_rules.push_back(parse_probe_record(record));
    } else if (kind == "option") {
      parse_option_record(record, out.options);
    } else {
      throw SyntaxError(record.line, "unknown record kind '" + kind + "'");
    }
  }

  if (!declared_levels.empty()) {
    out.levels = LevelSet(std::move(declared_levels));
  }
  out.table = extra_transitions.empty()
                  ? TransitionTable::adjacent(out.levels)
                  : TransitionTable::adjacent_with(out.levels, std::move(extra_transitions));
  for (const auto& rule : out.probe_rules) {
    validate_probe_rule(rule, out.levels);
  }
  return out;
}

NodeConfig node_config_from(const ParsedConfig& parsed, NodeId id) {
  NodeConfig config;
  config.id = id;
  config.topology = parsed.topology;
  config.levels = parsed.levels;
  config.table = parsed.table;
  config.probe_rules = parsed.probe_rules;
  config.heartbeat_ms = option_int(parsed, "heartbeat_ms", config.heartbeat_ms);
  config.timeout_ms = option_int(parsed, "timeout_ms", config.timeout_ms);
  config.recovery_timeout_ms = option_int(parsed, "recovery_timeout_ms", config.recovery_timeout_ms);
  config.rate_limit_per_sec = option_double(parsed, "rate_limit_per_sec", config.rate_limit_per_sec);
  if (const auto it = parsed.options.find("approval_token"); it != parsed.options.end()) {
    config.approval_token = it->second;
  }
  config.validate();
  return config;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace saferd
