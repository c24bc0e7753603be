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
#include "saferd/node.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <utility>

#include "saferd/errors.hpp"
#include "record_format.hpp"

namespace saferd {

namespace {

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

std::vector<NodeId> to_vector(const std::set<NodeId>& ids) {
  return {ids.begin(), ids.end()};
}

/// Returns the value of a "key=value" token when the key matches.
std::optional<std::string> keyed(const std::string& token, const std::string& key) {
  const std::string prefix = key + "=";
  if (token.rfind(prefix, 0) != 0) {
    return std::nullopt;
  }
  return token.substr(prefix.size());
}

}  // namespace

void NodeConfig::validate() const {
  if (!topology) {
    throw StructureError("node config", "no topology");
  }
  if (!topology->contains(id)) {
    throw StructureError("node config",
                         "id " + std::to_string(id) + " is not part of the topology");
  }
  if (timeout_ms <= 0) {
    throw StructureError("node config", "timeout must be positive");
  }
  if (heartbeat_ms <= timeout_ms) {
    throw StructureError("node config", "heartbeat interval must exceed the peer timeout");
  }
  if (recovery_timeout_ms < 0) {
    throw StructureError("node config", "recovery timeout must not be negative");
  }
  if (rate_limit_per_sec <= 0.0) {
    throw StructureError("node config", "rate limit must be positive");
  }
  std::set<std::string> metrics;
  for (const auto& rule : probe_rules) {
    validate_probe_rule(rule, levels);
    if (rule.metric != "request-rate") {
      throw StructureError("node config", "unknown probe metric: " + rule.metric);
    }
    if (!metrics.insert(rule.metric).second) {
      throw StructureError("node config", "duplicate probe metric: " + rule.metric);
    }
  }
}

int NodeConfig::effective_recovery_ms() const {
  if (recovery_timeout_ms > 0) {
    return recovery_timeout_ms;
  }
  return std::max(1, timeout_ms / 10);
}

std::string format_record(const AdaptationRecord& record) {
  std::ostringstream out;
  out << "ts=" << record.cycle_start_ms << " node=" << record.node
      << " cycle=" << record.cycle << " kind=" << record.kind << " from=" << record.from_state
      << " to=" << record.to_state << " dur_ms=" << record.duration_ms;
  return out.str();
}

std::optional<AdaptationRecord> parse_record(const std::string& line) {
  std::vector<std::string> tokens;
  std::string token;
  std::istringstream in(line);
  while (std::getline(in, token, ' ')) {
    if (token.empty()) {
      return std::nullopt;
    }
    tokens.push_back(token);
  }
  if (tokens.size() != 7) {
    return std::nullopt;
  }

  AdaptationRecord record;
  const auto ts = keyed(tokens[0], "ts");
  const auto node = keyed(tokens[1], "node");
  const auto cycle = keyed(tokens[2], "cycle");
  const auto kind = keyed(tokens[3], "kind");
  const auto from = keyed(tokens[4], "from");
  const auto to = keyed(tokens[5], "to");
  const auto dur = keyed(tokens[6], "dur_ms");
  if (!ts || !node || !cycle || !kind || !from || !to || !dur) {
    return std::nullopt;
  }
  std::uint32_t node_value = 0;
  std::int64_t ts_value = 0;
  std::int64_t cycle_value = 0;
  std::int64_t dur_value = 0;
  if (!detail::parse_i64(*ts, ts_value) || !detail::parse_u32(*node, node_value) ||
      !detail::parse_i64(*cycle, cycle_value) || !detail::parse_i64(*dur, dur_value)) {
    return std::nullopt;
  }
  if (node_value == 0 || cycle_value < 0 || dur_value < 0) {
    return std::nullopt;
  }
  if (*kind != kLevelKind && *kind != kModeKind) {
    return std::nullopt;
  }
  if (from->empty() || to->empty()) {
    return std::nullopt;
  }
  record.cycle_start_ms = ts_value;
  record.node = node_value;
  record.cycle = static_cast<std::uint64_t>(cycle_value);
  record.kind = *kind;
  record.from_state = *from;
  record.to_state = *to;
  record.duration_ms = dur_value;
  return record;
}

void MemorySink::emit(const AdaptationRecord& record) {
  std::lock_guard lock(mutex_);
  records_.push_back(record);
}

std::vector<AdaptationRecord> MemorySink::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<std::string> MemorySink::lines() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  out.reserve(records_.size());
  for (const auto& record : records_) {
    out.push_back(format_record(record));
  }
  return out;
}

void StreamSink::emit(const AdaptationRecord& record) {
  std::lock_guard lock(mutex_);
  out_ << format_record(record) << '\n';
  out_.flush();
}

Node::Node(NodeConfig config, wire::RawChannel& channel, const Clock& clock, RecordSink* sink)
    : config_((config.validate(), std::move(config))),
      clock_(clock),
      sink_(sink),
      client_(channel, config_.topology->spec(config_.id).address, &config_.levels),
      gate_(clock, config_.rate_limit_per_sec),
      registry_(CountermeasureRegistry::standard()),
      machine_(config_.levels, config_.table, config_.levels.least_critical(),
               config_.approval_token) {
  for (const auto& rule : config_.probe_rules) {
    metric_probes_.push_back(std::make_unique<RequestRateProbe>(rule, counter_));
  }
  probes_.push_back(&trigger_probe_);
  for (const auto& probe : metric_probes_) {
    probes_.push_back(probe.get());
  }
  const auto neighbor_list = config_.topology->neighbors(config_.id);
  neighbors_ = {neighbor_list.begin(), neighbor_list.end()};
  const auto id_list = config_.topology->ids();
  all_ids_ = {id_list.begin(), id_list.end()};
  last_subgroup_ = all_ids_;
  execute_mode(api_, mode_, neighbors_);
  publish();
}

void Node::run_cycle() {
  if (terminated_.load()) {
    return;
  }
  if (revive_pending_.exchange(false)) {
    reset_runtime_state();
  }

  const std::int64_t cycle_start = clock_.now_ms();
  ++cycle_;

  // Global loop: reachability, mode, subgroup view.
  const GlobalTimeouts timeouts{config_.timeout_ms, config_.effective_recovery_ms()};
  const ReachabilitySnapshot snapshot =
      monitor_network(client_, *config_.topology, config_.id, machine_.current(), mode_,
                      timeouts, cycle_start, clock_);
  const AdaptationMode next = analyze_and_plan(snapshot, mode_, neighbors_);
  const bool mode_changed = !(next == mode_);
  const bool view_changed = snapshot.traversal_reachable != last_subgroup_;
  const std::string previous_state = mode_state(mode_, last_subgroup_);
  mode_ = next;
  execute_mode(api_, mode_, neighbors_);
  if (mode_changed || view_changed) {
    AdaptationRecord record;
    record.node = config_.id;
    record.cycle = cycle_;
    record.kind = kModeKind;
    record.cycle_start_ms = cycle_start;
    record.duration_ms = clock_.now_ms() - cycle_start;
    record.from_state = previous_state;
    record.to_state = mode_state(mode_, snapshot.traversal_reachable);
    emit(record);
  }
  last_subgroup_ = snapshot.traversal_reachable;

  // Knowledge: neighbor levels feed the local loop below.
  for (const auto& [peer, status] : snapshot.peers) {
    if (status.reported_level) {
      peer_levels_.update(peer, *status.reported_level, status.last_seen_ms);
    }
  }

  // Local loop: probes, demand, stepwise escalation.
  const std::int64_t local_now = clock_.now_ms();
  const std::vector<SecurityEvent> events = monitor_local(probes_, local_now);
  for (const auto& event : events) {
    flagged_.insert(event.sources.begin(), event.sources.end());
  }
  const auto fresh = peer_levels_.fresh(local_now, config_.heartbeat_ms);
  const int before = machine_.current();
  const int demanded = analyze_demand(events, fresh, before, config_.levels);
  const ExecuteOutcome outcome = plan_and_execute(machine_, demanded, executor());
  if (!outcome.applied.empty()) {
    AdaptationRecord record;
    record.node = config_.id;
    record.cycle = cycle_;
    record.kind = kLevelKind;
    record.cycle_start_ms = cycle_start;
    record.duration_ms = clock_.now_ms() - cycle_start;
    record.from_state = std::to_string(before);
    record.to_state = std::to_string(machine_.current());
    emit(record);
  }

  // Queued de-escalations apply at cycle end, after the sweep above, so an
  // operator reset is not undone by the same cycle's peer reports.
  std::vector<int> pending;
  {
    std::lock_guard lock(admin_mutex_);
    pending.swap(pending_deescalations_);
  }
  for (const int target : pending) {
    const int at = machine_.current();
    try {
      machine_.request_deescalation(target, config_.approval_token, executor());
    } catch (const Error&) {
      continue;  // the level moved past the target mid-cycle; the operator retries
    }
    if (machine_.current() != at) {
      AdaptationRecord record;
      record.node = config_.id;
      record.cycle = cycle_;
      record.kind = kLevelKind;
      record.cycle_start_ms = cycle_start;
      record.duration_ms = clock_.now_ms() - cycle_start;
      record.from_state = std::to_string(at);
      record.to_state = std::to_string(machine_.current());
      emit(record);
    }
  }

  publish();
}

wire::StatusReport Node::status() const {
  std::lock_guard lock(publish_mutex_);
  wire::StatusReport report;
  report.id = config_.id;
  report.level = published_.level;
  report.cycle = published_.cycle;
  report.mode = published_.mode.full() ? "FA" : "PA";
  report.active = to_vector(published_.active);
  report.excluded = to_vector(published_.mode.excluded);
  report.subgroup = to_vector(published_.subgroup);
  report.terminated = terminated_.load();
  return report;
}

wire::Admit Node::admit(const std::string& source) {
  counter_.note(source);
  return gate_.admit(source);
}

wire::LevelResponse Node::level_snapshot() {
  std::lock_guard lock(publish_mutex_);
  wire::LevelResponse response;
  response.id = config_.id;
  response.level = published_.level;
  response.cycle = published_.cycle;
  response.ts_ms = clock_.now_ms();
  return response;
}

wire::HealthResponse Node::health_snapshot() {
  return {config_.id, "ok"};
}

wire::TraverseResponse Node::serve_traverse(const wire::TraverseRequest& request) {
  int level = 0;
  std::set<NodeId> active;
  {
    std::lock_guard lock(publish_mutex_);
    level = published_.level;
    active = published_.active;
  }
  return saferd::serve_traverse(client_, *config_.topology, config_.id, level, active, request,
                                config_.timeout_ms);
}

nlohmann::json Node::admin_command(const std::string& verb, const nlohmann::json& body) {
  if (verb == "trigger") {
    const auto command = wire::decode_trigger(body);
    if (!command) {
      throw Error("malformed trigger command");
    }
    if (!config_.levels.defines(command->level)) {
      throw LevelError("undefined level " + std::to_string(command->level));
    }
    trigger_probe_.arm(command->level);
    return {{"status", "armed"}, {"level", command->level}};
  }
  if (verb == "deescalate") {
    const auto command = wire::decode_deescalate(body);
    if (!command) {
      throw Error("malformed deescalate command");
    }
    if (command->approval != config_.approval_token) {
      throw ApprovalError("missing or wrong approval token");
    }
    if (!config_.levels.defines(command->target_level)) {
      throw LevelError("undefined level " + std::to_string(command->target_level));
    }
    {
      std::lock_guard lock(admin_mutex_);
      pending_deescalations_.push_back(command->target_level);
    }
    return {{"status", "queued"}, {"target_level", command->target_level}};
  }
  if (verb == "terminate") {
    terminated_.store(true);
    return {{"status", "terminated"}};
  }
  if (verb == "revive") {
    {
      std::lock_guard lock(publish_mutex_);
      published_.level = config_.levels.least_critical();
      published_.mode = AdaptationMode{};
      published_.active = neighbors_;
      published_.subgroup = all_ids_;
    }
    gate_.configure(false, {});
    revive_pending_.store(true);
    terminated_.store(false);
    return {{"status", "revived"}};
  }
  if (verb == "status") {
    return wire::encode(status());
  }
  throw Error("unknown admin verb: " + verb);
}

void Node::reset_runtime_state() {
  machine_.reset_to(config_.levels.least_critical());
  mode_ = AdaptationMode{};
  peer_levels_.clear();
  flagged_.clear();
  gate_.configure(false, {});
  execute_mode(api_, mode_, neighbors_);
  last_subgroup_ = all_ids_;
}

void Node::publish() {
  std::lock_guard lock(publish_mutex_);
  published_.level = machine_.current();
  published_.cycle = cycle_;
  published_.mode = mode_;
  published_.active = api_.active;
  published_.subgroup = last_subgroup_;
}

void Node::emit(AdaptationRecord record) {
  if (sink_ != nullptr) {
    sink_->emit(record);
  }
}

CountermeasureExecutor Node::executor() {
  return [this](const SecurityLevel& entering) {
    if (entering.ordinal == config_.levels.least_critical()) {
      flagged_.clear();
    }
    registry_.execute(entering.countermeasure, gate_, flagged_);
  };
}

std::string Node::mode_state(const AdaptationMode& mode, const std::set<NodeId>& subgroup) const {
  return mode.label() + "+" + join_ids(subgroup);
}

}  // namespace saferd
