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
#ifndef SAFERD_NODE_HPP
#define SAFERD_NODE_HPP

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saferd/countermeasures.hpp"
#include "saferd/global_loop.hpp"
#include "saferd/local_loop.hpp"
#include "saferd/seclevel.hpp"
#include "saferd/topology.hpp"
#include "saferd/wire.hpp"

namespace saferd {

inline constexpr const char* kDefaultApprovalToken = "operator-approved";

/// Everything a subsystem needs to run. The topology is shared by every
/// node of a cluster; all other fields are per node.
struct NodeConfig {
  NodeId id = 0;
  std::shared_ptr<const Topology> topology;
  LevelSet levels = LevelSet::standard();
  TransitionTable table = TransitionTable::adjacent(levels);
  std::vector<ProbeRule> probe_rules;
  int heartbeat_ms = 10000;
  int timeout_ms = 3000;
  int recovery_timeout_ms = 0;  // 0 selects timeout_ms / 10
  double rate_limit_per_sec = 10.0;
  std::string approval_token = kDefaultApprovalToken;

  /// Throws StructureError when the configuration cannot run: missing or
  /// foreign topology, heartbeat not longer than the timeout, bad rates,
  /// or an invalid probe rule.
  void validate() const;

  [[nodiscard]] int effective_recovery_ms() const;
};

inline constexpr const char* kLevelKind = "SL";
inline constexpr const char* kModeKind = "G";

/// One completed adaptation, either of the security level (kind SL, states
/// are ordinals) or of the peer-API mode (kind G, states are
/// "<mode>+<subgroup>"). duration_ms counts from the start of the cycle
/// that performed it.
struct AdaptationRecord {
  NodeId node = 0;
  std::uint64_t cycle = 0;
  std::string kind;
  std::int64_t cycle_start_ms = 0;
  std::int64_t duration_ms = 0;
  std::string from_state;
  std::string to_state;

  bool operator==(const AdaptationRecord&) const = default;
};

/// "ts=<ms> node=<id> cycle=<n> kind=<SL|G> from=<s> to=<s> dur_ms=<d>".
[[nodiscard]] std::string format_record(const AdaptationRecord& record);

/// Strict inverse of format_record: exact key order, numeric fields fully
/// parsed, kind restricted to SL or G. nullopt otherwise.
[[nodiscard]] std::optional<AdaptationRecord> parse_record(const std::string& line);

class RecordSink {
 public:
  virtual ~RecordSink() = default;
  virtual void emit(const AdaptationRecord& record) = 0;
};

/// Collects records in memory. Thread-safe.
class MemorySink final : public RecordSink {
 public:
  void emit(const AdaptationRecord& record) override;
  [[nodiscard]] std::vector<AdaptationRecord> records() const;
  [[nodiscard]] std::vector<std::string> lines() const;

 private:
  mutable std::mutex mutex_;
  std::vector<AdaptationRecord> records_;
};

/// Writes one formatted line per record. Thread-safe.
class StreamSink final : public RecordSink {
 public:
  explicit StreamSink(std::ostream& out) : out_(out) {}
  void emit(const AdaptationRecord& record) override;

 private:
  std::mutex mutex_;
  std::ostream& out_;
};

/// One subsystem: the security-level loop and the peer-API mode loop around
/// a shared knowledge base, plus the wire surface other nodes and operators
/// talk to. run_cycle belongs to a single control thread; the NodeService
/// overrides are safe to call from carrier threads.
class Node final : public wire::NodeService {
 public:
  /// Throws StructureError when the configuration is invalid. The channel,
  /// clock and sink must outlive the node.
  Node(NodeConfig config, wire::RawChannel& channel, const Clock& clock,
       RecordSink* sink = nullptr);

  /// One heartbeat: global loop (reachability, mode, subgroup view), then
  /// knowledge update, then local loop (probes, level), then queued
  /// de-escalations. No-op while terminated.
  void run_cycle();

  [[nodiscard]] NodeId id() const { return config_.id; }
  [[nodiscard]] const NodeConfig& config() const { return config_; }
  [[nodiscard]] std::uint64_t cycles_run() const { return cycle_; }
  [[nodiscard]] wire::StatusReport status() const;

  [[nodiscard]] bool terminated() const override { return terminated_.load(); }
  [[nodiscard]] wire::Admit admit(const std::string& source) override;
  [[nodiscard]] wire::LevelResponse level_snapshot() override;
  [[nodiscard]] wire::HealthResponse health_snapshot() override;
  [[nodiscard]] wire::TraverseResponse serve_traverse(const wire::TraverseRequest& request) override;
  [[nodiscard]] nlohmann::json admin_command(const std::string& verb,
                                             const nlohmann::json& body) override;

 private:
  struct Published {
    int level = 0;
    std::uint64_t cycle = 0;
    AdaptationMode mode;
    std::set<NodeId> active;
    std::set<NodeId> subgroup;
  };

  void reset_runtime_state();
  void publish();
  void emit(AdaptationRecord record);
  [[nodiscard]] CountermeasureExecutor executor();
  [[nodiscard]] std::string mode_state(const AdaptationMode& mode,
                                       const std::set<NodeId>& subgroup) const;

  NodeConfig config_;
  const Clock& clock_;
  RecordSink* sink_;
  wire::PeerClient client_;
  RequestGate gate_;
  RequestCounter counter_;
  CountermeasureRegistry registry_;
  SeededTriggerProbe trigger_probe_;
  std::vector<std::unique_ptr<Probe>> metric_probes_;
  std::vector<Probe*> probes_;

  // Control-thread state.
  SLStateMachine machine_;
  PeerLevelStore peer_levels_;
  std::set<std::string> flagged_;
  AdaptationMode mode_;
  ApiClientConfig api_;
  std::set<NodeId> neighbors_;
  std::set<NodeId> all_ids_;
  std::set<NodeId> last_subgroup_;
  std::uint64_t cycle_ = 0;

  std::atomic<bool> terminated_{false};
  std::atomic<bool> revive_pending_{false};

  mutable std::mutex publish_mutex_;
  Published published_;

  std::mutex admin_mutex_;
  std::vector<int> pending_deescalations_;
};

}  // namespace saferd

#endif  // SAFERD_NODE_HPP
