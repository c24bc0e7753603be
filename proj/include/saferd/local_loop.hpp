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
#ifndef SAFERD_LOCAL_LOOP_HPP
#define SAFERD_LOCAL_LOOP_HPP

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saferd/countermeasures.hpp"
#include "saferd/seclevel.hpp"
#include "saferd/topology.hpp"

namespace saferd {

/// A probe observation that demands a level. `sources` names the offenders
/// when the metric can attribute them (feeds the block countermeasure).
struct SecurityEvent {
  std::string probe;
  double observed = 0.0;
  int demanded_level = 0;
  std::int64_t at_ms = 0;
  std::set<std::string> sources;
};

/// Threshold configuration for a metric probe: ascending bounds mapping to
/// increasingly critical (descending) levels.
struct ProbeRule {
  std::string probe;
  std::string metric;
  std::vector<std::pair<double, int>> thresholds;
};

/// Throws LevelError unless bounds ascend strictly and demanded levels are
/// defined and strictly more critical as bounds grow.
void validate_probe_rule(const ProbeRule& rule, const LevelSet& levels);

/// Evaluates `value` against the rule: the highest crossed bound wins;
/// nullopt when no bound is crossed.
[[nodiscard]] std::optional<int> demanded_by(const ProbeRule& rule, double value);

class Probe {
 public:
  virtual ~Probe() = default;
  [[nodiscard]] virtual const std::string& id() const = 0;
  /// May throw; monitor_local logs the failure and keeps going.
  [[nodiscard]] virtual std::vector<SecurityEvent> sample(std::int64_t now_ms) = 0;
};

/// Always-registered probe armed through the admin endpoint; fires exactly
/// once per arming at the next local cycle. Thread-safe.
class SeededTriggerProbe final : public Probe {
 public:
  [[nodiscard]] const std::string& id() const override { return id_; }
  void arm(int level);
  [[nodiscard]] std::vector<SecurityEvent> sample(std::int64_t now_ms) override;

 private:
  std::string id_ = "seeded-trigger";
  std::mutex mutex_;
  std::optional<int> armed_;
};

/// Turns inbound request counts into per-source rates and evaluates them
/// against a ProbeRule over the elapsed window.
class RequestRateProbe final : public Probe {
 public:
  RequestRateProbe(ProbeRule rule, RequestCounter& counter);

  [[nodiscard]] const std::string& id() const override { return rule_.probe; }
  [[nodiscard]] std::vector<SecurityEvent> sample(std::int64_t now_ms) override;

 private:
  ProbeRule rule_;
  RequestCounter& counter_;
  std::int64_t last_sample_ms_ = std::numeric_limits<std::int64_t>::min();
};

/// A neighbor's reported level at a point in time.
struct PeerLevelReport {
  NodeId peer = 0;
  int level = 0;
  std::int64_t at_ms = 0;

  bool operator==(const PeerLevelReport&) const = default;
};

/// Last known level per neighbor. Reports older than one heartbeat interval
/// are stale and never feed analysis.
class PeerLevelStore {
 public:
  void update(NodeId peer, int level, std::int64_t at_ms);
  [[nodiscard]] std::vector<PeerLevelReport> fresh(std::int64_t now_ms,
                                                   std::int64_t interval_ms) const;
  [[nodiscard]] std::vector<PeerLevelReport> all() const;
  void clear();

 private:
  std::map<NodeId, PeerLevelReport> reports_;
};

/// Monitor stage: samples every probe; a throwing probe contributes nothing
/// beyond a warning line.
[[nodiscard]] std::vector<SecurityEvent> monitor_local(
    const std::vector<Probe*>& probes, std::int64_t now_ms,
    std::vector<std::string>* warnings = nullptr);

/// Analyze stage (pure): most critical of current level, event demands and
/// fresh peer reports.
[[nodiscard]] int analyze_demand(const std::vector<SecurityEvent>& events,
                                 const std::vector<PeerLevelReport>& fresh_reports, int current,
                                 const LevelSet& levels);

struct ExecuteOutcome {
  std::vector<TransitionStep> applied;
  std::optional<std::string> error;  // first executor failure, if any
};

/// Plan+execute stage: escalates stepwise to `demanded` when it is more
/// critical than the current level; otherwise a no-op (de-escalation only
/// happens through the approval path). On a countermeasure failure the
/// machine stays at the last committed step.
ExecuteOutcome plan_and_execute(SLStateMachine& machine, int demanded,
                                const CountermeasureExecutor& executor);

}  // namespace saferd

#endif  // SAFERD_LOCAL_LOOP_HPP
