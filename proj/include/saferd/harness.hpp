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
#ifndef SAFERD_HARNESS_HPP
#define SAFERD_HARNESS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "saferd/config.hpp"
#include "saferd/node.hpp"
#include "saferd/real_cluster.hpp"
#include "saferd/sim_cluster.hpp"
#include "saferd/topology.hpp"
#include "saferd/wire.hpp"

namespace saferd {

/// What the experiment driver needs from a running cluster, identical for
/// the simulated and the real transport: admin access, the record stream,
/// time, and condition waiting.
class ClusterHandle {
 public:
  virtual ~ClusterHandle() = default;

  [[nodiscard]] virtual const ParsedConfig& cluster_config() const = 0;
  [[nodiscard]] virtual const Topology& topology() const = 0;
  [[nodiscard]] virtual int heartbeat_ms() const = 0;
  [[nodiscard]] virtual int timeout_ms() const = 0;
  [[nodiscard]] virtual std::int64_t now_ms() const = 0;

  /// Admin exchange with one node; nullopt when nothing answered (e.g. the
  /// node is terminated).
  virtual std::optional<wire::AdminOutcome> admin(NodeId id, const std::string& verb,
                                                  const nlohmann::json& body) = 0;

  [[nodiscard]] virtual std::vector<AdaptationRecord> records() = 0;

  /// Lets the cluster run until pred holds or budget_ms passes; returns
  /// whether it held. pred is polled between cycles (simulated time) or at a
  /// short real interval.
  virtual bool wait(const std::function<bool()>& pred, std::int64_t budget_ms) = 0;

  /// Lets the cluster run for delta_ms unconditionally.
  virtual void delay(std::int64_t delta_ms) = 0;
};

/// Drives a SimCluster in virtual time; admin goes through the out-of-band
/// observer so measurement never moves the clock.
class SimClusterHandle final : public ClusterHandle {
 public:
  explicit SimClusterHandle(SimCluster& cluster) : cluster_(cluster) {}

  [[nodiscard]] const ParsedConfig& cluster_config() const override;
  [[nodiscard]] const Topology& topology() const override { return cluster_.topology(); }
  [[nodiscard]] int heartbeat_ms() const override { return cluster_.heartbeat_ms(); }
  [[nodiscard]] int timeout_ms() const override { return cluster_.timeout_ms(); }
  [[nodiscard]] std::int64_t now_ms() const override { return cluster_.network().now_ms(); }
  std::optional<wire::AdminOutcome> admin(NodeId id, const std::string& verb,
                                          const nlohmann::json& body) override;
  [[nodiscard]] std::vector<AdaptationRecord> records() override;
  bool wait(const std::function<bool()>& pred, std::int64_t budget_ms) override;
  void delay(std::int64_t delta_ms) override;

 private:
  SimCluster& cluster_;
};

/// Drives a RealCluster over loopback HTTP, polling at a short interval.
class RealClusterHandle final : public ClusterHandle {
 public:
  explicit RealClusterHandle(RealCluster& cluster) : cluster_(cluster) {}

  [[nodiscard]] const ParsedConfig& cluster_config() const override;
  [[nodiscard]] const Topology& topology() const override { return cluster_.topology(); }
  [[nodiscard]] int heartbeat_ms() const override { return cluster_.heartbeat_ms(); }
  [[nodiscard]] int timeout_ms() const override { return cluster_.timeout_ms(); }
  [[nodiscard]] std::int64_t now_ms() const override { return cluster_.clock().now_ms(); }
  std::optional<wire::AdminOutcome> admin(NodeId id, const std::string& verb,
                                          const nlohmann::json& body) override;
  [[nodiscard]] std::vector<AdaptationRecord> records() override;
  bool wait(const std::function<bool()>& pred, std::int64_t budget_ms) override;
  void delay(std::int64_t delta_ms) override;

 private:
  RealCluster& cluster_;
  HttpChannel channel_;
};

/// Fetches one node's status report; nullopt when the node does not answer
/// or answers garbage.
[[nodiscard]] std::optional<wire::StatusReport> fetch_status(ClusterHandle& cluster, NodeId id);

// ---------------------------------------------------------------------------
// Experiments.

/// kind "sl": arm the seeded trigger on each target and measure the
/// target's security-level adaptation. kind "global": terminate each target
/// and measure the monitored node's mode/subgroup adaptation, then revive.
struct ExperimentPlan {
  std::string kind;
  NodeId monitored = 1;
  std::vector<NodeId> targets;
  int reps = 10;
  std::uint64_t seed = 42;
  int trigger_level = 2;
};

struct ExperimentRow {
  std::string experiment;
  NodeId target = 0;
  int rep = 0;
  std::int64_t tta_ms = -1;
  std::string verdict;  // "correct" | "incorrect"
  std::string detail;   // empty when correct

  bool operator==(const ExperimentRow&) const = default;
};

/// Throws HarnessError when the plan is invalid for the topology or the
/// cluster cannot be reset between repetitions.
[[nodiscard]] std::vector<ExperimentRow> run_sl_experiment(ClusterHandle& cluster,
                                                           const ExperimentPlan& plan);
[[nodiscard]] std::vector<ExperimentRow> run_global_experiment(ClusterHandle& cluster,
                                                               const ExperimentPlan& plan);

/// The mode/subgroup state the monitored node must reach when `failed`
/// nodes are down: its own exclusions plus its connected component.
[[nodiscard]] std::string expected_mode_state(const Topology& topology, NodeId monitored,
                                              const std::set<NodeId>& failed);

/// Repeated approved de-escalation of every node to the least critical
/// level until the whole cluster reports it; false when rounds run out.
[[nodiscard]] bool sweep_reset(ClusterHandle& cluster, int max_rounds = 10);

// ---------------------------------------------------------------------------
// Results.

inline constexpr const char* kCsvHeader = "experiment,target,rep,tta_ms,verdict,detail";

void write_csv(std::ostream& out, const std::vector<ExperimentRow>& rows);

/// Throws Error on a malformed document.
[[nodiscard]] std::vector<ExperimentRow> read_csv(std::istream& in);

struct TargetSummary {
  NodeId target = 0;
  int total = 0;
  int correct = 0;
  // Over the correct repetitions' tta_ms; meaningful only when correct > 0.
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct Summary {
  std::string experiment;
  std::vector<TargetSummary> targets;
  double mean_of_medians = 0.0;  // over targets with at least one correct rep
  int total = 0;
  int correct = 0;
};

/// Linear-interpolation quantile over an unsorted sample; p in [0, 1].
[[nodiscard]] double quantile(std::vector<double> values, double p);

[[nodiscard]] std::vector<Summary> summarize(const std::vector<ExperimentRow>& rows);

/// Human-readable table, one block per experiment.
[[nodiscard]] std::string format_summary(const std::vector<Summary>& summaries);

}  // namespace saferd

#endif  // SAFERD_HARNESS_HPP
