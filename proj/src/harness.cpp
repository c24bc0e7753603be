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
#include "saferd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

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

/// Keeps the detail field a single CSV cell.
std::string sanitize_detail(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') {
      c = ';';
    }
  }
  return text;
}

std::optional<AdaptationRecord> find_after(const std::vector<AdaptationRecord>& records,
                                           std::size_t from, NodeId node,
                                           const std::string& kind,
                                           const std::optional<std::string>& to_state) {
  for (std::size_t i = from; i < records.size(); ++i) {
    const AdaptationRecord& record = records[i];
    if (record.node != node || record.kind != kind) {
      continue;
    }
    if (to_state && record.to_state != *to_state) {
      continue;
    }
    return record;
  }
  return std::nullopt;
}

std::string approval_token_of(const ParsedConfig& config) {
  if (const auto it = config.options.find("approval_token"); it != config.options.end()) {
    return it->second;
  }
  return kDefaultApprovalToken;
}

void validate_plan(const ClusterHandle& cluster, const ExperimentPlan& plan) {
  const Topology& topology = cluster.topology();
  if (plan.reps <= 0) {
    throw HarnessError("repetitions must be positive");
  }
  if (!topology.contains(plan.monitored)) {
    throw HarnessError("monitored node " + std::to_string(plan.monitored) +
                       " is not part of the topology");
  }
  if (plan.targets.empty()) {
    throw HarnessError("no targets");
  }
  std::set<NodeId> seen;
  for (const NodeId target : plan.targets) {
    if (!topology.contains(target)) {
      throw HarnessError("target " + std::to_string(target) + " is not part of the topology");
    }
    if (target == plan.monitored) {
      throw HarnessError("a target cannot be the monitored node");
    }
    if (!seen.insert(target).second) {
      throw HarnessError("duplicate target " + std::to_string(target));
    }
  }
  const LevelSet& levels = cluster.cluster_config().levels;
  if (!levels.defines(plan.trigger_level) || plan.trigger_level >= levels.least_critical()) {
    throw HarnessError("trigger level must be a defined level more critical than the default");
  }
}

/// Every control loop has completed at least one cycle and answers status.
void settle(ClusterHandle& cluster) {
  const auto ids = cluster.topology().ids();
  const bool up = cluster.wait(
      [&] {
        return std::all_of(ids.begin(), ids.end(), [&](NodeId id) {
          const auto status = fetch_status(cluster, id);
          return status && status->cycle >= 1;
        });
      },
      2LL * cluster.heartbeat_ms() + 2LL * cluster.timeout_ms());
  if (!up) {
    throw HarnessError("cluster did not reach a running state");
  }
}

bool fully_recovered(ClusterHandle& cluster) {
  const auto ids = cluster.topology().ids();
  return std::all_of(ids.begin(), ids.end(), [&](NodeId id) {
    const auto status = fetch_status(cluster, id);
    return status && !status->terminated && status->mode == "FA" && status->excluded.empty() &&
           status->subgroup == ids;
  });
}

}  // namespace

const ParsedConfig& SimClusterHandle::cluster_config() const { return cluster_.cluster_config(); }

std::optional<wire::AdminOutcome> SimClusterHandle::admin(NodeId id, const std::string& verb,
                                                          const nlohmann::json& body) {
  const std::string method = verb == "status" ? "GET" : "POST";
  const std::string path = std::string(wire::kAdminPrefix) + verb;
  const std::string payload = method == "GET" ? "" : body.dump();
  const auto response = cluster_.observe(id, method, path, payload);
  if (!response) {
    return std::nullopt;
  }
  wire::AdminOutcome outcome;
  outcome.status = response->status;
  outcome.body = nlohmann::json::parse(response->body, nullptr, false);
  if (outcome.body.is_discarded()) {
    outcome.body = nlohmann::json(response->body);
  }
  return outcome;
}

std::vector<AdaptationRecord> SimClusterHandle::records() { return cluster_.sink().records(); }

bool SimClusterHandle::wait(const std::function<bool()>& pred, std::int64_t budget_ms) {
  return cluster_.run_until(pred, cluster_.network().now_ms() + budget_ms);
}

void SimClusterHandle::delay(std::int64_t delta_ms) {
  cluster_.run_until(cluster_.network().now_ms() + delta_ms);
}

const ParsedConfig& RealClusterHandle::cluster_config() const {
  return cluster_.cluster_config();
}

std::optional<wire::AdminOutcome> RealClusterHandle::admin(NodeId id, const std::string& verb,
                                                           const nlohmann::json& body) {
  const std::string method = verb == "status" ? "GET" : "POST";
  const std::string path = std::string(wire::kAdminPrefix) + verb;
  const std::string payload = method == "GET" ? "" : body.dump();
  const std::string& addr = cluster_.topology().spec(id).address;
  const auto response =
      channel_.exchange(addr, method, path, payload, cluster_.timeout_ms(), "harness");
  if (!response) {
    return std::nullopt;
  }
  wire::AdminOutcome outcome;
  outcome.status = response->status;
  outcome.body = nlohmann::json::parse(response->body, nullptr, false);
  if (outcome.body.is_discarded()) {
    outcome.body = nlohmann::json(response->body);
  }
  return outcome;
}

std::vector<AdaptationRecord> RealClusterHandle::records() { return cluster_.sink().records(); }

bool RealClusterHandle::wait(const std::function<bool()>& pred, std::int64_t budget_ms) {
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(budget_ms);
  while (true) {
    if (pred()) {
      return true;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      return false;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void RealClusterHandle::delay(std::int64_t delta_ms) {
  std::this_thread::sleep_for(std::chrono::milliseconds(delta_ms));
}

std::optional<wire::StatusReport> fetch_status(ClusterHandle& cluster, NodeId id) {
  const auto outcome = cluster.admin(id, "status", nlohmann::json::object());
  if (!outcome || outcome->status != 200 || !outcome->body.is_object()) {
    return std::nullopt;
  }
  return wire::decode_status(outcome->body);
}

std::string expected_mode_state(const Topology& topology, NodeId monitored,
                                const std::set<NodeId>& failed) {
  const auto components = topology.subgroups_after_failures(failed);
  std::set<NodeId> component;
  for (const auto& candidate : components) {
    if (candidate.contains(monitored)) {
      component = candidate;
      break;
    }
  }
  AdaptationMode mode;
  for (const NodeId neighbor : topology.neighbors(monitored)) {
    if (failed.contains(neighbor)) {
      mode.excluded.insert(neighbor);
    }
  }
  return mode.label() + "+" + join_ids(component);
}

bool sweep_reset(ClusterHandle& cluster, int max_rounds) {
  const auto ids = cluster.topology().ids();
  const int least = cluster.cluster_config().levels.least_critical();
  const std::string token = approval_token_of(cluster.cluster_config());
  const nlohmann::json command = {{"target_level", least}, {"approval", token}};
  const auto all_least = [&] {
    return std::all_of(ids.begin(), ids.end(), [&](NodeId id) {
      const auto status = fetch_status(cluster, id);
      return status && status->level == least;
    });
  };
  const std::int64_t budget = 2LL * cluster.heartbeat_ms() + cluster.timeout_ms();
  if (all_least()) {
    return true;  // nothing to reset, and nothing gets parked
  }
  for (int round = 0; round < max_rounds; ++round) {
    // Every node gets an approval, not just the currently elevated ones:
    // loops run unsynchronized, so an elevated report can reach a node
    // after it was scanned, and a reset node can re-adopt a peer's stale
    // level. A parked approval ends either bounce at the next cycle end.
    for (const NodeId id : ids) {
      (void)cluster.admin(id, "deescalate", command);
    }
    if (!cluster.wait(all_least, budget)) {
      continue;
    }
    // Approvals apply only at a cycle end. Give every loop two full
    // periods to drain what is still parked, so no leftover approval can
    // swallow an escalation after this returns.
    cluster.delay(budget);
    if (all_least()) {
      return true;
    }
  }
  return false;
}

std::vector<ExperimentRow> run_sl_experiment(ClusterHandle& cluster,
                                             const ExperimentPlan& plan) {
  validate_plan(cluster, plan);
  settle(cluster);
  if (!sweep_reset(cluster)) {
    throw HarnessError("cluster did not reach the default level before the experiment");
  }

  std::mt19937_64 rng(plan.seed);
  std::uniform_int_distribution<std::int64_t> phase(0, cluster.heartbeat_ms() - 1);
  const std::int64_t budget = 3LL * cluster.heartbeat_ms() + 2LL * cluster.timeout_ms();
  const std::string want = std::to_string(plan.trigger_level);

  std::vector<ExperimentRow> rows;
  for (const NodeId target : plan.targets) {
    for (int rep = 1; rep <= plan.reps; ++rep) {
      cluster.delay(phase(rng));
      const std::size_t baseline = cluster.records().size();
      ExperimentRow row{"sl", target, rep, -1, "incorrect", ""};

      const auto armed =
          cluster.admin(target, "trigger", {{"level", plan.trigger_level}});
      if (!armed || armed->status != 200) {
        row.detail = "trigger not accepted";
      } else {
        std::optional<AdaptationRecord> hit;
        (void)cluster.wait(
            [&] {
              hit = find_after(cluster.records(), baseline, target, kLevelKind, want);
              return hit.has_value();
            },
            budget);
        if (hit) {
          row.tta_ms = hit->duration_ms;
          row.verdict = "correct";
        } else {
          row.detail = "no security-level adaptation within budget";
        }
      }
      rows.push_back(row);
      if (!sweep_reset(cluster)) {
        throw HarnessError("cluster did not reset after a repetition");
      }
    }
  }
  return rows;
}

std::vector<ExperimentRow> run_global_experiment(ClusterHandle& cluster,
                                                 const ExperimentPlan& plan) {
  validate_plan(cluster, plan);
  settle(cluster);

  std::mt19937_64 rng(plan.seed);
  std::uniform_int_distribution<std::int64_t> phase(0, cluster.heartbeat_ms() - 1);
  const std::int64_t detect_budget = 3LL * cluster.heartbeat_ms() + 2LL * cluster.timeout_ms();
  const std::int64_t recover_budget = 4LL * cluster.heartbeat_ms() + 2LL * cluster.timeout_ms();

  std::vector<ExperimentRow> rows;
  for (const NodeId target : plan.targets) {
    const std::string want =
        expected_mode_state(cluster.topology(), plan.monitored, {target});
    for (int rep = 1; rep <= plan.reps; ++rep) {
      cluster.delay(phase(rng));
      const std::size_t baseline = cluster.records().size();
      ExperimentRow row{"global", target, rep, -1, "incorrect", ""};

      const auto killed = cluster.admin(target, "terminate", nlohmann::json::object());
      if (!killed || killed->status != 200) {
        throw HarnessError("terminate was not accepted by node " + std::to_string(target));
      }
      std::optional<AdaptationRecord> hit;
      (void)cluster.wait(
          [&] {
            hit = find_after(cluster.records(), baseline, plan.monitored, kModeKind,
                             std::nullopt);
            return hit.has_value();
          },
          detect_budget);
      if (hit) {
        row.tta_ms = hit->duration_ms;
        if (hit->to_state == want) {
          row.verdict = "correct";
        } else {
          row.detail = sanitize_detail("reached " + hit->to_state + " want " + want);
        }
      } else {
        row.detail = "no mode adaptation within budget";
      }

      const auto revived = cluster.admin(target, "revive", nlohmann::json::object());
      if (!revived || revived->status != 200) {
        throw HarnessError("revive was not accepted by node " + std::to_string(target));
      }
      if (!cluster.wait([&] { return fully_recovered(cluster); }, recover_budget)) {
        throw HarnessError("cluster did not recover after reviving node " +
                           std::to_string(target));
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_csv(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  out << kCsvHeader << '\n';
  for (const ExperimentRow& row : rows) {
    out << row.experiment << ',' << row.target << ',' << row.rep << ',' << row.tta_ms << ','
        << row.verdict << ',' << sanitize_detail(row.detail) << '\n';
  }
}

std::vector<ExperimentRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error("missing or wrong results header");
  }
  std::vector<ExperimentRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (int cut = 0; cut < 5; ++cut) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos) {
        throw Error("line " + std::to_string(number) + ": expected 6 fields");
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    fields.push_back(line.substr(start));

    ExperimentRow row;
    row.experiment = fields[0];
    std::uint32_t target = 0;
    std::int64_t rep = 0;
    std::int64_t tta = 0;
    if (row.experiment.empty() || !detail::parse_u32(fields[1], target) ||
        !detail::parse_i64(fields[2], rep) || rep <= 0 || !detail::parse_i64(fields[3], tta)) {
      throw Error("line " + std::to_string(number) + ": malformed row");
    }
    if (fields[4] != "correct" && fields[4] != "incorrect") {
      throw Error("line " + std::to_string(number) + ": bad verdict '" + fields[4] + "'");
    }
    row.target = target;
    row.rep = static_cast<int>(rep);
    row.tta_ms = tta;
    row.verdict = fields[4];
    row.detail = fields[5];
    rows.push_back(row);
  }
  return rows;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw Error("quantile of an empty sample");
  }
  std::sort(values.begin(), values.end());
  p = std::clamp(p, 0.0, 1.0);
  const double h = static_cast<double>(values.size() - 1) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<Summary> summarize(const std::vector<ExperimentRow>& rows) {
  std::vector<Summary> summaries;
  const auto summary_of = [&](const std::string& experiment) -> Summary& {
    for (Summary& summary : summaries) {
      if (summary.experiment == experiment) {
        return summary;
      }
    }
    summaries.push_back(Summary{experiment, {}, 0.0, 0, 0});
    return summaries.back();
  };
  const auto target_of = [](Summary& summary, NodeId target) -> TargetSummary& {
    for (TargetSummary& entry : summary.targets) {
      if (entry.target == target) {
        return entry;
      }
    }
    summary.targets.push_back(TargetSummary{target, 0, 0, 0.0, 0.0, 0.0, 0.0, 0.0});
    return summary.targets.back();
  };

  std::map<std::pair<std::string, NodeId>, std::vector<double>> samples;
  for (const ExperimentRow& row : rows) {
    Summary& summary = summary_of(row.experiment);
    TargetSummary& target = target_of(summary, row.target);
    ++summary.total;
    ++target.total;
    if (row.verdict == "correct") {
      ++summary.correct;
      ++target.correct;
      samples[{row.experiment, row.target}].push_back(static_cast<double>(row.tta_ms));
    }
  }
  for (Summary& summary : summaries) {
    double median_sum = 0.0;
    int median_count = 0;
    for (TargetSummary& target : summary.targets) {
      const auto& sample = samples[{summary.experiment, target.target}];
      if (sample.empty()) {
        continue;
      }
      target.min = quantile(sample, 0.0);
      target.q1 = quantile(sample, 0.25);
      target.median = quantile(sample, 0.5);
      target.q3 = quantile(sample, 0.75);
      target.max = quantile(sample, 1.0);
      median_sum += target.median;
      ++median_count;
    }
    summary.mean_of_medians = median_count > 0 ? median_sum / median_count : 0.0;
  }
  return summaries;
}

std::string format_summary(const std::vector<Summary>& summaries) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  for (const Summary& summary : summaries) {
    const double rate =
        summary.total > 0
            ? 100.0 * static_cast<double>(summary.correct) / static_cast<double>(summary.total)
            : 0.0;
    out << "experiment " << summary.experiment << ": " << summary.correct << "/"
        << summary.total << " correct (" << rate << "%)\n";
    out << "  " << std::setw(6) << "target" << std::setw(6) << "n" << std::setw(9) << "correct"
        << std::setw(10) << "min" << std::setw(10) << "q1" << std::setw(10) << "median"
        << std::setw(10) << "q3" << std::setw(10) << "max" << "\n";
    for (const TargetSummary& target : summary.targets) {
      out << "  " << std::setw(6) << target.target << std::setw(6) << target.total
          << std::setw(9) << target.correct;
      if (target.correct > 0) {
        out << std::setw(10) << target.min << std::setw(10) << target.q1 << std::setw(10)
            << target.median << std::setw(10) << target.q3 << std::setw(10) << target.max;
      } else {
        out << std::setw(10) << "-" << std::setw(10) << "-" << std::setw(10) << "-"
            << std::setw(10) << "-" << std::setw(10) << "-";
      }
      out << "\n";
    }
    out << "  mean of per-target medians: " << summary.mean_of_medians << " ms\n";
  }
  return out.str();
}

}  // namespace saferd
