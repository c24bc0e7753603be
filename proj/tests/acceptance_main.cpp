// Acceptance gate: every release-blocking behavior, one verdict line each.
// --suite sim runs the simulated-transport criteria; --suite real runs the
// loopback-socket timing criterion. Exit code 0 only when every line passes.
#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saferd/config.hpp"
#include "saferd/errors.hpp"
#include "saferd/harness.hpp"
#include "saferd/local_loop.hpp"
#include "saferd/node.hpp"
#include "saferd/real_cluster.hpp"
#include "saferd/seclevel.hpp"
#include "saferd/sim_cluster.hpp"
#include "saferd/topology.hpp"
#include "test_support.hpp"

using namespace saferd;

namespace {

constexpr int kHeartbeat = 1000;
constexpr int kTimeout = 300;

struct Outcome {
  std::string name;
  bool pass = false;
  std::string note;
  double seconds = 0.0;
};

using Verdict = std::pair<bool, std::string>;

Outcome run_criterion(const std::string& name, double budget_s,
                      const std::function<Verdict()>& body) {
  Outcome outcome;
  outcome.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    auto [pass, note] = body();
    outcome.pass = pass;
    outcome.note = std::move(note);
  } catch (const std::exception& error) {
    outcome.pass = false;
    outcome.note = std::string("unexpected error: ") + error.what();
  }
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (outcome.pass && budget_s > 0.0 && outcome.seconds >= budget_s) {
    std::ostringstream note;
    note << outcome.note << "; runtime exceeded the " << budget_s << " s budget";
    outcome.note = note.str();
    outcome.pass = false;
  }
  return outcome;
}

std::string show_ids(const std::set<NodeId>& ids) {
  std::ostringstream out;
  out << "{";
  bool first = true;
  for (const NodeId id : ids) {
    out << (first ? "" : ",") << id;
    first = false;
  }
  out << "}";
  return out.str();
}

ParsedConfig desk_edge8() { return test::edge8_config(test::desk_options()); }

/// Terminates `failed`, lets two full rounds run, then checks that every
/// live node's published subgroup equals its component in the traversal
/// oracle. On success `partition` holds the distinct subgroups seen.
bool subgroups_match_oracle(SimCluster& cluster, const std::set<NodeId>& failed,
                            std::vector<std::set<NodeId>>* partition, std::string* error) {
  cluster.run_until(0);
  for (const NodeId id : failed) {
    const auto down = cluster.observe(id, "POST", "/admin/terminate", "{}");
    if (!down || down->status != 200) {
      *error = "node " + std::to_string(id) + " did not accept termination";
      return false;
    }
  }
  cluster.run_until(cluster.network().now_ms() + 2LL * cluster.heartbeat_ms());

  const auto components = test::component_oracle(cluster.topology(), failed);
  std::set<std::set<NodeId>> seen;
  for (const NodeId id : cluster.topology().ids()) {
    if (failed.contains(id)) {
      continue;
    }
    const auto status = cluster.node(id).status();
    const std::set<NodeId> subgroup(status.subgroup.begin(), status.subgroup.end());
    const auto component =
        std::find_if(components.begin(), components.end(),
                     [&](const std::set<NodeId>& c) { return c.contains(id); });
    if (component == components.end() || subgroup != *component) {
      *error = "node " + std::to_string(id) + " reports subgroup " + show_ids(subgroup) +
               ", oracle says " +
               (component == components.end() ? std::string("<none>") : show_ids(*component));
      return false;
    }
    seen.insert(subgroup);
  }
  if (partition != nullptr) {
    partition->assign(seen.begin(), seen.end());
  }
  return true;
}

// Criterion: with one subsystem down, the live nodes' own traversal views
// split the tree into exactly the expected subgroups, for the reference
// deployment and for randomized trees under randomized failure sets.
Verdict subgroup_fidelity() {
  std::string error;

  // Reference tree, node 2 down: the canonical three-way split.
  {
    SimCluster cluster{desk_edge8()};
    std::vector<std::set<NodeId>> partition;
    if (!subgroups_match_oracle(cluster, {2}, &partition, &error)) {
      return {false, error};
    }
    const std::vector<std::set<NodeId>> want = {{1, 3, 5, 8}, {4, 7}, {6}};
    std::vector<std::set<NodeId>> sorted = partition;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::set<NodeId>> expected = want;
    std::sort(expected.begin(), expected.end());
    if (sorted != expected) {
      std::string got;
      for (const auto& group : partition) {
        got += show_ids(group);
      }
      return {false, "expected subgroups {1,3,5,8}{4,7}{6}, live nodes formed " + got};
    }
  }

  // Every single-node failure on the reference tree.
  for (NodeId failed = 1; failed <= 8; ++failed) {
    SimCluster cluster{desk_edge8()};
    if (!subgroups_match_oracle(cluster, {failed}, nullptr, &error)) {
      return {false, "single failure of node " + std::to_string(failed) + ": " + error};
    }
  }

  // Randomized trees under randomized multi-failure sets.
  std::mt19937_64 rng(8161);
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    Topology tree = test::random_tree(rng, 64);
    while (tree.ids().size() < 2) {
      tree = test::random_tree(rng, 64);
    }
    const auto ids = tree.ids();
    const int max_failures = std::max<int>(1, static_cast<int>(ids.size()) / 3);
    const int count = std::uniform_int_distribution<int>(1, max_failures)(rng);
    std::vector<NodeId> pool = ids;
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::set<NodeId> failed(pool.begin(), pool.begin() + count);

    ParsedConfig config;
    config.topology = std::make_shared<Topology>(std::move(tree));
    config.options = {{"heartbeat_ms", std::to_string(kHeartbeat)},
                      {"timeout_ms", std::to_string(kTimeout)}};
    SimCluster cluster{config};
    if (!subgroups_match_oracle(cluster, failed, nullptr, &error)) {
      return {false, "randomized trial " + std::to_string(trial + 1) + " (" +
                         std::to_string(ids.size()) + " nodes, " + std::to_string(count) +
                         " failed): " + error};
    }
  }

  return {true,
          "reference partition {1,3,5,8}{4,7}{6} reproduced; 8/8 single failures and " +
              std::to_string(trials) + "/" + std::to_string(trials) +
              " randomized failure sets match the traversal oracle"};
}

// Criterion: a level seeded at any node reaches the root in every run, and
// climbing the tree takes at most one control cycle per hop.
Verdict level_propagation() {
  const auto topology = test::edge8_topology();
  const int reps = 20;
  const int trigger = 2;
  int runs = 0;
  bool delta_always_exact = true;

  for (NodeId target = 2; target <= 8; ++target) {
    const int distance = topology->hop_distance(target, 1);
    for (int rep = 0; rep < reps; ++rep) {
      SimCluster cluster{desk_edge8()};
      cluster.run_until(0);
      const auto armed =
          cluster.observe(target, "POST", "/admin/trigger", R"({"level":2})");
      if (!armed || armed->status != 200) {
        return {false, "node " + std::to_string(target) + " did not accept the trigger"};
      }
      const bool reached = cluster.run_until(
          [&] { return cluster.node(1).status().level == trigger; },
          cluster.network().now_ms() + (distance + 3LL) * cluster.heartbeat_ms());
      if (!reached) {
        return {false, "root never adopted the level seeded at node " + std::to_string(target)};
      }

      std::optional<std::uint64_t> seeded_cycle;
      std::optional<std::uint64_t> root_cycle;
      for (const auto& record : cluster.sink().records()) {
        if (record.kind != kLevelKind || record.to_state != std::to_string(trigger)) {
          continue;
        }
        if (record.node == target && !seeded_cycle) {
          seeded_cycle = record.cycle;
        }
        if (record.node == 1 && !root_cycle) {
          root_cycle = record.cycle;
        }
      }
      if (!seeded_cycle || !root_cycle) {
        return {false, "missing adaptation records for target " + std::to_string(target)};
      }
      const auto delta = static_cast<std::int64_t>(*root_cycle - *seeded_cycle);
      if (delta > distance) {
        return {false, "target " + std::to_string(target) + ": root converged after " +
                           std::to_string(delta) + " cycles, tree distance is " +
                           std::to_string(distance)};
      }
      delta_always_exact = delta_always_exact && delta == distance;
      ++runs;
    }
  }

  std::string note = std::to_string(runs) + "/" + std::to_string(runs) +
                     " runs reached the root; convergence never exceeded the hop distance in "
                     "cycles";
  if (delta_always_exact) {
    note += " (and always equaled it)";
  }
  return {true, note};
}

// Criterion: with zero simulated latency, detecting a fresh failure costs
// the peer timeout and nothing more, while level adaptations stay below it.
Verdict decomposition_sim() {
  const std::vector<NodeId> targets = {2, 3, 4, 5, 6, 7, 8};
  const int reps = 5;

  SimCluster level_cluster{desk_edge8()};
  SimClusterHandle level_handle{level_cluster};
  const auto level_rows = run_sl_experiment(level_handle, {"sl", 1, targets, reps, 1202, 2});

  SimCluster mode_cluster{desk_edge8()};
  SimClusterHandle mode_handle{mode_cluster};
  const auto mode_rows =
      run_global_experiment(mode_handle, {"global", 1, targets, reps, 1202, 2});

  // One traversal step may legitimately stall for one more timeout; at zero
  // latency nothing does, so the observed upper edge is the timeout itself.
  const std::int64_t step_budget = kTimeout;
  std::int64_t level_max = 0;
  std::int64_t mode_min = -1;
  std::int64_t mode_max = -1;
  for (const auto& row : level_rows) {
    if (row.verdict != "correct") {
      return {false, "level repetition " + std::to_string(row.rep) + " on target " +
                         std::to_string(row.target) + ": " + row.detail};
    }
    level_max = std::max(level_max, row.tta_ms);
    if (row.tta_ms >= kTimeout) {
      return {false, "level adaptation on target " + std::to_string(row.target) + " took " +
                         std::to_string(row.tta_ms) + " ms, not below the " +
                         std::to_string(kTimeout) + " ms timeout"};
    }
  }
  for (const auto& row : mode_rows) {
    if (row.verdict != "correct") {
      return {false, "mode repetition " + std::to_string(row.rep) + " on target " +
                         std::to_string(row.target) + ": " + row.detail};
    }
    mode_min = mode_min < 0 ? row.tta_ms : std::min(mode_min, row.tta_ms);
    mode_max = std::max(mode_max, row.tta_ms);
    if (row.tta_ms < kTimeout || row.tta_ms > kTimeout + step_budget) {
      return {false, "mode detection on target " + std::to_string(row.target) + " took " +
                         std::to_string(row.tta_ms) + " ms, outside [" +
                         std::to_string(kTimeout) + ", " +
                         std::to_string(kTimeout + step_budget) + "] ms"};
    }
  }

  std::ostringstream note;
  note << mode_rows.size() << "/" << mode_rows.size() << " mode detections in ["
       << kTimeout << ", " << kTimeout + step_budget << "] ms of virtual time (observed "
       << mode_min << ".." << mode_max << "); " << level_rows.size() << "/"
       << level_rows.size() << " level adaptations below the timeout (max " << level_max
       << " ms)";
  return {true, note.str()};
}

// Criterion: after a revive, every node is back to full adaptation with the
// complete traversal view within one recovery cycle plus one heartbeat.
Verdict recovery_restoration() {
  SimCluster cluster{desk_edge8()};
  cluster.run_until(0);
  const auto ids = cluster.topology().ids();
  std::mt19937_64 rng(5042);
  const int rounds = 50;

  for (int round = 1; round <= rounds; ++round) {
    const NodeId target = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
    cluster.run_until(cluster.network().now_ms() +
                      std::uniform_int_distribution<int>(0, kHeartbeat - 1)(rng));
    const auto down = cluster.observe(target, "POST", "/admin/terminate", "{}");
    if (!down || down->status != 200) {
      return {false, "round " + std::to_string(round) + ": termination rejected"};
    }
    const int dwell = std::uniform_int_distribution<int>(0, 3)(rng);
    cluster.run_until(cluster.network().now_ms() + static_cast<std::int64_t>(dwell) * kHeartbeat);
    std::vector<std::uint64_t> before(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      before[i] = cluster.node(ids[i]).status().cycle;
    }
    const auto up = cluster.observe(target, "POST", "/admin/revive", "{}");
    if (!up || up->status != 200) {
      return {false, "round " + std::to_string(round) + ": revive rejected"};
    }

    // Timeout charges shift each loop's cadence off the common grid, so the
    // budget is per node: one recovery cycle (re-probing and re-including
    // the peer) plus one heartbeat cycle (refreshing the traversal view)
    // means two completed cycles of its own after the revive.
    const bool two_cycles_each = cluster.run_until(
        [&] {
          for (std::size_t i = 0; i < ids.size(); ++i) {
            if (cluster.node(ids[i]).status().cycle < before[i] + 2) {
              return false;
            }
          }
          return true;
        },
        cluster.network().now_ms() + 4LL * kHeartbeat);
    if (!two_cycles_each) {
      return {false, "round " + std::to_string(round) +
                         ": some node did not complete two cycles after the revive"};
    }

    for (const NodeId id : ids) {
      const auto status = cluster.node(id).status();
      const std::set<NodeId> subgroup(status.subgroup.begin(), status.subgroup.end());
      if (status.terminated || status.mode != "FA" || !status.excluded.empty() ||
          subgroup != std::set<NodeId>(ids.begin(), ids.end())) {
        return {false, "round " + std::to_string(round) + " (node " + std::to_string(target) +
                           " revived): node " + std::to_string(id) + " reports mode " +
                           status.mode + " subgroup " + show_ids(subgroup)};
      }
    }
  }
  return {true, std::to_string(rounds) + "/" + std::to_string(rounds) +
                    " randomized terminate/revive rounds restored full adaptation at every "
                    "node within one recovery and one heartbeat cycle"};
}

// Criterion: randomized suites over the merge rule, the transition planner,
// the approval gate, and the per-cycle level choice.
Verdict property_suites() {
  const int cases = 1000;

  // Merging picks the most critical (lowest) ordinal regardless of order.
  {
    std::mt19937_64 rng(101);
    for (int i = 0; i < cases; ++i) {
      const LevelSet levels = test::random_levels(rng);
      std::uniform_int_distribution<int> pick(1, levels.count());
      std::vector<int> ordinals(static_cast<std::size_t>(pick(rng)));
      for (int& ordinal : ordinals) {
        ordinal = pick(rng);
      }
      const int expected = *std::min_element(ordinals.begin(), ordinals.end());
      const int merged = most_critical(ordinals, levels);
      std::shuffle(ordinals.begin(), ordinals.end(), rng);
      if (merged != expected || most_critical(ordinals, levels) != expected) {
        return {false, "merge case " + std::to_string(i + 1) + ": got " +
                           std::to_string(merged) + ", minimum is " + std::to_string(expected)};
      }
    }
  }

  // Planned transitions are legal chains of minimum length.
  {
    std::mt19937_64 rng(202);
    for (int i = 0; i < cases; ++i) {
      const LevelSet levels = test::random_levels(rng);
      const TransitionTable table = test::random_table(rng, levels);
      std::uniform_int_distribution<int> pick(1, levels.count());
      const int from = pick(rng);
      const int to = pick(rng);
      const SLStateMachine machine(levels, table, from, "token");
      const auto plan = machine.plan_transition(to);
      const auto shortest = test::step_distance_oracle(table, levels.count(), from, to);
      if (!shortest || static_cast<int>(plan.size()) != *shortest) {
        return {false, "plan case " + std::to_string(i + 1) + ": length " +
                           std::to_string(plan.size()) + " does not match the shortest path"};
      }
      int at = from;
      for (const auto& [step_from, step_to] : plan) {
        if (step_from != at || !table.allows(step_from, step_to)) {
          return {false, "plan case " + std::to_string(i + 1) + ": illegal step " +
                             std::to_string(step_from) + "->" + std::to_string(step_to)};
        }
        at = step_to;
      }
      if (at != to) {
        return {false, "plan case " + std::to_string(i + 1) + ": path ends at " +
                           std::to_string(at) + ", target " + std::to_string(to)};
      }
    }
  }

  // A de-escalation without the right approval changes nothing.
  {
    std::mt19937_64 rng(303);
    const std::vector<std::string> bad_tokens = {"", "wrong", "Secret", "secret "};
    for (int i = 0; i < cases; ++i) {
      const LevelSet levels = test::random_levels(rng);
      const TransitionTable table = test::random_table(rng, levels);
      std::uniform_int_distribution<int> pick(1, levels.count());
      const int start = pick(rng);
      const int target = pick(rng);
      SLStateMachine machine(levels, table, start, "secret");
      int executed = 0;
      bool rejected = false;
      try {
        machine.request_deescalation(
            target, bad_tokens[rng() % bad_tokens.size()],
            [&](const SecurityLevel&) { ++executed; });
      } catch (const ApprovalError&) {
        rejected = true;
      }
      if (!rejected || executed != 0 || machine.current() != start) {
        return {false, "approval case " + std::to_string(i + 1) +
                           ": state or countermeasures moved without a valid approval"};
      }
    }
  }

  // The level a cycle settles on is the minimum over its inputs.
  {
    std::mt19937_64 rng(404);
    for (int i = 0; i < cases; ++i) {
      const LevelSet levels = test::random_levels(rng);
      std::uniform_int_distribution<int> pick(1, levels.count());
      const int current = pick(rng);
      std::vector<SecurityEvent> events(rng() % 4);
      std::vector<PeerLevelReport> reports(rng() % 4);
      int expected = current;
      for (auto& event : events) {
        event.probe = "p";
        event.demanded_level = pick(rng);
        expected = std::min(expected, event.demanded_level);
      }
      NodeId peer = 2;
      for (auto& report : reports) {
        report.peer = peer++;
        report.level = pick(rng);
        expected = std::min(expected, report.level);
      }
      const int chosen = analyze_demand(events, reports, current, levels);
      if (chosen != expected) {
        return {false, "cycle-ordinal case " + std::to_string(i + 1) + ": chose " +
                           std::to_string(chosen) + ", minimum over inputs is " +
                           std::to_string(expected)};
      }
    }
  }

  return {true, "4x" + std::to_string(cases) +
                    " cases: merge equals the minimum under permutation; planned paths are "
                    "shortest and legal; unapproved de-escalations never change state; the "
                    "cycle ordinal equals the minimum oracle"};
}

// Criterion: equal seeds on the simulated transport reproduce the full
// result set byte for byte.
Verdict determinism() {
  const std::vector<NodeId> targets = {2, 3, 4, 5, 6, 7, 8};
  const auto run_once = [&](std::uint64_t seed) {
    SimCluster cluster{desk_edge8()};
    SimClusterHandle handle{cluster};
    auto rows = run_sl_experiment(handle, {"sl", 1, targets, 3, seed, 2});
    const auto modes = run_global_experiment(handle, {"global", 1, targets, 2, seed, 2});
    rows.insert(rows.end(), modes.begin(), modes.end());
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
  };

  const std::string first = run_once(4242);
  const std::string second = run_once(4242);
  if (first != second) {
    return {false, "equal-seed runs differ"};
  }
  const auto lines = static_cast<std::size_t>(std::count(first.begin(), first.end(), '\n'));
  const std::size_t expected_lines = 1 + targets.size() * 3 + targets.size() * 2;
  if (lines != expected_lines) {
    return {false, "expected " + std::to_string(expected_lines) + " CSV lines, got " +
                       std::to_string(lines)};
  }
  return {true, "two equal-seed runs produced byte-identical CSV (" + std::to_string(lines) +
                    " lines)"};
}

// Criterion: on real loopback sockets with a 3000 ms peer timeout, mode
// detection is dominated by that timeout while level adaptation is not:
// the medians differ by at least 2500 ms.
Verdict decomposition_real() {
  const ParsedConfig config = parse_config(test::edge8_document_real(
      18900, "option heartbeat_ms=3100\noption timeout_ms=3000\n"));
  RealCluster cluster{config};
  cluster.start();
  RealClusterHandle handle{cluster};

  const int reps = 10;
  std::vector<ExperimentRow> rows = run_sl_experiment(handle, {"sl", 1, {2}, reps, 7, 2});
  const auto mode_rows = run_global_experiment(handle, {"global", 1, {2, 8}, reps, 7, 2});
  rows.insert(rows.end(), mode_rows.begin(), mode_rows.end());
  cluster.stop();

  for (const auto& row : rows) {
    if (row.verdict != "correct") {
      return {false, row.experiment + " repetition " + std::to_string(row.rep) + " on target " +
                         std::to_string(row.target) + ": " + row.detail};
    }
  }

  double level_median = 0.0;
  std::vector<std::pair<NodeId, double>> mode_medians;
  for (const Summary& summary : summarize(rows)) {
    for (const TargetSummary& target : summary.targets) {
      if (summary.experiment == "sl") {
        level_median = target.median;
      } else {
        mode_medians.emplace_back(target.target, target.median);
      }
    }
  }

  std::ostringstream note;
  note << std::fixed << std::setprecision(1);
  note << rows.size() << "/" << rows.size() << " repetitions correct; level median "
       << level_median << " ms";
  for (const auto& [target, median] : mode_medians) {
    note << ", mode median " << median << " ms (target " << target << ")";
    if (median - level_median < 2500.0) {
      note << "; gap below 2500 ms";
      return {false, note.str()};
    }
  }
  note << "; every gap >= 2500 ms";
  return {true, note.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::string suite;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--suite" && i + 1 < argc) {
      suite = argv[++i];
    }
  }
  if (suite != "sim" && suite != "real") {
    std::cerr << "usage: acceptance --suite sim|real\n";
    return 2;
  }

  std::vector<Outcome> outcomes;
  if (suite == "sim") {
    outcomes.push_back(run_criterion("subgroup fidelity", 30.0, subgroup_fidelity));
    outcomes.push_back(run_criterion("level propagation", 60.0, level_propagation));
    outcomes.push_back(
        run_criterion("detection-time decomposition (simulated)", 0.0, decomposition_sim));
    outcomes.push_back(run_criterion("recovery to full adaptation", 60.0, recovery_restoration));
    outcomes.push_back(run_criterion("randomized property suites", 10.0, property_suites));
    outcomes.push_back(run_criterion("determinism", 30.0, determinism));
  } else {
    outcomes.push_back(
        run_criterion("detection-time decomposition (loopback)", 600.0, decomposition_real));
  }

  bool all_pass = true;
  std::cout << std::fixed << std::setprecision(1);
  for (const Outcome& outcome : outcomes) {
    std::cout << (outcome.pass ? "[PASS] " : "[FAIL] ") << outcome.name << ": " << outcome.note
              << " (" << outcome.seconds << " s)\n";
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
