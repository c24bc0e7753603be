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
#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "saferd/config.hpp"
#include "saferd/errors.hpp"
#include "saferd/harness.hpp"
#include "saferd/http_transport.hpp"
#include "saferd/real_cluster.hpp"
#include "saferd/sim_cluster.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

struct TimingFlags {
  bool paper = false;
  bool heartbeat_set = false;
  bool timeout_set = false;
  int heartbeat_ms = 1000;
  int timeout_ms = 300;
};

/// Precedence: explicit flags beat --paper-timings beats the config file
/// beats the desk defaults (1000/300 ms).
void apply_timing(saferd::ParsedConfig& config, const TimingFlags& timing) {
  const auto set = [&](const char* key, int value) {
    config.options[key] = std::to_string(value);
  };
  if (timing.paper) {
    set("heartbeat_ms", 10000);
    set("timeout_ms", 3000);
  }
  if (timing.heartbeat_set) {
    set("heartbeat_ms", timing.heartbeat_ms);
  }
  if (timing.timeout_set) {
    set("timeout_ms", timing.timeout_ms);
  }
  if (!config.options.contains("heartbeat_ms")) {
    set("heartbeat_ms", 1000);
  }
  if (!config.options.contains("timeout_ms")) {
    set("timeout_ms", 300);
  }
}

saferd::ParsedConfig load_config(const std::string& path, const TimingFlags& timing) {
  saferd::ParsedConfig config = saferd::parse_config(saferd::read_text_file(path));
  apply_timing(config, timing);
  return config;
}

std::vector<saferd::NodeId> resolve_targets(const saferd::Topology& topology,
                                            saferd::NodeId monitored,
                                            const std::string& spec) {
  std::vector<saferd::NodeId> targets;
  if (spec == "all") {
    for (const saferd::NodeId id : topology.ids()) {
      if (id != monitored) {
        targets.push_back(id);
      }
    }
    return targets;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    const std::string item =
        comma == std::string::npos ? spec.substr(start) : spec.substr(start, comma - start);
    try {
      const unsigned long value = std::stoul(item);
      targets.push_back(static_cast<saferd::NodeId>(value));
    } catch (const std::exception&) {
      throw saferd::HarnessError("bad target '" + item + "' (want node ids or 'all')");
    }
    if (comma == std::string::npos) {
      break;
    }
    start = comma + 1;
  }
  return targets;
}

int run_node_command(const std::string& config_path, saferd::NodeId id,
                     const TimingFlags& timing) {
  const saferd::ParsedConfig parsed = load_config(config_path, timing);
  saferd::NodeConfig node_config = saferd::node_config_from(parsed, id);
  const std::string addr = node_config.topology->spec(id).address;

  saferd::SteadyClock clock;
  saferd::HttpChannel channel;
  saferd::StreamSink sink(std::cout);
  saferd::RealNodeRuntime runtime(std::move(node_config), channel, clock, &sink);
  runtime.start();
  std::cerr << "node " << id << " serving on " << addr << " (ctrl-c to stop)\n";

  install_signal_handlers();
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  runtime.stop();
  return 0;
}

int run_spawn_command(const std::string& config_path, const TimingFlags& timing) {
  const saferd::ParsedConfig parsed = load_config(config_path, timing);
  saferd::RealCluster cluster(parsed);
  cluster.start();
  std::cerr << "cluster of " << parsed.topology->size() << " nodes running (ctrl-c to stop)\n";

  install_signal_handlers();
  std::size_t printed = 0;
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    const auto lines = cluster.sink().lines();
    for (; printed < lines.size(); ++printed) {
      std::cout << lines[printed] << "\n";
    }
    std::cout.flush();
  }
  cluster.stop();
  return 0;
}

std::vector<saferd::ExperimentRow> run_plans(saferd::ClusterHandle& handle,
                                             const std::vector<std::string>& kinds,
                                             saferd::ExperimentPlan plan) {
  std::vector<saferd::ExperimentRow> rows;
  for (const std::string& kind : kinds) {
    plan.kind = kind;
    const auto batch = kind == "sl" ? saferd::run_sl_experiment(handle, plan)
                                    : saferd::run_global_experiment(handle, plan);
    rows.insert(rows.end(), batch.begin(), batch.end());
  }
  return rows;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw saferd::HarnessError("cannot write " + path);
  }
  for (const std::string& line : lines) {
    out << line << '\n';
  }
}

int run_harness_command(const std::string& config_path, const TimingFlags& timing,
                        const std::string& experiment, const std::string& target_spec,
                        saferd::NodeId monitored, int reps, std::uint64_t seed,
                        int trigger_level, bool sim, int latency_ms, int jitter_ms,
                        const std::string& out_path, const std::string& log_path) {
  const saferd::ParsedConfig parsed = load_config(config_path, timing);

  saferd::ExperimentPlan plan;
  plan.monitored = monitored;
  plan.targets = resolve_targets(*parsed.topology, monitored, target_spec);
  plan.reps = reps;
  plan.seed = seed;
  plan.trigger_level = trigger_level;
  const std::vector<std::string> kinds =
      experiment == "both" ? std::vector<std::string>{"sl", "global"}
                           : std::vector<std::string>{experiment};

  std::vector<saferd::ExperimentRow> rows;
  std::vector<std::string> log_lines;
  if (sim) {
    saferd::SimNetwork::Options options;
    options.seed = seed;
    options.latency_ms = latency_ms;
    options.jitter_ms = jitter_ms;
    saferd::SimCluster cluster(parsed, options);
    saferd::SimClusterHandle handle(cluster);
    rows = run_plans(handle, kinds, plan);
    log_lines = cluster.sink().lines();
  } else {
    saferd::RealCluster cluster(parsed);
    cluster.start();
    saferd::RealClusterHandle handle(cluster);
    rows = run_plans(handle, kinds, plan);
    cluster.stop();
    log_lines = cluster.sink().lines();
  }

  if (out_path == "-") {
    saferd::write_csv(std::cout, rows);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      throw saferd::HarnessError("cannot write " + out_path);
    }
    saferd::write_csv(out, rows);
  }
  if (!log_path.empty()) {
    write_lines(log_path, log_lines);
  }
  std::cerr << saferd::format_summary(saferd::summarize(rows));

  const bool all_correct = std::all_of(rows.begin(), rows.end(), [](const auto& row) {
    return row.verdict == "correct";
  });
  return all_correct ? 0 : 1;
}

int run_summarize_command(const std::string& in_path) {
  std::vector<saferd::ExperimentRow> rows;
  if (in_path == "-") {
    rows = saferd::read_csv(std::cin);
  } else {
    std::ifstream in(in_path, std::ios::binary);
    if (!in) {
      throw saferd::HarnessError("cannot read " + in_path);
    }
    rows = saferd::read_csv(in);
  }
  std::cout << saferd::format_summary(saferd::summarize(rows));
  const bool all_correct = std::all_of(rows.begin(), rows.end(), [](const auto& row) {
    return row.verdict == "correct";
  });
  return all_correct ? 0 : 1;
}

int run_admin_command(const std::string& addr, const std::string& verb, int level,
                      int target_level, const std::string& approval, int timeout_ms) {
  nlohmann::json body = nlohmann::json::object();
  if (verb == "trigger") {
    body["level"] = level;
  } else if (verb == "deescalate") {
    body["target_level"] = target_level;
    body["approval"] = approval;
  }
  saferd::HttpChannel channel;
  const std::string method = verb == "status" ? "GET" : "POST";
  const std::string payload = method == "GET" ? "" : body.dump();
  const auto response = channel.exchange(addr, method, std::string("/admin/") + verb, payload,
                                         timeout_ms, "admin-cli");
  if (!response) {
    std::cerr << "no answer from " << addr << " within " << timeout_ms << " ms\n";
    return 2;
  }
  std::cout << response->body << "\n";
  return response->status >= 200 && response->status < 300 ? 0 : 1;
}

void add_timing_flags(CLI::App* cmd, TimingFlags& timing) {
  auto* heartbeat =
      cmd->add_option("--heartbeat-ms", timing.heartbeat_ms, "Control cycle interval");
  auto* timeout = cmd->add_option("--timeout-ms", timing.timeout_ms, "Peer response timeout");
  auto* paper = cmd->add_flag("--paper-timings", timing.paper,
                              "Use the 10000/3000 ms deployment timings");
  heartbeat->check(CLI::PositiveNumber);
  timeout->check(CLI::PositiveNumber);
  paper->excludes(heartbeat);
  paper->excludes(timeout);
  cmd->callback([&timing, heartbeat, timeout] {
    timing.heartbeat_set = heartbeat->count() > 0;
    timing.timeout_set = timeout->count() > 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saferd: self-adaptive security for hierarchical subsystem clusters"};
  app.require_subcommand(1);

  // node
  auto* node_cmd = app.add_subcommand("node", "Run one subsystem over HTTP");
  std::string node_config_path;
  saferd::NodeId node_id = 0;
  TimingFlags node_timing;
  node_cmd->add_option("--config", node_config_path, "Cluster description file")->required();
  node_cmd->add_option("--id", node_id, "Subsystem id")->required();
  add_timing_flags(node_cmd, node_timing);

  // harness
  auto* harness_cmd = app.add_subcommand("harness", "Cluster experiments");
  harness_cmd->require_subcommand(1);

  auto* spawn_cmd = harness_cmd->add_subcommand("spawn", "Run a whole cluster over HTTP");
  std::string spawn_config_path;
  TimingFlags spawn_timing;
  spawn_cmd->add_option("--config", spawn_config_path, "Cluster description file")->required();
  add_timing_flags(spawn_cmd, spawn_timing);

  auto* run_cmd = harness_cmd->add_subcommand("run", "Run adaptation experiments");
  std::string run_config_path;
  TimingFlags run_timing;
  std::string experiment = "both";
  std::string target_spec = "all";
  saferd::NodeId monitored = 1;
  int reps = 10;
  std::uint64_t seed = 42;
  int trigger_level = 2;
  bool sim = false;
  int latency_ms = 2;
  int jitter_ms = 0;
  std::string out_path = "-";
  std::string log_path;
  run_cmd->add_option("--config", run_config_path, "Cluster description file")->required();
  run_cmd->add_option("--experiment", experiment, "sl, global, or both")
      ->check(CLI::IsMember({"sl", "global", "both"}));
  run_cmd->add_option("--targets", target_spec, "Comma-separated node ids, or 'all'");
  run_cmd->add_option("--monitored", monitored, "Node whose adaptations are measured");
  run_cmd->add_option("--reps", reps, "Repetitions per target")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", seed, "Seed for schedules (and the simulated network)");
  run_cmd->add_option("--trigger-level", trigger_level, "Level the seeded probe demands");
  run_cmd->add_flag("--sim", sim, "Use the simulated transport in virtual time");
  run_cmd->add_option("--latency-ms", latency_ms, "Simulated latency per message leg")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--jitter-ms", jitter_ms, "Simulated seeded jitter per message leg")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--out", out_path, "Results file ('-' for stdout)");
  run_cmd->add_option("--log", log_path, "Write the adaptation record log here");
  add_timing_flags(run_cmd, run_timing);

  auto* summarize_cmd = harness_cmd->add_subcommand("summarize", "Summarize a results file");
  std::string in_path = "-";
  summarize_cmd->add_option("--in", in_path, "Results file ('-' for stdin)");

  // admin
  auto* admin_cmd = app.add_subcommand("admin", "Send one admin command to a node");
  std::string admin_addr;
  std::string admin_verb;
  int admin_level = 2;
  int admin_target_level = 3;
  std::string admin_approval = saferd::kDefaultApprovalToken;
  int admin_timeout_ms = 3000;
  admin_cmd->add_option("--node", admin_addr, "Node address host:port")->required();
  admin_cmd
      ->add_option("verb", admin_verb, "status, trigger, deescalate, terminate, or revive")
      ->required()
      ->check(CLI::IsMember({"status", "trigger", "deescalate", "terminate", "revive"}));
  admin_cmd->add_option("--level", admin_level, "Level for trigger");
  admin_cmd->add_option("--target-level", admin_target_level, "Level for deescalate");
  admin_cmd->add_option("--approval", admin_approval, "Approval token for deescalate");
  admin_cmd->add_option("--timeout-ms", admin_timeout_ms, "Response timeout")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (node_cmd->parsed()) {
      return run_node_command(node_config_path, node_id, node_timing);
    }
    if (spawn_cmd->parsed()) {
      return run_spawn_command(spawn_config_path, spawn_timing);
    }
    if (run_cmd->parsed()) {
      return run_harness_command(run_config_path, run_timing, experiment, target_spec,
                                 monitored, reps, seed, trigger_level, sim, latency_ms,
                                 jitter_ms, out_path, log_path);
    }
    if (summarize_cmd->parsed()) {
      return run_summarize_command(in_path);
    }
    if (admin_cmd->parsed()) {
      return run_admin_command(admin_addr, admin_verb, admin_level, admin_target_level,
                               admin_approval, admin_timeout_ms);
    }
  } catch (const saferd::Error& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  }
  return 2;
}
