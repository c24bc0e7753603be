#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "saferd/errors.hpp"
#include "saferd/node.hpp"
#include "saferd/sim_cluster.hpp"
#include "saferd/wire.hpp"
#include "test_support.hpp"

using namespace saferd;
using nlohmann::json;
using test::desk_options;
using test::edge8_config;

namespace {

constexpr int kHeartbeat = 1000;
constexpr int kTimeout = 300;

ParsedConfig solo_config() {
  return parse_config("node 1 layer=0 addr=sim:1 children=[]\n" + desk_options());
}

std::vector<AdaptationRecord> records_of(SimCluster& cluster, NodeId node,
                                         const std::string& kind) {
  std::vector<AdaptationRecord> out;
  for (const auto& record : cluster.sink().records()) {
    if (record.node == node && record.kind == kind) {
      out.push_back(record);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("record formatting") {
  const AdaptationRecord sl{3, 7, "SL", 4200, 56, "3", "2"};
  CHECK(format_record(sl) == "ts=4200 node=3 cycle=7 kind=SL from=3 to=2 dur_ms=56");

  const AdaptationRecord g{1, 2, "G", 1000, 3000, "FA+1,2,3,4,5,6,7,8", "PA[2]+1,3,5,8"};
  CHECK(format_record(g) ==
        "ts=1000 node=1 cycle=2 kind=G from=FA+1,2,3,4,5,6,7,8 to=PA[2]+1,3,5,8 dur_ms=3000");

  CHECK(parse_record(format_record(sl)) == sl);
  CHECK(parse_record(format_record(g)) == g);
}

TEST_CASE("record parsing is strict") {
  const std::string good = "ts=4200 node=3 cycle=7 kind=SL from=3 to=2 dur_ms=56";
  CHECK(parse_record(good).has_value());

  CHECK(parse_record("") == std::nullopt);
  CHECK(parse_record("ts=4200 node=3 cycle=7 kind=SL from=3 to=2") == std::nullopt);
  CHECK(parse_record(good + " extra=1") == std::nullopt);
  CHECK(parse_record("node=3 ts=4200 cycle=7 kind=SL from=3 to=2 dur_ms=56") == std::nullopt);
  CHECK(parse_record("ts=x node=3 cycle=7 kind=SL from=3 to=2 dur_ms=56") == std::nullopt);
  CHECK(parse_record("ts=4200 node=3 cycle=7 kind=XX from=3 to=2 dur_ms=56") == std::nullopt);
  CHECK(parse_record("ts=4200 node=0 cycle=7 kind=SL from=3 to=2 dur_ms=56") == std::nullopt);

  std::mt19937_64 rng(5150);
  for (int round = 0; round < 200; ++round) {
    AdaptationRecord record;
    record.node = 1 + rng() % 64;
    record.cycle = rng() % 100000;
    record.kind = (rng() % 2) ? kLevelKind : kModeKind;
    record.cycle_start_ms = static_cast<std::int64_t>(rng() % 1000000);
    record.duration_ms = static_cast<std::int64_t>(rng() % 10000);
    if (record.kind == kLevelKind) {
      record.from_state = std::to_string(1 + rng() % 5);
      record.to_state = std::to_string(1 + rng() % 5);
    } else {
      record.from_state = "FA+1,2,3";
      record.to_state = "PA[2,6]+1,3,5,8";
    }
    CHECK(parse_record(format_record(record)) == record);
  }
}

TEST_CASE("node configuration validation") {
  const ParsedConfig parsed = edge8_config(desk_options());
  NodeConfig good = node_config_from(parsed, 2);
  CHECK(good.heartbeat_ms == kHeartbeat);
  CHECK(good.timeout_ms == kTimeout);
  good.validate();

  auto rejected = [](NodeConfig config) {
    CHECK_THROWS_AS(config.validate(), StructureError);
  };

  NodeConfig broken = good;
  broken.topology = nullptr;
  rejected(broken);

  broken = good;
  broken.id = 99;
  rejected(broken);

  broken = good;
  broken.timeout_ms = 0;
  rejected(broken);

  broken = good;
  broken.heartbeat_ms = broken.timeout_ms;  // heartbeat must exceed the timeout
  rejected(broken);

  broken = good;
  broken.recovery_timeout_ms = -1;
  rejected(broken);

  broken = good;
  broken.rate_limit_per_sec = 0.0;
  rejected(broken);

  const ProbeRule flood{"flood", "request-rate", {{250.0, 2}, {1000.0, 1}}};
  NodeConfig with_probe = good;
  with_probe.probe_rules.push_back(flood);
  with_probe.validate();

  broken = good;
  broken.probe_rules.push_back({"p", "cpu-load", {{1.0, 2}}});
  rejected(broken);

  broken = good;
  broken.probe_rules.push_back(flood);
  broken.probe_rules.push_back(flood);  // duplicate metric
  rejected(broken);

  // The probe record of a config document lands in every node's rules.
  const auto probed = node_config_from(
      edge8_config(desk_options() + "probe flood metric=request-rate thresholds=[250:2,1000:1]\n"),
      2);
  REQUIRE(probed.probe_rules.size() == 1);
  CHECK(probed.probe_rules[0].probe == "flood");
  CHECK(probed.probe_rules[0].thresholds == flood.thresholds);

  CHECK(good.effective_recovery_ms() == kTimeout / 10);
  good.recovery_timeout_ms = 77;
  CHECK(good.effective_recovery_ms() == 77);
  good.recovery_timeout_ms = 0;
  good.timeout_ms = 5;  // integer division would give zero; clamps to one
  CHECK(good.effective_recovery_ms() == 1);
}

TEST_CASE("a healthy cluster reaches steady state silently") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(2 * kHeartbeat);  // three full rounds

  CHECK(cluster.sink().records().empty());
  for (const NodeId id : cluster.topology().ids()) {
    const auto status = cluster.node(id).status();
    CHECK(cluster.node(id).cycles_run() == 3);
    CHECK(status.cycle == 3);
    CHECK(status.level == 3);
    CHECK(status.mode == "FA");
    CHECK(status.excluded.empty());
    CHECK(status.subgroup == std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7, 8});
    CHECK_FALSE(status.terminated);
  }
}

TEST_CASE("a seeded trigger escalates and propagates level by level") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(0);  // settle round

  const auto armed = cluster.observe(4, "POST", "/admin/trigger", R"({"level":2})");
  REQUIRE(armed.has_value());
  CHECK(armed->status == 200);

  cluster.run_until(kHeartbeat);  // node 4 adopts in its next cycle
  const auto sl4 = records_of(cluster, 4, kLevelKind);
  REQUIRE(sl4.size() == 1);
  CHECK(sl4[0].from_state == "3");
  CHECK(sl4[0].to_state == "2");
  CHECK(sl4[0].cycle == 2);
  CHECK(sl4[0].duration_ms < kTimeout);
  CHECK(cluster.node(4).status().level == 2);
  CHECK(cluster.node(1).status().level == 3);  // two hops away, nothing yet

  cluster.run_until(2 * kHeartbeat);  // neighbor 2 adopts
  CHECK(cluster.node(2).status().level == 2);
  CHECK(cluster.node(1).status().level == 3);

  cluster.run_until(3 * kHeartbeat);  // root adopts at distance two
  CHECK(cluster.node(1).status().level == 2);

  // The whole cluster converges to the merged level.
  cluster.run_until(6 * kHeartbeat);
  for (const NodeId id : cluster.topology().ids()) {
    CHECK(cluster.node(id).status().level == 2);
  }

  // Per-node record cycles never move backwards.
  for (const NodeId id : cluster.topology().ids()) {
    const auto all = records_of(cluster, id, kLevelKind);
    for (std::size_t i = 1; i < all.size(); ++i) {
      CHECK(all[i].cycle > all[i - 1].cycle);
    }
  }
}

TEST_CASE("a fresh failure produces one mode record costing the timeout") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(0);

  (void)cluster.node(2).admin_command("terminate", json::object());
  cluster.run_until(kHeartbeat);

  const auto g1 = records_of(cluster, 1, kModeKind);
  REQUIRE(g1.size() == 1);
  CHECK(g1[0].from_state == "FA+1,2,3,4,5,6,7,8");
  CHECK(g1[0].to_state == "PA[2]+1,3,5,8");
  CHECK(g1[0].cycle == 2);
  CHECK(g1[0].duration_ms == kTimeout);  // one level-query timeout, zero latency

  // Node 3 keeps full adaptation: only its traversal view shrank.
  const auto g3 = records_of(cluster, 3, kModeKind);
  REQUIRE(g3.size() == 1);
  CHECK(g3[0].to_state == "FA+1,3,5,8");

  // Node 6 is orphaned entirely.
  const auto g6 = records_of(cluster, 6, kModeKind);
  REQUIRE(g6.size() == 1);
  CHECK(g6[0].to_state == "PA[2]+6");

  // The dead node runs no cycles and emits nothing new.
  CHECK(cluster.node(2).cycles_run() == 1);
  CHECK(records_of(cluster, 2, kModeKind).empty());

  // Steady again: another round adds no records.
  const std::size_t count = cluster.sink().records().size();
  cluster.run_until(2 * kHeartbeat);
  CHECK(cluster.sink().records().size() == count);
}

TEST_CASE("mode and level records share a cycle in order") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(0);

  (void)cluster.node(2).admin_command("terminate", json::object());
  (void)cluster.observe(1, "POST", "/admin/trigger", R"({"level":2})");
  cluster.run_until(kHeartbeat);

  const auto g = records_of(cluster, 1, kModeKind);
  const auto sl = records_of(cluster, 1, kLevelKind);
  REQUIRE(g.size() == 1);
  REQUIRE(sl.size() == 1);
  CHECK(g[0].cycle == sl[0].cycle);
  CHECK(g[0].cycle_start_ms == sl[0].cycle_start_ms);
  // The mode adaptation happens in the global phase, before the local one.
  CHECK(sl[0].duration_ms >= g[0].duration_ms);
  const auto lines = cluster.sink().lines();
  const auto g_at = std::find(lines.begin(), lines.end(), format_record(g[0]));
  const auto sl_at = std::find(lines.begin(), lines.end(), format_record(sl[0]));
  REQUIRE(g_at != lines.end());
  REQUIRE(sl_at != lines.end());
  CHECK(g_at < sl_at);
}

TEST_CASE("revive restores the published state immediately and fully") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(0);
  (void)cluster.node(2).admin_command("terminate", json::object());
  cluster.run_until(2 * kHeartbeat);  // exclusions and split views form

  CHECK(cluster.node(1).status().excluded == std::vector<NodeId>{2});
  const auto dead_cycles = cluster.node(2).cycles_run();

  const auto revived = cluster.observe(2, "POST", "/admin/revive", "{}");
  REQUIRE(revived.has_value());
  CHECK(revived->status == 200);

  // Published state resets before the next control cycle runs.
  const auto status = cluster.node(2).status();
  CHECK_FALSE(status.terminated);
  CHECK(status.level == 3);
  CHECK(status.mode == "FA");
  CHECK(status.excluded.empty());
  CHECK(status.subgroup == std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7, 8});

  // Within two rounds every node is back to full adaptation.
  const std::int64_t deadline = cluster.network().now_ms() + 2 * kHeartbeat;
  cluster.run_until(deadline);
  for (const NodeId id : cluster.topology().ids()) {
    const auto report = cluster.node(id).status();
    CHECK(report.mode == "FA");
    CHECK(report.excluded.empty());
    CHECK(report.subgroup == std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7, 8});
  }
  CHECK(cluster.node(2).cycles_run() > dead_cycles);  // the counter survived
}

TEST_CASE("admin surface") {
  SimCluster cluster{edge8_config(desk_options())};
  Node& node = cluster.node(3);

  SUBCASE("trigger validation") {
    CHECK_THROWS_AS((void)node.admin_command("trigger", json::parse("[]")), Error);
    CHECK_THROWS_AS((void)node.admin_command("trigger", json{{"level", 9}}), LevelError);
    const auto ok = node.admin_command("trigger", json{{"level", 2}});
    CHECK(ok.at("status") == "armed");
  }
  SUBCASE("deescalate validation") {
    CHECK_THROWS_AS((void)node.admin_command("deescalate", json::object()), Error);
    CHECK_THROWS_AS(
        (void)node.admin_command("deescalate", json{{"target_level", 3}, {"approval", "bad"}}),
        ApprovalError);
    CHECK_THROWS_AS((void)node.admin_command(
                        "deescalate", json{{"target_level", 7}, {"approval", "operator-approved"}}),
                    LevelError);
    const auto ok = node.admin_command(
        "deescalate", json{{"target_level", 3}, {"approval", "operator-approved"}});
    CHECK(ok.at("status") == "queued");
  }
  SUBCASE("status encodes the published report") {
    const auto decoded = wire::decode_status(node.admin_command("status", json::object()));
    REQUIRE(decoded.has_value());
    CHECK(*decoded == node.status());
  }
  SUBCASE("unknown verbs are rejected") {
    CHECK_THROWS_AS((void)node.admin_command("explode", json::object()), Error);
  }
}

TEST_CASE("queued deescalation applies at the end of the next cycle") {
  SimCluster cluster{solo_config()};
  cluster.run_until(0);
  (void)cluster.observe(1, "POST", "/admin/trigger", R"({"level":2})");
  cluster.run_until(kHeartbeat);
  CHECK(cluster.node(1).status().level == 2);

  (void)cluster.observe(1, "POST", "/admin/deescalate",
                        R"({"target_level":3,"approval":"operator-approved"})");
  CHECK(cluster.node(1).status().level == 2);  // nothing until the next cycle
  cluster.run_until(2 * kHeartbeat);
  CHECK(cluster.node(1).status().level == 3);

  const auto sl = records_of(cluster, 1, kLevelKind);
  REQUIRE(sl.size() == 2);
  CHECK(sl[0].from_state == "3");
  CHECK(sl[0].to_state == "2");
  CHECK(sl[1].from_state == "2");
  CHECK(sl[1].to_state == "3");
  CHECK(sl[1].cycle == sl[0].cycle + 1);
}

TEST_CASE("one approved sweep resets an escalated cluster in one round") {
  SimCluster cluster{edge8_config(desk_options())};
  cluster.run_until(0);
  (void)cluster.observe(4, "POST", "/admin/trigger", R"({"level":2})");
  cluster.run_until(6 * kHeartbeat);
  for (const NodeId id : cluster.topology().ids()) {
    REQUIRE(cluster.node(id).status().level == 2);
  }

  for (const NodeId id : cluster.topology().ids()) {
    const auto response = cluster.observe(id, "POST", "/admin/deescalate",
                                          R"({"target_level":3,"approval":"operator-approved"})");
    REQUIRE(response.has_value());
    REQUIRE(response->status == 200);
  }
  // Parents run before children within a round, so one round suffices: no
  // stale elevated report survives to re-escalate an already reset parent.
  cluster.run_until(7 * kHeartbeat);
  for (const NodeId id : cluster.topology().ids()) {
    CHECK(cluster.node(id).status().level == 3);
  }
}

TEST_CASE("level one blocks flagged sources and reopens on reset") {
  SimCluster cluster{solo_config()};
  Node& node = cluster.node(1);
  cluster.run_until(0);

  (void)cluster.observe(1, "POST", "/admin/trigger", R"({"level":1})");
  cluster.run_until(kHeartbeat);
  CHECK(node.status().level == 1);

  // The block countermeasure with no attributed sources degrades to rate
  // limiting: ten requests per second per source, bucket starts full.
  int admitted = 0;
  for (int i = 0; i < 12; ++i) {
    if (node.admit("203.0.113.9") == wire::Admit::ok) {
      ++admitted;
    }
  }
  CHECK(admitted == 10);

  (void)cluster.observe(1, "POST", "/admin/deescalate",
                        R"({"target_level":3,"approval":"operator-approved"})");
  cluster.run_until(2 * kHeartbeat);
  CHECK(node.status().level == 3);
  CHECK(node.admit("203.0.113.9") == wire::Admit::ok);
}
