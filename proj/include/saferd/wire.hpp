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
#ifndef SAFERD_WIRE_HPP
#define SAFERD_WIRE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saferd/seclevel.hpp"
#include "saferd/topology.hpp"

namespace saferd::wire {

inline constexpr const char* kLevelPath = "/level";
inline constexpr const char* kHealthPath = "/health";
inline constexpr const char* kTraversePath = "/traverse";
inline constexpr const char* kAdminPrefix = "/admin/";
inline constexpr const char* kAdminRevivePath = "/admin/revive";

// ---------------------------------------------------------------------------
// Message schemas. Encoding is canonical (sorted keys); decoding ignores
// unknown fields and returns nullopt for anything malformed.

struct LevelResponse {
  NodeId id = 0;
  int level = 0;
  std::uint64_t cycle = 0;
  std::int64_t ts_ms = 0;

  bool operator==(const LevelResponse&) const = default;
};

struct HealthResponse {
  NodeId id = 0;
  std::string status;

  bool operator==(const HealthResponse&) const = default;
};

struct TraverseRequest {
  NodeId origin = 0;
  std::set<NodeId> visited;

  bool operator==(const TraverseRequest&) const = default;
};

struct TraverseResponse {
  std::set<NodeId> reachable;
  std::map<NodeId, int> levels;

  bool operator==(const TraverseResponse&) const = default;
};

struct TriggerCommand {
  int level = 0;

  bool operator==(const TriggerCommand&) const = default;
};

struct DeescalateCommand {
  int target_level = 0;
  std::string approval;

  bool operator==(const DeescalateCommand&) const = default;
};

struct StatusReport {
  NodeId id = 0;
  int level = 0;
  std::uint64_t cycle = 0;
  std::string mode;  // "FA" or "PA"
  std::vector<NodeId> active;
  std::vector<NodeId> excluded;
  std::vector<NodeId> subgroup;
  bool terminated = false;

  bool operator==(const StatusReport&) const = default;
};

[[nodiscard]] nlohmann::json encode(const LevelResponse&);
[[nodiscard]] nlohmann::json encode(const HealthResponse&);
[[nodiscard]] nlohmann::json encode(const TraverseRequest&);
[[nodiscard]] nlohmann::json encode(const TraverseResponse&);
[[nodiscard]] nlohmann::json encode(const TriggerCommand&);
[[nodiscard]] nlohmann::json encode(const DeescalateCommand&);
[[nodiscard]] nlohmann::json encode(const StatusReport&);

[[nodiscard]] std::optional<LevelResponse> decode_level(const nlohmann::json&);
[[nodiscard]] std::optional<HealthResponse> decode_health(const nlohmann::json&);
[[nodiscard]] std::optional<TraverseRequest> decode_traverse_request(const nlohmann::json&);
[[nodiscard]] std::optional<TraverseResponse> decode_traverse_response(const nlohmann::json&);
[[nodiscard]] std::optional<TriggerCommand> decode_trigger(const nlohmann::json&);
[[nodiscard]] std::optional<DeescalateCommand> decode_deescalate(const nlohmann::json&);
[[nodiscard]] std::optional<StatusReport> decode_status(const nlohmann::json&);

// ---------------------------------------------------------------------------
// Client side.

/// Unreachable: no response within the timeout. Protocol: a response arrived
/// but was rejected (bad status, garbled body, undefined ordinal). Both count
/// as unresponsive for adaptation decisions; protocol faults are logged
/// separately by callers.
enum class Fault { none, unreachable, protocol };

template <typename T>
struct WireResult {
  std::optional<T> value;
  Fault fault = Fault::none;

  [[nodiscard]] bool ok() const { return value.has_value(); }

  [[nodiscard]] static WireResult success(T v) { return {std::move(v), Fault::none}; }
  [[nodiscard]] static WireResult unreachable() { return {std::nullopt, Fault::unreachable}; }
  [[nodiscard]] static WireResult protocol() { return {std::nullopt, Fault::protocol}; }
};

struct RawResponse {
  int status = 0;
  std::string body;
};

/// One request/response exchange with a peer endpoint. Returns nullopt when
/// no response arrived within timeout_ms; implementations must not give up
/// early (an unresponsive peer costs the full timeout, which is what the
/// failure detector measures).
class RawChannel {
 public:
  virtual ~RawChannel() = default;
  virtual std::optional<RawResponse> exchange(const std::string& addr, const std::string& method,
                                              const std::string& path, const std::string& body,
                                              int timeout_ms, const std::string& source) = 0;
};

struct AdminOutcome {
  int status = 0;
  nlohmann::json body;
};

/// Typed request surface over a RawChannel. Validates response schemas and,
/// when a level set is supplied, that reported ordinals are defined.
class PeerClient {
 public:
  PeerClient(RawChannel& channel, std::string source, const LevelSet* levels);

  [[nodiscard]] WireResult<LevelResponse> fetch_level(const std::string& addr, int timeout_ms);
  [[nodiscard]] WireResult<HealthResponse> fetch_health(const std::string& addr, int timeout_ms);
  [[nodiscard]] WireResult<TraverseResponse> post_traverse(const std::string& addr,
                                                           const TraverseRequest& request,
                                                           int timeout_ms);
  /// verb: trigger | deescalate | terminate | revive | status.
  [[nodiscard]] WireResult<AdminOutcome> admin(const std::string& addr, const std::string& verb,
                                               const nlohmann::json& body, int timeout_ms);

 private:
  RawChannel& channel_;
  std::string source_;
  const LevelSet* levels_;
};

// ---------------------------------------------------------------------------
// Server side.

enum class Admit { ok, rate_limited, blocked };

/// What a node exposes to the wire. Handlers run on carrier threads: they
/// read snapshots, enqueue admin effects, and never block on the control
/// loop. serve_traverse recurses through the node's own client.
class NodeService {
 public:
  virtual ~NodeService() = default;

  [[nodiscard]] virtual bool terminated() const = 0;
  /// Countermeasure gate for non-admin requests.
  [[nodiscard]] virtual Admit admit(const std::string& source) = 0;
  [[nodiscard]] virtual LevelResponse level_snapshot() = 0;
  [[nodiscard]] virtual HealthResponse health_snapshot() = 0;
  [[nodiscard]] virtual TraverseResponse serve_traverse(const TraverseRequest& request) = 0;
  /// Returns the response body; throws Error subclasses for rejections.
  [[nodiscard]] virtual nlohmann::json admin_command(const std::string& verb,
                                                     const nlohmann::json& body) = 0;
};

/// True when the carrier must withhold any response: terminated nodes answer
/// nothing except the revive command.
[[nodiscard]] bool silenced(const NodeService& service, const std::string& path);

/// Protocol logic shared by both carriers: routing, gating, body decoding,
/// error mapping. Carriers only move bytes and enforce silence/timeouts.
[[nodiscard]] RawResponse dispatch(NodeService& service, const std::string& method,
                                   const std::string& path, const std::string& body,
                                   const std::string& source);

}  // namespace saferd::wire

#endif  // SAFERD_WIRE_HPP
