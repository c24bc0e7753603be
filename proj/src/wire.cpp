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
#include "saferd/wire.hpp"

#include <limits>

#include "saferd/errors.hpp"

namespace saferd::wire {

namespace {

using nlohmann::json;

bool get_id(const json& j, const char* key, NodeId& out) {
  if (!j.contains(key) || !j[key].is_number_unsigned()) {
    return false;
  }
  const auto value = j[key].get<std::uint64_t>();
  if (value == 0 || value > std::numeric_limits<NodeId>::max()) {
    return false;
  }
  out = static_cast<NodeId>(value);
  return true;
}

bool get_int(const json& j, const char* key, int& out) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    return false;
  }
  out = j[key].get<int>();
  return true;
}

bool get_string(const json& j, const char* key, std::string& out) {
  if (!j.contains(key) || !j[key].is_string()) {
    return false;
  }
  out = j[key].get<std::string>();
  return true;
}

bool get_id_array(const json& j, const char* key, std::set<NodeId>& out) {
  if (!j.contains(key) || !j[key].is_array()) {
    return false;
  }
  for (const auto& item : j[key]) {
    if (!item.is_number_unsigned() || item.get<std::uint64_t>() == 0) {
      return false;
    }
    out.insert(item.get<NodeId>());
  }
  return true;
}

bool get_id_vector(const json& j, const char* key, std::vector<NodeId>& out) {
  std::set<NodeId> ids;
  if (!get_id_array(j, key, ids)) {
    return false;
  }
  out.assign(ids.begin(), ids.end());
  return true;
}

json ids_to_array(const std::set<NodeId>& ids) {
  json array = json::array();
  for (const NodeId id : ids) {
    array.push_back(id);
  }
  return array;
}

json ids_to_array(const std::vector<NodeId>& ids) {
  json array = json::array();
  for (const NodeId id : ids) {
    array.push_back(id);
  }
  return array;
}

}  // namespace

json encode(const LevelResponse& m) {
  return {{"id", m.id}, {"level", m.level}, {"cycle", m.cycle}, {"ts_ms", m.ts_ms}};
}

json encode(const HealthResponse& m) {
  return {{"id", m.id}, {"status", m.status}};
}

json encode(const TraverseRequest& m) {
  return {{"origin", m.origin}, {"visited", ids_to_array(m.visited)}};
}

json encode(const TraverseResponse& m) {
  json levels = json::object();
  for (const auto& [id, level] : m.levels) {
    levels[std::to_string(id)] = level;
  }
  return {{"reachable", ids_to_array(m.reachable)}, {"levels", levels}};
}

json encode(const TriggerCommand& m) {
  return {{"level", m.level}};
}

json encode(const DeescalateCommand& m) {
  return {{"target_level", m.target_level}, {"approval", m.approval}};
}

json encode(const StatusReport& m) {
  return {{"id", m.id},
          {"level", m.level},
          {"cycle", m.cycle},
          {"mode", m.mode},
          {"active", ids_to_array(m.active)},
          {"excluded", ids_to_array(m.excluded)},
          {"subgroup", ids_to_array(m.subgroup)},
          {"terminated", m.terminated}};
}

std::optional<LevelResponse> decode_level(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  LevelResponse out;
  if (!get_id(j, "id", out.id) || !get_int(j, "level", out.level)) {
    return std::nullopt;
  }
  if (!j.contains("cycle") || !j["cycle"].is_number_unsigned() || !j.contains("ts_ms") ||
      !j["ts_ms"].is_number_integer()) {
    return std::nullopt;
  }
  out.cycle = j["cycle"].get<std::uint64_t>();
  out.ts_ms = j["ts_ms"].get<std::int64_t>();
  return out;
}

std::optional<HealthResponse> decode_health(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  HealthResponse out;
  if (!get_id(j, "id", out.id) || !get_string(j, "status", out.status) || out.status.empty()) {
    return std::nullopt;
  }
  return out;
}

std::optional<TraverseRequest> decode_traverse_request(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  TraverseRequest out;
  if (!get_id(j, "origin", out.origin) || !get_id_array(j, "visited", out.visited)) {
    return std::nullopt;
  }
  return out;
}

std::optional<TraverseResponse> decode_traverse_response(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  TraverseResponse out;
  if (!get_id_array(j, "reachable", out.reachable) || out.reachable.empty()) {
    return std::nullopt;
  }
  if (!j.contains("levels") || !j["levels"].is_object()) {
    return std::nullopt;
  }
  for (const auto& [key, value] : j["levels"].items()) {
    NodeId id = 0;
    if (!value.is_number_integer()) {
      return std::nullopt;
    }
    try {
      const unsigned long parsed = std::stoul(key);
      if (parsed == 0 || parsed > std::numeric_limits<NodeId>::max()) {
        return std::nullopt;
      }
      id = static_cast<NodeId>(parsed);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    out.levels[id] = value.get<int>();
  }
  return out;
}

std::optional<TriggerCommand> decode_trigger(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  TriggerCommand out;
  if (!get_int(j, "level", out.level)) {
    return std::nullopt;
  }
  return out;
}

std::optional<DeescalateCommand> decode_deescalate(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  DeescalateCommand out;
  if (!get_int(j, "target_level", out.target_level) ||
      !get_string(j, "approval", out.approval)) {
    return std::nullopt;
  }
  return out;
}

std::optional<StatusReport> decode_status(const json& j) {
  if (!j.is_object()) {
    return std::nullopt;
  }
  StatusReport out;
  if (!get_id(j, "id", out.id) || !get_int(j, "level", out.level) ||
      !get_string(j, "mode", out.mode)) {
    return std::nullopt;
  }
  if (!j.contains("cycle") || !j["cycle"].is_number_unsigned()) {
    return std::nullopt;
  }
  out.cycle = j["cycle"].get<std::uint64_t>();
  if (!get_id_vector(j, "active", out.active) || !get_id_vector(j, "excluded", out.excluded) ||
      !get_id_vector(j, "subgroup", out.subgroup)) {
    return std::nullopt;
  }
  if (!j.contains("terminated") || !j["terminated"].is_boolean()) {
    return std::nullopt;
  }
  out.terminated = j["terminated"].get<bool>();
  return out;
}

// ---------------------------------------------------------------------------

PeerClient::PeerClient(RawChannel& channel, std::string source, const LevelSet* levels)
    : channel_(channel), source_(std::move(source)), levels_(levels) {}

namespace {

std::optional<json> parse_body(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    return std::nullopt;
  }
  return parsed;
}

}  // namespace

WireResult<LevelResponse> PeerClient::fetch_level(const std::string& addr, int timeout_ms) {
  const auto raw = channel_.exchange(addr, "GET", kLevelPath, "", timeout_ms, source_);
  if (!raw) {
    return WireResult<LevelResponse>::unreachable();
  }
  if (raw->status != 200) {
    return WireResult<LevelResponse>::protocol();
  }
  const auto parsed = parse_body(raw->body);
  if (!parsed) {
    return WireResult<LevelResponse>::protocol();
  }
  auto decoded = decode_level(*parsed);
  if (!decoded || (levels_ && !levels_->defines(decoded->level))) {
    return WireResult<LevelResponse>::protocol();
  }
  return WireResult<LevelResponse>::success(*decoded);
}

WireResult<HealthResponse> PeerClient::fetch_health(const std::string& addr, int timeout_ms) {
  const auto raw = channel_.exchange(addr, "GET", kHealthPath, "", timeout_ms, source_);
  if (!raw) {
    return WireResult<HealthResponse>::unreachable();
  }
  if (raw->status != 200) {
    return WireResult<HealthResponse>::protocol();
  }
  const auto parsed = parse_body(raw->body);
  if (!parsed) {
    return WireResult<HealthResponse>::protocol();
  }
  auto decoded = decode_health(*parsed);
  if (!decoded) {
    return WireResult<HealthResponse>::protocol();
  }
  return WireResult<HealthResponse>::success(*decoded);
}

WireResult<TraverseResponse> PeerClient::post_traverse(const std::string& addr,
                                                       const TraverseRequest& request,
                                                       int timeout_ms) {
  const auto raw =
      channel_.exchange(addr, "POST", kTraversePath, encode(request).dump(), timeout_ms, source_);
  if (!raw) {
    return WireResult<TraverseResponse>::unreachable();
  }
  if (raw->status != 200) {
    return WireResult<TraverseResponse>::protocol();
  }
  const auto parsed = parse_body(raw->body);
  if (!parsed) {
    return WireResult<TraverseResponse>::protocol();
  }
  auto decoded = decode_traverse_response(*parsed);
  if (!decoded) {
    return WireResult<TraverseResponse>::protocol();
  }
  if (levels_) {
    for (const auto& [id, level] : decoded->levels) {
      if (!levels_->defines(level)) {
        return WireResult<TraverseResponse>::protocol();
      }
    }
  }
  return WireResult<TraverseResponse>::success(std::move(*decoded));
}

WireResult<AdminOutcome> PeerClient::admin(const std::string& addr, const std::string& verb,
                                           const nlohmann::json& body, int timeout_ms) {
  const std::string method = (verb == "status") ? "GET" : "POST";
  const std::string path = std::string(kAdminPrefix) + verb;
  const std::string payload = (method == "GET") ? "" : body.dump();
  const auto raw = channel_.exchange(addr, method, path, payload, timeout_ms, source_);
  if (!raw) {
    return WireResult<AdminOutcome>::unreachable();
  }
  AdminOutcome outcome;
  outcome.status = raw->status;
  if (const auto parsed = parse_body(raw->body)) {
    outcome.body = *parsed;
  }
  return WireResult<AdminOutcome>::success(std::move(outcome));
}

// ---------------------------------------------------------------------------

bool silenced(const NodeService& service, const std::string& path) {
  return service.terminated() && path != kAdminRevivePath;
}

namespace {

RawResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

RawResponse dispatch(NodeService& service, const std::string& method, const std::string& path,
                     const std::string& body, const std::string& source) {
  const bool is_admin = path.rfind(kAdminPrefix, 0) == 0;
  if (!is_admin) {
    switch (service.admit(source)) {
      case Admit::ok:
        break;
      case Admit::rate_limited:
        return error_response(429, "rate limited");
      case Admit::blocked:
        return error_response(403, "blocked");
    }
  }

  if (path == kLevelPath) {
    if (method != "GET") {
      return error_response(405, "GET only");
    }
    return {200, encode(service.level_snapshot()).dump()};
  }
  if (path == kHealthPath) {
    if (method != "GET") {
      return error_response(405, "GET only");
    }
    return {200, encode(service.health_snapshot()).dump()};
  }
  if (path == kTraversePath) {
    if (method != "POST") {
      return error_response(405, "POST only");
    }
    const auto parsed = parse_body(body);
    if (!parsed) {
      return error_response(400, "malformed body");
    }
    const auto request = decode_traverse_request(*parsed);
    if (!request) {
      return error_response(400, "malformed traverse request");
    }
    return {200, encode(service.serve_traverse(*request)).dump()};
  }
  if (is_admin) {
    const std::string verb = path.substr(std::string(kAdminPrefix).size());
    if (verb == "status" ? method != "GET" : method != "POST") {
      return error_response(405, verb == "status" ? "GET only" : "POST only");
    }
    nlohmann::json parsed = nlohmann::json::object();
    if (!body.empty()) {
      const auto maybe = parse_body(body);
      if (!maybe) {
        return error_response(400, "malformed body");
      }
      parsed = *maybe;
    }
    try {
      return {200, service.admin_command(verb, parsed).dump()};
    } catch (const ApprovalError& e) {
      return error_response(403, e.what());
    } catch (const Error& e) {
      return error_response(400, e.what());
    }
  }
  return error_response(404, "no such endpoint");
}

}  // namespace saferd::wire
