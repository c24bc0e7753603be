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
#include "saferd/sim_transport.hpp"

#include <algorithm>
#include <sstream>

namespace saferd {

SimNetwork::SimNetwork(Options options) : options_(options), rng_(options.seed) {}

void SimNetwork::attach(const std::string& addr, wire::NodeService* service) {
  endpoints_[addr] = service;
}

void SimNetwork::detach(const std::string& addr) {
  endpoints_.erase(addr);
}

void SimNetwork::isolate(const std::string& addr, std::int64_t from_ms, std::int64_t until_ms) {
  partitions_.push_back({addr, from_ms, until_ms});
}

void SimNetwork::advance_to(std::int64_t t_ms) {
  now_ = std::max(now_, t_ms);
}

bool SimNetwork::partitioned(const std::string& addr, std::int64_t at_ms) const {
  return std::any_of(partitions_.begin(), partitions_.end(), [&](const PartitionRule& rule) {
    return rule.addr == addr && at_ms >= rule.from_ms && at_ms < rule.until_ms;
  });
}

std::int64_t SimNetwork::sample_leg_ms() {
  std::int64_t leg = options_.latency_ms;
  if (options_.jitter_ms > 0) {
    std::uniform_int_distribution<int> dist(0, options_.jitter_ms);
    leg += dist(rng_);
  }
  return leg;
}

void SimNetwork::trace(const std::string& line) {
  if (trace_ != nullptr) {
    trace_->push_back(line);
  }
}

std::optional<wire::RawResponse> SimNetwork::exchange(const std::string& addr,
                                                      const std::string& method,
                                                      const std::string& path,
                                                      const std::string& body, int timeout_ms,
                                                      const std::string& source) {
  const std::int64_t start = now_;
  const auto it = endpoints_.find(addr);
  wire::NodeService* service = (it == endpoints_.end()) ? nullptr : it->second;
  const bool down =
      service == nullptr || partitioned(addr, start) || wire::silenced(*service, path);

  std::ostringstream line;
  line << "t=" << start << " src=" << source << " " << method << " " << addr << path;

  if (down) {
    advance_to(start + timeout_ms);
    line << " -> timeout t_end=" << now_;
    trace(line.str());
    return std::nullopt;
  }

  advance(sample_leg_ms());
  wire::RawResponse response = wire::dispatch(*service, method, path, body, source);
  advance(sample_leg_ms());

  if (now_ - start > timeout_ms) {
    // The handler answered after the caller stopped listening; nested
    // timeouts already advanced the clock past the caller's deadline.
    advance_to(start + timeout_ms);
    line << " -> timeout t_end=" << now_;
    trace(line.str());
    return std::nullopt;
  }
  line << " -> " << response.status << " t_end=" << now_;
  trace(line.str());
  return response;
}

std::optional<wire::RawResponse> SimNetwork::observe(const std::string& addr,
                                                     const std::string& method,
                                                     const std::string& path,
                                                     const std::string& body,
                                                     const std::string& source) {
  const auto it = endpoints_.find(addr);
  if (it == endpoints_.end() || partitioned(addr, now_) || wire::silenced(*it->second, path)) {
    return std::nullopt;
  }
  return wire::dispatch(*it->second, method, path, body, source);
}

}  // namespace saferd
