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
#ifndef SAFERD_SIM_TRANSPORT_HPP
#define SAFERD_SIM_TRANSPORT_HPP

#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "saferd/clock.hpp"
#include "saferd/wire.hpp"

namespace saferd {

/// Deterministic in-process transport with a virtual clock. Strictly
/// single-threaded: calls execute synchronously (handlers may recurse through
/// the same network) and every time advance is explicit, so a fixed seed
/// yields byte-identical traces.
///
/// Delivery rules:
///  - unknown address, active partition, or a silenced (terminated) endpoint:
///    no response; the clock lands exactly at call start + timeout.
///  - otherwise the handler runs between the two latency legs; if nested work
///    pushed total elapsed past the timeout, the caller still reports no
///    response (the clock stays where handling left it).
class SimNetwork final : public wire::RawChannel, public Clock {
 public:
  struct Options {
    std::uint64_t seed = 1;
    int latency_ms = 0;  // per message leg
    int jitter_ms = 0;   // seeded uniform addition per leg
  };

  SimNetwork() : SimNetwork(Options{}) {}
  explicit SimNetwork(Options options);

  void attach(const std::string& addr, wire::NodeService* service);
  void detach(const std::string& addr);

  /// Drops every exchange with `addr` during [from_ms, until_ms).
  void isolate(const std::string& addr, std::int64_t from_ms,
               std::int64_t until_ms = std::numeric_limits<std::int64_t>::max());

  [[nodiscard]] std::int64_t now_ms() const override { return now_; }
  void advance_to(std::int64_t t_ms);
  void advance(std::int64_t delta_ms) { advance_to(now_ + delta_ms); }

  std::optional<wire::RawResponse> exchange(const std::string& addr, const std::string& method,
                                            const std::string& path, const std::string& body,
                                            int timeout_ms, const std::string& source) override;

  /// Out-of-band exchange for harness observation: no clock movement, no
  /// trace entry, same silencing rules. Keeps measurement from disturbing
  /// the schedule being measured.
  [[nodiscard]] std::optional<wire::RawResponse> observe(const std::string& addr,
                                                         const std::string& method,
                                                         const std::string& path,
                                                         const std::string& body,
                                                         const std::string& source);

  /// When set, every exchange appends one line describing the delivery.
  void set_trace(std::vector<std::string>* sink) { trace_ = sink; }

 private:
  struct PartitionRule {
    std::string addr;
    std::int64_t from_ms;
    std::int64_t until_ms;
  };

  [[nodiscard]] bool partitioned(const std::string& addr, std::int64_t at_ms) const;
  [[nodiscard]] std::int64_t sample_leg_ms();
  void trace(const std::string& line);

  Options options_;
  std::mt19937_64 rng_;
  std::int64_t now_ = 0;
  std::map<std::string, wire::NodeService*> endpoints_;
  std::vector<PartitionRule> partitions_;
  std::vector<std::string>* trace_ = nullptr;
};

}  // namespace saferd

#endif  // SAFERD_SIM_TRANSPORT_HPP
