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
#ifndef SAFERD_COUNTERMEASURES_HPP
#define SAFERD_COUNTERMEASURES_HPP

#include <cstdint>
#include <limits>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>

#include "saferd/clock.hpp"
#include "saferd/wire.hpp"

namespace saferd {

/// Classic token bucket: capacity tokens, steady refill, millisecond clock.
class TokenBucket {
 public:
  TokenBucket(double capacity, double refill_per_sec)
      : capacity_(capacity), refill_per_sec_(refill_per_sec), tokens_(capacity) {}

  [[nodiscard]] bool try_take(std::int64_t now_ms);

 private:
  double capacity_;
  double refill_per_sec_;
  double tokens_;
  std::int64_t last_ms_ = std::numeric_limits<std::int64_t>::min();
};

/// Per-source admission control for the wire API. Countermeasure actions
/// reconfigure it; request handlers consult it. Admin endpoints bypass it
/// entirely (carriers never route them here). Thread-safe.
class RequestGate {
 public:
  RequestGate(const Clock& clock, double rate_limit_per_sec)
      : clock_(clock), rate_limit_per_sec_(rate_limit_per_sec) {}

  void configure(bool limit_active, std::set<std::string> blocked);

  [[nodiscard]] wire::Admit admit(const std::string& source);

  [[nodiscard]] bool limit_active() const;
  [[nodiscard]] std::set<std::string> blocked() const;

 private:
  const Clock& clock_;
  double rate_limit_per_sec_;
  mutable std::mutex mutex_;
  bool limit_active_ = false;
  std::set<std::string> blocked_;
  std::map<std::string, TokenBucket> buckets_;
};

/// Counts inbound non-admin requests per source between drains; feeds the
/// request-rate probe. Thread-safe.
class RequestCounter {
 public:
  void note(const std::string& source);
  [[nodiscard]] std::map<std::string, std::uint64_t> drain();

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::uint64_t> counts_;
};

/// Countermeasure actions keyed by id. An action reconfigures the gate given
/// the currently flagged sources; a throw aborts the level step that invoked
/// it.
class CountermeasureRegistry {
 public:
  using Action = std::function<void(RequestGate&, const std::set<std::string>& flagged)>;

  /// monitor: open gate. rate-limit: bucket every source. block: bucket
  /// every source and reject flagged ones outright.
  [[nodiscard]] static CountermeasureRegistry standard();

  void add(std::string id, Action action);
  [[nodiscard]] bool has(const std::string& id) const { return actions_.contains(id); }

  /// Throws CountermeasureError for an unknown id; action exceptions
  /// propagate unchanged.
  void execute(const std::string& id, RequestGate& gate,
               const std::set<std::string>& flagged) const;

 private:
  std::map<std::string, Action> actions_;
};

}  // namespace saferd

#endif  // SAFERD_COUNTERMEASURES_HPP
