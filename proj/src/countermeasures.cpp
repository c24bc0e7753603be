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
#include "saferd/countermeasures.hpp"

#include <algorithm>
#include <limits>

#include "saferd/errors.hpp"

namespace saferd {

bool TokenBucket::try_take(std::int64_t now_ms) {
  if (last_ms_ != std::numeric_limits<std::int64_t>::min() && now_ms > last_ms_) {
    tokens_ = std::min(capacity_,
                       tokens_ + refill_per_sec_ * static_cast<double>(now_ms - last_ms_) / 1000.0);
  }
  last_ms_ = std::max(last_ms_, now_ms);
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void RequestGate::configure(bool limit_active, std::set<std::string> blocked) {
  std::lock_guard lock(mutex_);
  limit_active_ = limit_active;
  blocked_ = std::move(blocked);
  if (!limit_active_) {
    buckets_.clear();
  }
}

wire::Admit RequestGate::admit(const std::string& source) {
  std::lock_guard lock(mutex_);
  if (blocked_.contains(source)) {
    return wire::Admit::blocked;
  }
  if (!limit_active_) {
    return wire::Admit::ok;
  }
  auto [it, inserted] =
      buckets_.try_emplace(source, rate_limit_per_sec_, rate_limit_per_sec_);
  return it->second.try_take(clock_.now_ms()) ? wire::Admit::ok : wire::Admit::rate_limited;
}

bool RequestGate::limit_active() const {
  std::lock_guard lock(mutex_);
  return limit_active_;
}

std::set<std::string> RequestGate::blocked() const {
  std::lock_guard lock(mutex_);
  return blocked_;
}

void RequestCounter::note(const std::string& source) {
  std::lock_guard lock(mutex_);
  ++counts_[source];
}

std::map<std::string, std::uint64_t> RequestCounter::drain() {
  std::lock_guard lock(mutex_);
  std::map<std::string, std::uint64_t> out;
  out.swap(counts_);
  return out;
}

CountermeasureRegistry CountermeasureRegistry::standard() {
  CountermeasureRegistry registry;
  registry.add("monitor", [](RequestGate& gate, const std::set<std::string>&) {
    gate.configure(false, {});
  });
  registry.add("rate-limit", [](RequestGate& gate, const std::set<std::string>&) {
    gate.configure(true, {});
  });
  registry.add("block", [](RequestGate& gate, const std::set<std::string>& flagged) {
    gate.configure(true, flagged);
  });
  return registry;
}

void CountermeasureRegistry::add(std::string id, Action action) {
  actions_[std::move(id)] = std::move(action);
}

void CountermeasureRegistry::execute(const std::string& id, RequestGate& gate,
                                     const std::set<std::string>& flagged) const {
  const auto it = actions_.find(id);
  if (it == actions_.end()) {
    throw CountermeasureError("no countermeasure registered for action '" + id + "'");
  }
  it->second(gate, flagged);
}

}  // namespace saferd
