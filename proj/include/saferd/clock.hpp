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
#ifndef SAFERD_CLOCK_HPP
#define SAFERD_CLOCK_HPP

#include <chrono>
#include <cstdint>

namespace saferd {

/// Monotonic millisecond clock. Durations and record timestamps come from
/// here, never from the wall clock; the simulated transport substitutes a
/// virtual implementation.
class Clock {
 public:
  virtual ~Clock() = default;
  [[nodiscard]] virtual std::int64_t now_ms() const = 0;
};

/// Steady-clock milliseconds since construction.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  [[nodiscard]] std::int64_t now_ms() const override {
    const auto d = std::chrono::steady_clock::now() - origin_;
    return std::chrono::duration_cast<std::chrono::milliseconds>(d).count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace saferd

#endif  // SAFERD_CLOCK_HPP
