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
#ifndef SAFERD_SECLEVEL_HPP
#define SAFERD_SECLEVEL_HPP

#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace saferd {

/// One security level. Ordinals follow the readiness convention: lower
/// ordinal means more critical, ordinal 1 is maximum readiness.
struct SecurityLevel {
  int ordinal = 0;
  std::string name;
  std::string countermeasure;  // action id executed on entering this level
};

/// Contiguous set of levels, ordinals 1..L with L >= 2. Each level carries
/// exactly one countermeasure binding.
class LevelSet {
 public:
  explicit LevelSet(std::vector<SecurityLevel> levels);

  /// Three levels: 1 blocks, 2 rate-limits, 3 monitors.
  [[nodiscard]] static LevelSet standard();

  [[nodiscard]] int count() const { return static_cast<int>(levels_.size()); }
  [[nodiscard]] bool defines(int ordinal) const {
    return ordinal >= 1 && ordinal <= count();
  }
  [[nodiscard]] const SecurityLevel& at(int ordinal) const;
  [[nodiscard]] int least_critical() const { return count(); }

 private:
  std::vector<SecurityLevel> levels_;  // index i holds ordinal i+1
};

/// Merge rule for level demands: the most critical (numerically smallest)
/// ordinal wins. Every value must be defined in the set; empty input is an
/// error.
[[nodiscard]] int most_critical(const std::vector<int>& ordinals, const LevelSet& levels);

/// Directed pairs of ordinals the machine may move between in one step.
class TransitionTable {
 public:
  /// Validates endpoints, rejects self-loops, and requires that every
  /// ordinal can reach ordinal 1 through allowed steps.
  TransitionTable(const LevelSet& levels, std::set<std::pair<int, int>> pairs);

  /// Default table: both directions between adjacent ordinals.
  [[nodiscard]] static TransitionTable adjacent(const LevelSet& levels);

  /// Default table extended with additional pairs.
  [[nodiscard]] static TransitionTable adjacent_with(const LevelSet& levels,
                                                     std::set<std::pair<int, int>> extra);

  [[nodiscard]] bool allows(int from, int to) const {
    return pairs_.contains({from, to});
  }
  [[nodiscard]] const std::set<std::pair<int, int>>& pairs() const { return pairs_; }

 private:
  std::set<std::pair<int, int>> pairs_;
};

using TransitionStep = std::pair<int, int>;

/// Invoked once per applied step with the level being entered; a throw
/// aborts the step and leaves the machine where it was.
using CountermeasureExecutor = std::function<void(const SecurityLevel& entering)>;

/// The per-node security level machine. Single-writer: only the owning
/// control loop mutates it.
class SLStateMachine {
 public:
  SLStateMachine(LevelSet levels, TransitionTable table, int initial,
                 std::string approval_token);

  [[nodiscard]] int current() const { return current_; }
  [[nodiscard]] const LevelSet& levels() const { return levels_; }
  [[nodiscard]] const TransitionTable& table() const { return table_; }

  /// Shortest legal step sequence from the current level to `target`;
  /// empty when already there. Throws LevelError when the target is
  /// undefined or unreachable under the table.
  [[nodiscard]] std::vector<TransitionStep> plan_transition(int target) const;

  /// Applies one step atomically: the executor runs first, and only on
  /// success does the level change. Throws LevelError when the step does
  /// not start at the current level or is not in the table.
  void apply_transition(const TransitionStep& step, const CountermeasureExecutor& executor);

  /// Human-approved move toward a less critical level. Rejects a missing or
  /// wrong token (ApprovalError) before touching any state; target == current
  /// is a no-op success. One approval covers the whole planned path.
  void request_deescalation(int target, const std::string& token,
                            const CountermeasureExecutor& executor);

  /// Restart support: jump to a level without transition or countermeasure.
  void reset_to(int ordinal);

 private:
  LevelSet levels_;
  TransitionTable table_;
  int current_;
  std::string approval_token_;
};

}  // namespace saferd

#endif  // SAFERD_SECLEVEL_HPP
