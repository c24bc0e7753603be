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
#include "saferd/seclevel.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "saferd/errors.hpp"

namespace saferd {

LevelSet::LevelSet(std::vector<SecurityLevel> levels) {
  if (levels.size() < 2) {
    throw LevelError("a level set needs at least 2 levels");
  }
  std::sort(levels.begin(), levels.end(),
            [](const SecurityLevel& a, const SecurityLevel& b) { return a.ordinal < b.ordinal; });
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const int expected = static_cast<int>(i) + 1;
    if (levels[i].ordinal != expected) {
      throw LevelError("ordinals must be contiguous starting at 1; missing ordinal " +
                       std::to_string(expected));
    }
    if (levels[i].countermeasure.empty()) {
      throw LevelError("level " + std::to_string(expected) + " has no countermeasure binding");
    }
  }
  levels_ = std::move(levels);
}

LevelSet LevelSet::standard() {
  return LevelSet({{1, "maximum-readiness", "block"},
                   {2, "moderate-readiness", "rate-limit"},
                   {3, "normal-readiness", "monitor"}});
}

const SecurityLevel& LevelSet::at(int ordinal) const {
  if (!defines(ordinal)) {
    throw LevelError("ordinal " + std::to_string(ordinal) + " is not defined (1.." +
                     std::to_string(count()) + ")");
  }
  return levels_[static_cast<std::size_t>(ordinal - 1)];
}

int most_critical(const std::vector<int>& ordinals, const LevelSet& levels) {
  if (ordinals.empty()) {
    throw LevelError("most_critical over an empty set is undefined");
  }
  int best = 0;
  for (const int ordinal : ordinals) {
    levels.at(ordinal);  // definedness check
    if (best == 0 || ordinal < best) {
      best = ordinal;
    }
  }
  return best;
}

TransitionTable::TransitionTable(const LevelSet& levels, std::set<std::pair<int, int>> pairs) {
  for (const auto& [from, to] : pairs) {
    levels.at(from);
    levels.at(to);
    if (from == to) {
      throw LevelError("self transition " + std::to_string(from) + " -> " + std::to_string(to) +
                       " is not allowed");
    }
  }
  pairs_ = std::move(pairs);

  // Every ordinal must be able to reach ordinal 1.
  for (int start = 1; start <= levels.count(); ++start) {
    std::set<int> seen{start};
    std::deque<int> frontier{start};
    bool reached = (start == 1);
    while (!frontier.empty() && !reached) {
      const int from = frontier.front();
      frontier.pop_front();
      for (const auto& [f, t] : pairs_) {
        if (f != from || seen.contains(t)) {
          continue;
        }
        if (t == 1) {
          reached = true;
          break;
        }
        seen.insert(t);
        frontier.push_back(t);
      }
    }
    if (!reached) {
      throw LevelError("ordinal " + std::to_string(start) +
                       " cannot reach ordinal 1 through the transition table");
    }
  }
}

TransitionTable TransitionTable::adjacent(const LevelSet& levels) {
  return adjacent_with(levels, {});
}

TransitionTable TransitionTable::adjacent_with(const LevelSet& levels,
                                               std::set<std::pair<int, int>> extra) {
  for (int ordinal = 1; ordinal < levels.count(); ++ordinal) {
    extra.insert({ordinal, ordinal + 1});
    extra.insert({ordinal + 1, ordinal});
  }
  return TransitionTable(levels, std::move(extra));
}

SLStateMachine::SLStateMachine(LevelSet levels, TransitionTable table, int initial,
                               std::string approval_token)
    : levels_(std::move(levels)),
      table_(std::move(table)),
      current_(initial),
      approval_token_(std::move(approval_token)) {
  levels_.at(current_);
}

std::vector<TransitionStep> SLStateMachine::plan_transition(int target) const {
  levels_.at(target);
  if (target == current_) {
    return {};
  }
  // Breadth-first over allowed steps; expanding ordinals in ascending order
  // keeps the chosen shortest path deterministic.
  std::map<int, int> came_from;
  std::deque<int> frontier{current_};
  came_from[current_] = 0;
  while (!frontier.empty() && !came_from.contains(target)) {
    const int from = frontier.front();
    frontier.pop_front();
    for (int to = 1; to <= levels_.count(); ++to) {
      if (!table_.allows(from, to) || came_from.contains(to)) {
        continue;
      }
      came_from[to] = from;
      frontier.push_back(to);
    }
  }
  if (!came_from.contains(target)) {
    throw LevelError("ordinal " + std::to_string(target) +
                     " is unreachable from the current level " + std::to_string(current_));
  }
  std::vector<TransitionStep> steps;
  for (int at = target; at != current_; at = came_from[at]) {
    steps.emplace_back(came_from[at], at);
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

void SLStateMachine::apply_transition(const TransitionStep& step,
                                      const CountermeasureExecutor& executor) {
  const auto& [from, to] = step;
  if (from != current_) {
    throw LevelError("step starts at ordinal " + std::to_string(from) +
                     " but the machine is at " + std::to_string(current_));
  }
  if (!table_.allows(from, to)) {
    throw LevelError("transition " + std::to_string(from) + " -> " + std::to_string(to) +
                     " is not in the table");
  }
  // Executor first; the level only changes once the countermeasure took hold.
  executor(levels_.at(to));
  current_ = to;
}

void SLStateMachine::request_deescalation(int target, const std::string& token,
                                          const CountermeasureExecutor& executor) {
  if (token.empty() || token != approval_token_) {
    throw ApprovalError("de-escalation to ordinal " + std::to_string(target) +
                        " lacks a valid approval token");
  }
  levels_.at(target);
  if (target < current_) {
    throw LevelError("ordinal " + std::to_string(target) + " is more critical than " +
                     std::to_string(current_) + "; not a de-escalation");
  }
  for (const TransitionStep& step : plan_transition(target)) {
    apply_transition(step, executor);
  }
}

void SLStateMachine::reset_to(int ordinal) {
  levels_.at(ordinal);
  current_ = ordinal;
}

}  // namespace saferd
