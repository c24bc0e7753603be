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
#include "saferd/local_loop.hpp"

#include <algorithm>
#include <limits>

#include "saferd/errors.hpp"

namespace saferd {

void validate_probe_rule(const ProbeRule& rule, const LevelSet& levels) {
  if (rule.probe.empty() || rule.metric.empty()) {
    throw LevelError("probe rule needs a probe id and a metric selector");
  }
  if (rule.thresholds.empty()) {
    throw LevelError("probe rule '" + rule.probe + "' has no thresholds");
  }
  for (std::size_t i = 0; i < rule.thresholds.size(); ++i) {
    const auto& [bound, level] = rule.thresholds[i];
    levels.at(level);
    if (i > 0) {
      const auto& [prev_bound, prev_level] = rule.thresholds[i - 1];
      if (bound <= prev_bound) {
        throw LevelError("probe rule '" + rule.probe + "' bounds must ascend strictly");
      }
      if (level >= prev_level) {
        throw LevelError("probe rule '" + rule.probe +
                         "' demands must grow more critical with the bound");
      }
    }
  }
}

std::optional<int> demanded_by(const ProbeRule& rule, double value) {
  std::optional<int> demanded;
  for (const auto& [bound, level] : rule.thresholds) {
    if (value >= bound) {
      demanded = level;
    }
  }
  return demanded;
}

void SeededTriggerProbe::arm(int level) {
  std::lock_guard lock(mutex_);
  armed_ = level;
}

std::vector<SecurityEvent> SeededTriggerProbe::sample(std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  if (!armed_) {
    return {};
  }
  SecurityEvent event;
  event.probe = id_;
  event.observed = 1.0;
  event.demanded_level = *armed_;
  event.at_ms = now_ms;
  armed_.reset();
  return {event};
}

RequestRateProbe::RequestRateProbe(ProbeRule rule, RequestCounter& counter)
    : rule_(std::move(rule)), counter_(counter) {}

std::vector<SecurityEvent> RequestRateProbe::sample(std::int64_t now_ms) {
  const auto counts = counter_.drain();
  const std::int64_t window_ms =
      (last_sample_ms_ == std::numeric_limits<std::int64_t>::min())
          ? 0
          : now_ms - last_sample_ms_;
  last_sample_ms_ = now_ms;
  if (window_ms <= 0 || counts.empty()) {
    return {};
  }
  SecurityEvent event;
  event.probe = rule_.probe;
  event.at_ms = now_ms;
  event.demanded_level = 0;
  for (const auto& [source, count] : counts) {
    const double rate = static_cast<double>(count) * 1000.0 / static_cast<double>(window_ms);
    const auto demanded = demanded_by(rule_, rate);
    if (!demanded) {
      continue;
    }
    event.sources.insert(source);
    event.observed = std::max(event.observed, rate);
    if (event.demanded_level == 0 || *demanded < event.demanded_level) {
      event.demanded_level = *demanded;
    }
  }
  if (event.demanded_level == 0) {
    return {};
  }
  return {event};
}

void PeerLevelStore::update(NodeId peer, int level, std::int64_t at_ms) {
  reports_[peer] = PeerLevelReport{peer, level, at_ms};
}

std::vector<PeerLevelReport> PeerLevelStore::fresh(std::int64_t now_ms,
                                                   std::int64_t interval_ms) const {
  std::vector<PeerLevelReport> out;
  for (const auto& [peer, report] : reports_) {
    if (now_ms - report.at_ms <= interval_ms) {
      out.push_back(report);
    }
  }
  return out;
}

std::vector<PeerLevelReport> PeerLevelStore::all() const {
  std::vector<PeerLevelReport> out;
  out.reserve(reports_.size());
  for (const auto& [peer, report] : reports_) {
    out.push_back(report);
  }
  return out;
}

void PeerLevelStore::clear() {
  reports_.clear();
}

std::vector<SecurityEvent> monitor_local(const std::vector<Probe*>& probes, std::int64_t now_ms,
                                         std::vector<std::string>* warnings) {
  std::vector<SecurityEvent> events;
  for (Probe* probe : probes) {
    try {
      auto sampled = probe->sample(now_ms);
      events.insert(events.end(), sampled.begin(), sampled.end());
    } catch (const std::exception& e) {
      if (warnings != nullptr) {
        warnings->push_back("probe '" + probe->id() + "' failed: " + e.what());
      }
    }
  }
  return events;
}

int analyze_demand(const std::vector<SecurityEvent>& events,
                   const std::vector<PeerLevelReport>& fresh_reports, int current,
                   const LevelSet& levels) {
  std::vector<int> values{current};
  for (const SecurityEvent& event : events) {
    values.push_back(event.demanded_level);
  }
  for (const PeerLevelReport& report : fresh_reports) {
    values.push_back(report.level);
  }
  return most_critical(values, levels);
}

ExecuteOutcome plan_and_execute(SLStateMachine& machine, int demanded,
                                const CountermeasureExecutor& executor) {
  ExecuteOutcome outcome;
  if (demanded >= machine.current()) {
    return outcome;
  }
  for (const TransitionStep& step : machine.plan_transition(demanded)) {
    try {
      machine.apply_transition(step, executor);
      outcome.applied.push_back(step);
    } catch (const std::exception& e) {
      outcome.error = e.what();
      break;
    }
  }
  return outcome;
}

}  // namespace saferd
