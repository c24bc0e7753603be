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
#ifndef SAFERD_ERRORS_HPP
#define SAFERD_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace saferd {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A configuration document that cannot be tokenized or has a malformed record.
/// Carries the 1-based line number of the offending record.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A well-formed document that violates a structural invariant. The invariant
/// name (e.g. "cycle", "duplicate id", "multiple roots") is part of the message.
class StructureError : public Error {
 public:
  StructureError(std::string invariant, const std::string& what)
      : Error(invariant + ": " + what), invariant_(std::move(invariant)) {}

  [[nodiscard]] const std::string& invariant() const noexcept { return invariant_; }

 private:
  std::string invariant_;
};

/// Lookup of a subsystem id that is not part of the topology.
class UnknownSubsystemError : public Error {
 public:
  using Error::Error;
};

/// Level-machine misuse: undefined ordinal, illegal step, or unreachable target.
class LevelError : public Error {
 public:
  using Error::Error;
};

/// De-escalation attempted without a valid approval token.
class ApprovalError : public Error {
 public:
  using Error::Error;
};

/// Countermeasure execution failure; the triggering transition is rolled back.
class CountermeasureError : public Error {
 public:
  using Error::Error;
};

/// Harness-level failure: spawn problems, lost clusters, broken baselines.
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace saferd

#endif  // SAFERD_ERRORS_HPP
