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
#ifndef SAFERD_RECORD_FORMAT_HPP
#define SAFERD_RECORD_FORMAT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Line-oriented record tokenizer shared by the topology and node-config
// loaders. One record per line, whitespace-separated tokens, `#` comments.

namespace saferd::detail {

struct Record {
  std::size_t line = 0;  // 1-based
  std::vector<std::string> tokens;
};

[[nodiscard]] std::vector<Record> tokenize_document(const std::string& text);

[[nodiscard]] bool parse_u32(const std::string& token, std::uint32_t& out);
[[nodiscard]] bool parse_i64(const std::string& token, std::int64_t& out);

/// Splits "key=value" at the first '='; nullopt when there is no '='.
[[nodiscard]] std::optional<std::pair<std::string, std::string>> split_key_value(
    const std::string& token);

/// Splits "[a,b,c]" into items; "[]" yields an empty list. Nullopt when the
/// brackets are malformed or an item is empty.
[[nodiscard]] std::optional<std::vector<std::string>> split_bracket_list(
    const std::string& token);

}  // namespace saferd::detail

#endif  // SAFERD_RECORD_FORMAT_HPP
