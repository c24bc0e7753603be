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
#include "record_format.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace saferd::detail {

std::vector<Record> tokenize_document(const std::string& text) {
  std::vector<Record> records;
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    Record record{line_no, {}};
    std::istringstream tokens(line);
    std::string token;
    while (tokens >> token) {
      record.tokens.push_back(token);
    }
    if (!record.tokens.empty()) {
      records.push_back(std::move(record));
    }
  }
  return records;
}

bool parse_u32(const std::string& token, std::uint32_t& out) {
  const char* first = token.data();
  const char* last = first + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_i64(const std::string& token, std::int64_t& out) {
  const char* first = token.data();
  const char* last = first + token.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::optional<std::pair<std::string, std::string>> split_key_value(const std::string& token) {
  const auto eq = token.find('=');
  if (eq == std::string::npos || eq == 0) {
    return std::nullopt;
  }
  return std::make_pair(token.substr(0, eq), token.substr(eq + 1));
}

std::optional<std::vector<std::string>> split_bracket_list(const std::string& token) {
  if (token.size() < 2 || token.front() != '[' || token.back() != ']') {
    return std::nullopt;
  }
  const std::string inner = token.substr(1, token.size() - 2);
  std::vector<std::string> items;
  if (inner.empty()) {
    return items;
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = inner.find(',', start);
    const std::string item = inner.substr(start, comma - start);
    if (item.empty()) {
      return std::nullopt;
    }
    items.push_back(item);
    if (comma == std::string::npos) {
      break;
    }
    start = comma + 1;
  }
  return items;
}

}  // namespace saferd::detail
