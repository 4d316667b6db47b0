// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal CSV support: UTF-8, LF line endings, comma separator, no quoting.
// Labels containing commas or line breaks are rejected on write.

#ifndef PLANTMON_CSV_HPP_
#define PLANTMON_CSV_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace plantmon::csv {

// Shortest decimal representation that round-trips the binary64 value.
std::string format_double(double v);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position, or nullopt when absent.
  std::optional<std::size_t> column(std::string_view name) const;
  // Column position; throws DataError naming the file when absent.
  std::size_t require(std::string_view name) const;

  std::string source;  // path the table was read from, for messages
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string source = "<memory>");

std::vector<std::string> split_line(std::string_view line);

// Throws if the label cannot be written without quoting.
void check_label(std::string_view label);

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& field(std::string_view s);
  Writer& field(double v);
  Writer& field(long long v);
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(std::size_t v) { return field(static_cast<long long>(v)); }
  void end_row();

 private:
  std::ostream& out_;
  bool first_ = true;
};

}  // namespace plantmon::csv

#endif  // PLANTMON_CSV_HPP_
