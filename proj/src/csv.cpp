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

#include "plantmon/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "plantmon/common.hpp"

namespace plantmon {

std::string_view to_string(Treatment t) {
  switch (t) {
    case Treatment::T1: return "T1";
    case Treatment::T2: return "T2";
    case Treatment::T3: return "T3";
  }
  return "?";
}

Treatment parse_treatment(std::string_view s) {
  if (s == "T1") return Treatment::T1;
  if (s == "T2") return Treatment::T2;
  if (s == "T3") return Treatment::T3;
  throw DataError("unknown treatment '" + std::string(s) + "'");
}

std::string_view to_string(Response r) {
  static constexpr std::array<std::string_view, kResponseCount> kNames = {
      "fw", "dm", "n", "p", "k", "ca", "mg", "s"};
  return kNames[index_of(r)];
}

Response parse_response(std::string_view s) {
  for (Response r : kResponses) {
    if (to_string(r) == s) return r;
  }
  throw ConfigError("unknown response variable '" + std::string(s) + "'");
}

namespace csv {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view field) {
  if (field == "inf") return INFINITY;
  if (field == "-inf") return -INFINITY;
  double v = 0.0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError("not a number: '" + std::string(field) + "'");
  }
  return v;
}

long long parse_int(std::string_view field) {
  long long v = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw DataError("not an integer: '" + std::string(field) + "'");
  }
  return v;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      return out;
    }
    out.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Table::require(std::string_view name) const {
  if (auto c = column(name)) return *c;
  throw DataError(source + ": missing column '" + std::string(name) + "'");
}

Table parse(std::string_view text, std::string source) {
  Table table;
  table.source = std::move(source);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw DataError(table.source + ":" + std::to_string(line_no) +
                      ": expected " + std::to_string(table.header.size()) +
                      " fields, got " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void check_label(std::string_view label) {
  if (label.find_first_of(",\n\r") != std::string_view::npos) {
    throw ConfigError("label '" + std::string(label) +
                      "' contains a separator character");
  }
}

Writer& Writer::field(std::string_view s) {
  check_label(s);
  if (!first_) out_ << ',';
  out_ << s;
  first_ = false;
  return *this;
}

Writer& Writer::field(double v) { return field(format_double(v)); }

Writer& Writer::field(long long v) { return field(std::to_string(v)); }

void Writer::end_row() {
  out_ << '\n';
  first_ = true;
}

}  // namespace csv
}  // namespace plantmon
