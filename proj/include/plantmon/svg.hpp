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

// Small SVG writers for report charts. Output depends only on the inputs;
// the optional comment is the one place a caller may put a timestamp.

#ifndef PLANTMON_SVG_HPP_
#define PLANTMON_SVG_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace plantmon::svg {

std::string escape(std::string_view text);

struct Bar {
  std::string label;
  double value = 0.0;  // > 0
  std::optional<double> low;
  std::optional<double> high;
};

// Vertical bars on a base-10 log axis spanning whole decades.
std::string log_bar_chart(const std::vector<Bar>& bars, std::string_view title,
                          std::string_view y_label,
                          const std::optional<std::string>& comment = std::nullopt);

struct HeatMap {
  std::string title;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  std::vector<double> values;  // row-major; NaN draws an empty cell
  double vmin = -1.0;
  double vmax = 1.0;
};

// Diverging blue-white-red scale centred on zero, one labelled cell per
// value.
std::string heat_map(const HeatMap& map,
                     const std::optional<std::string>& comment = std::nullopt);

}  // namespace plantmon::svg

#endif  // PLANTMON_SVG_HPP_
