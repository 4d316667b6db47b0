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

#include "plantmon/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "plantmon/common.hpp"

namespace plantmon::svg {
namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string short_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void open(std::ostringstream& out, double w, double h,
          const std::optional<std::string>& comment) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (comment) out << "<!-- " << escape(*comment) << " -->\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w)
      << "\" height=\"" << num(h) << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void text(std::ostringstream& out, double x, double y, std::string_view s,
          std::string_view anchor = "middle", std::string_view extra = "") {
  out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\""
      << anchor << '"';
  if (!extra.empty()) out << ' ' << extra;
  out << '>' << escape(s) << "</text>\n";
}

}  // namespace

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  // "--" may not appear inside an XML comment.
  for (std::size_t p; (p = out.find("--")) != std::string::npos;) out.replace(p, 2, "- -");
  return out;
}

std::string log_bar_chart(const std::vector<Bar>& bars, std::string_view title,
                          std::string_view y_label,
                          const std::optional<std::string>& comment) {
  if (bars.empty()) throw ConfigError("bar chart needs at least one bar");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& b : bars) {
    if (!(b.value > 0) || !std::isfinite(b.value)) {
      throw ConfigError("log-axis bar '" + b.label + "' must be positive");
    }
    lo = std::min({lo, b.value, b.low.value_or(b.value)});
    hi = std::max({hi, b.value, b.high.value_or(b.value)});
  }
  const int d_lo = static_cast<int>(std::floor(std::log10(std::max(lo, 1e-300))));
  int d_hi = static_cast<int>(std::ceil(std::log10(hi)));
  if (d_hi <= d_lo) d_hi = d_lo + 1;

  const double left = 80, right = 20, top = 40, bottom = 70;
  const double plot_h = 320;
  const double slot = 90;
  const double w = left + right + slot * static_cast<double>(bars.size());
  const double h = top + plot_h + bottom;
  auto y_of = [&](double v) {
    const double f = (std::log10(v) - d_lo) / static_cast<double>(d_hi - d_lo);
    return top + plot_h * (1.0 - std::clamp(f, 0.0, 1.0));
  };

  std::ostringstream out;
  open(out, w, h, comment);
  text(out, w / 2, 24, title, "middle", "font-size=\"14\"");
  for (int d = d_lo; d <= d_hi; ++d) {
    const double y = y_of(std::pow(10.0, d));
    out << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(w - right) << "\" y2=\"" << num(y) << "\" stroke=\"#ddd\"/>\n";
    text(out, left - 6, y + 4, "1e" + std::to_string(d), "end");
  }
  out << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  text(out, 16, top + plot_h / 2, y_label, "middle",
       "transform=\"rotate(-90 16 " + num(top + plot_h / 2) + ")\"");
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    const double y = y_of(b.value);
    out << "<rect x=\"" << num(cx - 25) << "\" y=\"" << num(y) << "\" width=\"50\" height=\""
        << num(top + plot_h - y) << "\" fill=\"#4a7fb5\"/>\n";
    if (b.low || b.high) {
      const double y1 = y_of(b.low.value_or(b.value));
      const double y2 = y_of(b.high.value_or(b.value));
      out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(cx)
          << "\" y2=\"" << num(y2) << "\" stroke=\"black\"/>\n";
      for (double yy : {y1, y2}) {
        out << "<line x1=\"" << num(cx - 8) << "\" y1=\"" << num(yy) << "\" x2=\""
            << num(cx + 8) << "\" y2=\"" << num(yy) << "\" stroke=\"black\"/>\n";
      }
    }
    text(out, cx, y - 6, short_value(b.value));
    text(out, cx, top + plot_h + 18, b.label);
  }
  out << "</svg>\n";
  return out.str();
}

std::string heat_map(const HeatMap& map, const std::optional<std::string>& comment) {
  if (map.values.size() != map.rows.size() * map.cols.size()) {
    throw ConfigError("heat map values do not match its rows and columns");
  }
  if (!(map.vmax > map.vmin)) throw ConfigError("heat map needs vmax > vmin");
  std::size_t label_chars = 4;
  for (const auto& r : map.rows) label_chars = std::max(label_chars, r.size());
  const double left = 12 + 7.0 * static_cast<double>(label_chars);
  const double top = 60, cell = 34, right = 20, bottom = 20;
  const double w = left + right + cell * static_cast<double>(map.cols.size());
  const double h = top + bottom + cell * static_cast<double>(map.rows.size());

  std::ostringstream out;
  open(out, w, h, comment);
  text(out, w / 2, 22, map.title, "middle", "font-size=\"14\"");
  for (std::size_t c = 0; c < map.cols.size(); ++c) {
    text(out, left + cell * (static_cast<double>(c) + 0.5), top - 8, map.cols[c]);
  }
  const double mid = std::clamp(0.0, map.vmin, map.vmax);
  for (std::size_t r = 0; r < map.rows.size(); ++r) {
    const double y = top + cell * static_cast<double>(r);
    text(out, left - 6, y + cell / 2 + 4, map.rows[r], "end");
    for (std::size_t c = 0; c < map.cols.size(); ++c) {
      const double v = map.values[r * map.cols.size() + c];
      const double x = left + cell * static_cast<double>(c);
      std::string fill = "#f4f4f4";
      if (std::isfinite(v)) {
        const double t = std::clamp(v, map.vmin, map.vmax);
        double f = 0.0;
        int red = 255, green = 255, blue = 255;
        if (t >= mid && map.vmax > mid) {
          f = (t - mid) / (map.vmax - mid);
          green = blue = static_cast<int>(std::lround(255 * (1 - f)));
        } else if (t < mid) {
          f = (mid - t) / (mid - map.vmin);
          red = green = static_cast<int>(std::lround(255 * (1 - f)));
        }
        char buf[8];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", red, green, blue);
        fill = buf;
      }
      out << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(cell)
          << "\" height=\"" << num(cell) << "\" fill=\"" << fill
          << "\" stroke=\"white\"/>\n";
      if (std::isfinite(v)) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        text(out, x + cell / 2, y + cell / 2 + 4, buf, "middle", "font-size=\"9\"");
      }
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace plantmon::svg
