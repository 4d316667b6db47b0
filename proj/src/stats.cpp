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

#include "plantmon/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "plantmon/csv.hpp"

namespace plantmon::stats {

std::string VarianceComponents::flags() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += '|';
    out += name;
  };
  add(degenerate, "degenerate");
  add(ms_tank_zero, "ms_tank_zero");
  add(clipped_tank, "clipped_tank");
  add(clipped_treatment, "clipped_treatment");
  return out;
}

VarianceComponents fit_nested(std::span<const Observation> observations) {
  std::map<std::string, std::string> tank_treatment;
  std::map<std::string, std::map<std::string, std::vector<double>>> groups;
  for (const auto& o : observations) {
    auto [it, inserted] = tank_treatment.emplace(o.tank, o.treatment);
    if (!inserted && it->second != o.treatment) {
      throw ConfigError("tank '" + o.tank + "' appears under treatments " +
                        it->second + " and " + o.treatment);
    }
    if (!std::isfinite(o.value)) {
      throw DataError("non-finite observation in tank '" + o.tank + "'");
    }
    groups[o.treatment][o.tank].push_back(o.value);
  }
  VarianceComponents vc;
  vc.a = groups.size();
  if (vc.a < 2) throw ConfigError("nested design needs >= 2 treatments");
  vc.b = groups.begin()->second.size();
  vc.n = groups.begin()->second.begin()->second.size();
  for (const auto& [trt, tanks] : groups) {
    if (tanks.size() != vc.b) {
      throw ConfigError("unbalanced design: treatment " + trt + " has " +
                        std::to_string(tanks.size()) + " tanks, expected " +
                        std::to_string(vc.b));
    }
    for (const auto& [tank, values] : tanks) {
      if (values.size() != vc.n) {
        throw ConfigError("unbalanced design: tank '" + tank + "' has " +
                          std::to_string(values.size()) + " observations, expected " +
                          std::to_string(vc.n));
      }
    }
  }
  if (vc.b < 2) throw ConfigError("nested design needs >= 2 tanks per treatment");
  if (vc.n < 2) throw ConfigError("nested design needs >= 2 observations per tank");

  const double a = static_cast<double>(vc.a);
  const double b = static_cast<double>(vc.b);
  const double n = static_cast<double>(vc.n);
  double grand = 0.0;
  for (const auto& o : observations) grand += o.value;
  grand /= a * b * n;

  double lo = observations.front().value;
  double hi = lo;
  for (const auto& [trt, tanks] : groups) {
    double trt_mean = 0.0;
    std::vector<double> tank_means;
    for (const auto& [tank, values] : tanks) {
      double m = 0.0;
      for (double v : values) m += v;
      m /= n;
      tank_means.push_back(m);
      trt_mean += m;
      for (double v : values) {
        vc.ss_residual += (v - m) * (v - m);
        vc.ss_total += (v - grand) * (v - grand);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    trt_mean /= b;
    for (double m : tank_means) vc.ss_tank += n * (m - trt_mean) * (m - trt_mean);
    vc.ss_treatment += b * n * (trt_mean - grand) * (trt_mean - grand);
  }

  vc.df_treatment = a - 1.0;
  vc.df_tank = a * (b - 1.0);
  vc.df_residual = a * b * (n - 1.0);
  vc.ms_treatment = vc.ss_treatment / vc.df_treatment;
  vc.ms_tank = vc.ss_tank / vc.df_tank;
  vc.ms_residual = vc.ss_residual / vc.df_residual;

  if (lo == hi) {
    vc.degenerate = true;
    vc.ss_treatment = vc.ss_tank = vc.ss_residual = vc.ss_total = 0.0;
    vc.ms_treatment = vc.ms_tank = vc.ms_residual = 0.0;
    vc.f_stat = std::numeric_limits<double>::quiet_NaN();
    vc.p_value = 1.0;
    return vc;
  }

  vc.var_residual = vc.ms_residual;
  const double tank = (vc.ms_tank - vc.ms_residual) / n;
  vc.clipped_tank = tank < 0.0;
  vc.var_tank = std::max(0.0, tank);
  const double trt = (vc.ms_treatment - vc.ms_tank) / (b * n);
  vc.clipped_treatment = trt < 0.0;
  vc.var_treatment = std::max(0.0, trt);

  // Tank means that agree up to rounding count as identical.
  const double scale = std::max(grand * grand, vc.ss_total / (a * b * n));
  if (vc.ms_tank <= 1e-24 * scale) {
    vc.ms_tank_zero = true;
    if (vc.ms_treatment > 1e-24 * scale) {
      vc.f_stat = std::numeric_limits<double>::infinity();
      vc.p_value = 0.0;
    } else {
      vc.f_stat = std::numeric_limits<double>::quiet_NaN();
      vc.p_value = 1.0;
    }
    return vc;
  }
  vc.f_stat = vc.ms_treatment / vc.ms_tank;
  vc.p_value = f_survival(vc.f_stat, vc.df_treatment, vc.df_tank);
  return vc;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 200;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) return h;
  }
  // The fraction has stalled at the working precision; h is as good as
  // further terms would make it.
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0) || !(b > 0)) throw ConfigError("incomplete beta needs a, b > 0");
  if (!(x >= 0 && x <= 1)) throw ConfigError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0) || !(d2 > 0)) throw ConfigError("F distribution needs positive dfs");
  if (std::isnan(f)) throw ConfigError("F statistic is NaN");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  const double x = d2 / (d2 + d1 * f);
  return std::clamp(incomplete_beta(d2 / 2.0, d1 / 2.0, x), 0.0, 1.0);
}

bool significant(const VarianceComponents& vc, double alpha) {
  return vc.p_value <= alpha;
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::treatment: return "treatment";
    case Source::tank: return "tank";
    case Source::residual: return "residual";
  }
  return "?";
}

Source dominant_source(const VarianceComponents& vc) {
  if (vc.var_treatment >= vc.var_tank && vc.var_treatment >= vc.var_residual) {
    return Source::treatment;
  }
  if (vc.var_tank >= vc.var_residual) return Source::tank;
  return Source::residual;
}

std::vector<DayResult> fit_by_day(std::span<const dataset::GroundTruth> records) {
  std::map<int, std::vector<const dataset::GroundTruth*>> by_day;
  for (const auto& g : records) by_day[g.dat].push_back(&g);
  std::vector<DayResult> out;
  for (Response r : kResponses) {
    for (const auto& [dat, rows] : by_day) {
      std::vector<Observation> obs;
      obs.reserve(rows.size());
      for (const auto* g : rows) {
        obs.push_back({std::string(to_string(g->treatment)), g->tank, (*g)[r]});
      }
      try {
        out.push_back({r, dat, fit_nested(obs)});
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(to_string(r)) + " day " + std::to_string(dat) +
                          ": " + e.what());
      }
    }
  }
  return out;
}

void write_report_csv(std::span<const DayResult> results, std::ostream& out) {
  csv::Writer w(out);
  w.field("variable").field("dat").field("var_trt").field("var_tank");
  w.field("var_res").field("f").field("p").field("dominant").field("flags");
  w.end_row();
  for (const auto& r : results) {
    const auto& c = r.components;
    w.field(to_string(r.variable)).field(r.dat);
    w.field(c.var_treatment).field(c.var_tank).field(c.var_residual);
    w.field(c.f_stat).field(c.p_value);
    w.field(to_string(dominant_source(c))).field(c.flags());
    w.end_row();
  }
}

}  // namespace plantmon::stats
