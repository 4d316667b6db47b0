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

// Balanced nested ANOVA: treatment (fixed), tank within treatment and
// residual, estimated by the method of moments.

#ifndef PLANTMON_STATS_HPP_
#define PLANTMON_STATS_HPP_

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "plantmon/common.hpp"
#include "plantmon/dataset.hpp"

namespace plantmon::stats {

struct Observation {
  std::string treatment;
  std::string tank;
  double value = 0.0;
};

struct VarianceComponents {
  std::size_t a = 0;  // treatments
  std::size_t b = 0;  // tanks per treatment
  std::size_t n = 0;  // observations per tank

  double ss_treatment = 0.0;
  double ss_tank = 0.0;
  double ss_residual = 0.0;
  double ss_total = 0.0;
  double ms_treatment = 0.0;
  double ms_tank = 0.0;
  double ms_residual = 0.0;
  double df_treatment = 0.0;
  double df_tank = 0.0;
  double df_residual = 0.0;

  double var_treatment = 0.0;
  double var_tank = 0.0;
  double var_residual = 0.0;
  double f_stat = 0.0;  // NaN when undefined
  double p_value = 1.0;

  bool degenerate = false;         // all observations identical
  bool ms_tank_zero = false;       // tank means identical within treatments
  bool clipped_tank = false;       // negative moment estimate set to 0
  bool clipped_treatment = false;  // negative moment estimate set to 0

  // "|"-joined flag names, empty when none is set.
  std::string flags() const;
};

// Throws ConfigError unless every tank sits in one treatment, a, b, n >= 2
// and the design is balanced; the message names the offending tank.
VarianceComponents fit_nested(std::span<const Observation> observations);

// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
// P(F > f) for F ~ F(d1, d2).
double f_survival(double f, double d1, double d2);

bool significant(const VarianceComponents& vc, double alpha = 0.05);

enum class Source { treatment, tank, residual };
std::string_view to_string(Source s);
// Largest variance component; ties resolve treatment, then tank.
Source dominant_source(const VarianceComponents& vc);

struct DayResult {
  Response variable = Response::fw;
  int dat = 0;
  VarianceComponents components;
};

// One fit per (variable, day) present in `records`, days ascending. A
// ConfigError from an unbalanced day is rethrown with the variable and day.
std::vector<DayResult> fit_by_day(std::span<const dataset::GroundTruth> records);

// Columns variable,dat,var_trt,var_tank,var_res,f,p,dominant,flags.
void write_report_csv(std::span<const DayResult> results, std::ostream& out);

}  // namespace plantmon::stats

#endif  // PLANTMON_STATS_HPP_
