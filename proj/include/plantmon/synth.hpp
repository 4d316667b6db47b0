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

// Synthetic nutrient-depletion experiment with known generating parameters.
//
// Each response variable follows a logistic curve. Growth variables (fw,
// dm) rise as K / (1 + exp(-r (t - t0))); concentrations decline as
// K (1 - depth / (1 + exp(-r (t - t0)))). A treatment with strength s uses
// K = K_control * s^exponent, so exponent 0 makes every treatment identical.
// A plant's value is the treatment curve times max(0.05, 1 + u + e), where
// u ~ N(0, tank_effect_sd) is drawn per tank and variable and
// e ~ N(0, residual_sd) per plant and variable (persistent over days).
//
// Features are linear in z_k = value_k / K_control_k plus N(0,
// feature_noise_sd) noise. Feature j loads mainly on variable j mod 8.
//
// Random streams, each a separate Rng: the feature map uses
// feature_map_seed; plant effects use derive_seed(seed, 1) and are drawn
// per treatment, tank (u for the 8 variables, then e for each plant in
// position order); harvest selection uses derive_seed(seed, 2), one
// shuffle of the surviving positions per sampling day and tank; feature
// noise uses derive_seed(seed, 3), drawn row by row in output order.

#ifndef PLANTMON_SYNTH_HPP_
#define PLANTMON_SYNTH_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "plantmon/common.hpp"
#include "plantmon/dataset.hpp"
#include "plantmon/indices.hpp"
#include "plantmon/stats.hpp"

namespace plantmon::synth {

enum class Shape { growth, decline };

struct ResponseModel {
  Shape shape = Shape::growth;
  double k_control = 1.0;
  double rate = 0.3;
  double midpoint = 18.0;
  double decline_depth = 0.0;  // decline only, in [0, 1)
  double strength_exponent = 0.0;
};

struct SynthConfig {
  std::uint64_t seed = 0;
  std::array<double, 3> strengths = {1.0, 0.5, 0.25};
  std::size_t tanks_per_treatment = 3;
  std::size_t plants_per_tank = 72;
  int first_day = dataset::kFirstImagingDay;
  int last_day = 30;
  std::vector<int> sampling_days{dataset::kSamplingDays.begin(),
                                 dataset::kSamplingDays.end()};
  std::size_t samples_per_tank_per_day = 5;
  std::array<ResponseModel, kResponseCount> responses = default_responses();
  double tank_effect_sd = 0.04;
  double residual_sd = 0.08;
  std::size_t feature_count = 106;
  double feature_noise_sd = 0.02;
  std::uint64_t feature_map_seed = 1;

  static std::array<ResponseModel, kResponseCount> default_responses();
};

// Strongly separated treatments (large exponents).
SynthConfig separated_config();
// Every exponent zero: all treatments share the control curves.
SynthConfig null_config();

// Throws ConfigError on an invalid configuration, including a strength
// order that is not strictly decreasing and a schedule that harvests more
// plants than a tank holds.
void validate(const SynthConfig& c);

nlohmann::json to_json(const SynthConfig& c);
// Starts from the defaults and overrides the fields present.
SynthConfig from_json(const nlohmann::json& j);

// Treatment curve without plant or tank effects.
double curve(const SynthConfig& c, Response r, Treatment t, double dat);

struct LatentRow {
  std::string sample_id;
  std::string tank;
  Treatment treatment = Treatment::T1;
  int dat = 0;
  dataset::ResponseValues values{};
};

struct Dataset {
  indices::FeatureTable features;
  std::vector<dataset::GroundTruth> ground_truth;
  std::vector<LatentRow> latent;  // same order as the feature rows
};

// Rows ordered by day, then tank, then plant position. A harvested plant
// is imaged on its harvest day and absent afterwards.
Dataset generate(const SynthConfig& c);

std::string tank_label(Treatment t, std::size_t k);  // "T1-1"
std::string sample_id(Treatment t, std::size_t tank, std::size_t position);

// Generating components at day `dat` (stats::VarianceComponents with only
// the var_* fields set): the sample variance over treatments of the curve
// values, and the treatment mean of (curve * sd)^2 for tank and residual.
stats::VarianceComponents true_components(const SynthConfig& c, Response r, int dat);

// plants_per_tank minus samples_per_tank_per_day per sampling day <= dat.
std::size_t survivors(const SynthConfig& c, int dat);

// Writes features.csv, ground_truth.csv, latent.csv and truth.json.
void write_dataset(const SynthConfig& c, const Dataset& d, const std::filesystem::path& dir);

}  // namespace plantmon::synth

#endif  // PLANTMON_SYNTH_HPP_
