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

// Compute-energy ledger and embodied nitrogen waste.
//
// All energies are held in watt-hours. Conversion to kWh happens only when
// a report is rendered.

#ifndef PLANTMON_ENERGY_HPP_
#define PLANTMON_ENERGY_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "plantmon/common.hpp"

namespace plantmon::energy {

inline constexpr double kDefaultPowerFloorW = 5.0;
inline constexpr double kWhPerKWh = 1000.0;

enum class Phase { training, inference };
std::string_view to_string(Phase p);

struct RunMeasurement {
  std::string label;
  Phase phase = Phase::inference;
  double mu_p = 0.0;     // W
  double sigma_p = 0.0;  // W, measured
  double mu_t = 0.0;     // h
  double sigma_t = 0.0;  // h
  std::optional<double> power_floor_w;  // when set, sigma_p is floored

  double effective_sigma_p() const;
};

// Throws ConfigError unless mu_p, mu_t > 0 and sigmas, floor >= 0.
void validate(const RunMeasurement& m);

struct EnergyEstimate {
  double mu_wh = 0.0;
  double sigma_wh = 0.0;
};

double apply_power_floor(double measured_sd, double floor = kDefaultPowerFloorW);

// mu = mu_p * mu_t and
// sigma = sqrt((mu_t sigma_p)^2 + (mu_p sigma_t)^2 + (sigma_p sigma_t)^2).
EnergyEstimate energy(const RunMeasurement& m);

struct ScalingScenario {
  std::size_t n_heads = 10000;
  std::size_t days = 28;
  std::map<std::string, EnergyEstimate> per_sample;  // inference, by label
};

// Per-sample estimate times n_heads * days; throws ConfigError for an
// unknown label or an empty scenario.
EnergyEstimate scale_inference(const ScalingScenario& scenario, std::string_view label);

struct EmbodiedNParams {
  double tissue_n_g_mu = 0.0;  // per plant
  double tissue_n_g_sigma = 0.0;
  double nue = 0.46;
  double kwh_per_kg_low = 0.0;
  double kwh_per_kg_avg = 0.0;
  double kwh_per_kg_high = 0.0;
};

void validate(const EmbodiedNParams& p);

struct EmbodiedWaste {
  double bioaccumulated_kg = 0.0;
  double bioaccumulated_sigma_kg = 0.0;
  double applied_kg = 0.0;
  double applied_sigma_kg = 0.0;
  double wasted_kg = 0.0;
  double wasted_sigma_kg = 0.0;
  double embodied_wh_low = 0.0;
  double embodied_wh_avg = 0.0;
  double embodied_wh_high = 0.0;
};

// Sigmas follow linearly from the tissue-N sigma.
EmbodiedWaste embodied_waste(const EmbodiedNParams& p, std::size_t n_heads);

struct Comparison {
  double ratio_low = 0.0;
  double ratio_avg = 0.0;
  double ratio_high = 0.0;
  double offset_fraction = 0.0;  // compute / embodied_avg
};

Comparison compare(double compute_wh, const EmbodiedWaste& waste);

// Waste-to-compute ratios reachable with one-sigma excursions of the
// wasted mass and the compute energy.
struct RatioEnvelope {
  double min = 0.0;
  double max = 0.0;
};

RatioEnvelope ratio_envelope(const EnergyEstimate& compute, const EmbodiedWaste& waste,
                             const EmbodiedNParams& p);

// Per-sample energy over the baseline's; throws ConfigError when the
// baseline is missing or not positive.
std::map<std::string, double> relative_intensity(
    const std::map<std::string, double>& per_sample_wh, std::string_view baseline);

// --- ledger file ---

struct PerSampleEntry {
  std::string label;
  std::optional<std::string> measurement;  // derive from this measurement
  EnergyEstimate estimate;                // used when measurement is unset
};

struct CombinedEntry {
  std::string label;
  std::vector<std::string> parts;
};

struct LedgerInput {
  std::vector<RunMeasurement> measurements;
  std::vector<PerSampleEntry> per_sample_inference;
  std::vector<CombinedEntry> combined;
  std::size_t n_heads = 10000;
  std::size_t days = 28;
  std::string baseline;
  std::string compare_to;
  EmbodiedNParams embodied;
  std::vector<double> claimed_ratio_bounds;
};

// Throws ConfigError for malformed or empty input.
LedgerInput parse_ledger(const nlohmann::json& doc);
LedgerInput read_ledger(const std::string& path);

struct ScenarioTotal {
  std::string label;
  EnergyEstimate total;
  std::vector<std::string> parts;  // empty unless combined
};

struct ClaimCheck {
  double claimed = 0.0;
  bool derivable = false;  // inside the one-sigma envelope
};

struct LedgerReport {
  LedgerInput input;
  std::vector<std::pair<std::string, EnergyEstimate>> measured;  // by measurement
  std::map<std::string, EnergyEstimate> per_sample;
  std::map<std::string, double> relative;
  std::vector<ScenarioTotal> totals;  // per-sample entries, then combined
  EmbodiedWaste waste;
  Comparison comparison;
  RatioEnvelope envelope;
  std::vector<ClaimCheck> claims;
};

LedgerReport build_report(const LedgerInput& input);

nlohmann::json to_json(const LedgerReport& report);
void write_markdown(const LedgerReport& report, std::ostream& out);
// Log-axis bar chart: scenario totals and embodied waste energy (avg with
// low..high whisker).
std::string render_svg(const LedgerReport& report, bool timestamp);

}  // namespace plantmon::energy

#endif  // PLANTMON_ENERGY_HPP_
