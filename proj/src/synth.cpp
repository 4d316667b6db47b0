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

#include "plantmon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "plantmon/csv.hpp"
#include "plantmon/random.hpp"

namespace plantmon::synth {

using nlohmann::json;

std::array<ResponseModel, kResponseCount> SynthConfig::default_responses() {
  return {{
      {Shape::growth, 250.0, 0.30, 18.0, 0.0, 0.35},   // fw, g
      {Shape::growth, 12.0, 0.28, 19.0, 0.0, 0.35},    // dm, g
      {Shape::decline, 6.0, 0.25, 17.0, 0.30, 0.25},   // n, %
      {Shape::decline, 0.9, 0.25, 17.0, 0.30, 0.30},   // p
      {Shape::decline, 8.0, 0.25, 17.0, 0.25, 0.30},   // k
      {Shape::decline, 1.2, 0.25, 17.0, 0.20, 0.25},   // ca
      {Shape::decline, 0.35, 0.25, 17.0, 0.15, 0.10},  // mg
      {Shape::decline, 0.30, 0.25, 17.0, 0.20, 0.20},  // s
  }};
}

SynthConfig separated_config() {
  SynthConfig c;
  for (auto& r : c.responses) r.strength_exponent = 1.5;
  return c;
}

SynthConfig null_config() {
  SynthConfig c;
  for (auto& r : c.responses) r.strength_exponent = 0.0;
  return c;
}

void validate(const SynthConfig& c) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(c.strengths[i] > 0 && c.strengths[i] <= 1)) {
      throw ConfigError("treatment strengths must be in (0, 1]");
    }
  }
  if (!(c.strengths[0] > c.strengths[1] && c.strengths[1] > c.strengths[2])) {
    throw ConfigError("treatment strengths must be strictly decreasing T1 > T2 > T3");
  }
  if (c.tanks_per_treatment < 1) throw ConfigError("tanks_per_treatment must be >= 1");
  if (c.plants_per_tank < 1) throw ConfigError("plants_per_tank must be >= 1");
  if (c.last_day < c.first_day) throw ConfigError("last_day must be >= first_day");
  if (!std::is_sorted(c.sampling_days.begin(), c.sampling_days.end()) ||
      std::adjacent_find(c.sampling_days.begin(), c.sampling_days.end()) !=
          c.sampling_days.end()) {
    throw ConfigError("sampling_days must be strictly increasing");
  }
  for (int d : c.sampling_days) {
    if (d < c.first_day || d > c.last_day) {
      throw ConfigError("sampling day " + std::to_string(d) + " outside the imaging range");
    }
  }
  if (c.samples_per_tank_per_day * c.sampling_days.size() > c.plants_per_tank) {
    throw ConfigError("sampling schedule harvests " +
                      std::to_string(c.samples_per_tank_per_day * c.sampling_days.size()) +
                      " plants per tank but a tank holds " +
                      std::to_string(c.plants_per_tank));
  }
  for (std::size_t i = 0; i < kResponseCount; ++i) {
    const auto& r = c.responses[i];
    const std::string who = "response " + std::string(to_string(kResponses[i])) + ": ";
    if (!(r.k_control > 0)) throw ConfigError(who + "k_control must be > 0");
    if (!(r.rate > 0)) throw ConfigError(who + "rate must be > 0");
    if (!(r.decline_depth >= 0 && r.decline_depth < 1)) {
      throw ConfigError(who + "decline_depth must be in [0, 1)");
    }
    if (!(r.strength_exponent >= 0)) throw ConfigError(who + "strength_exponent must be >= 0");
  }
  if (!(c.tank_effect_sd >= 0) || !(c.residual_sd >= 0) || !(c.feature_noise_sd >= 0)) {
    throw ConfigError("standard deviations must be >= 0");
  }
  const std::size_t universe = indices::feature_names(indices::default_registry()).size();
  if (c.feature_count < 1 || c.feature_count > universe) {
    throw ConfigError("feature_count must be in [1, " + std::to_string(universe) + "]");
  }
}

namespace {

std::string shape_name(Shape s) { return s == Shape::growth ? "growth" : "decline"; }

Shape parse_shape(const std::string& s) {
  if (s == "growth") return Shape::growth;
  if (s == "decline") return Shape::decline;
  throw ConfigError("unknown curve shape '" + s + "'");
}

}  // namespace

json to_json(const SynthConfig& c) {
  json responses = json::object();
  for (std::size_t i = 0; i < kResponseCount; ++i) {
    const auto& r = c.responses[i];
    responses[std::string(to_string(kResponses[i]))] = {
        {"shape", shape_name(r.shape)},         {"k_control", r.k_control},
        {"rate", r.rate},                       {"midpoint", r.midpoint},
        {"decline_depth", r.decline_depth},     {"strength_exponent", r.strength_exponent}};
  }
  return {{"seed", c.seed},
          {"strengths", c.strengths},
          {"tanks_per_treatment", c.tanks_per_treatment},
          {"plants_per_tank", c.plants_per_tank},
          {"first_day", c.first_day},
          {"last_day", c.last_day},
          {"sampling_days", c.sampling_days},
          {"samples_per_tank_per_day", c.samples_per_tank_per_day},
          {"responses", responses},
          {"tank_effect_sd", c.tank_effect_sd},
          {"residual_sd", c.residual_sd},
          {"feature_count", c.feature_count},
          {"feature_noise_sd", c.feature_noise_sd},
          {"feature_map_seed", c.feature_map_seed}};
}

SynthConfig from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
  SynthConfig c;
  try {
    if (j.contains("preset")) {
      const auto p = j["preset"].get<std::string>();
      if (p == "separated") {
        c = separated_config();
      } else if (p == "null") {
        c = null_config();
      } else if (p != "default") {
        throw ConfigError("unknown synth preset '" + p + "'");
      }
    }
    static const std::set<std::string> kKnown = {
        "preset", "seed", "strengths", "tanks_per_treatment", "plants_per_tank",
        "first_day", "last_day", "sampling_days", "samples_per_tank_per_day",
        "responses", "tank_effect_sd", "residual_sd", "feature_count",
        "feature_noise_sd", "feature_map_seed"};
    for (const auto& [key, _] : j.items()) {
      if (!kKnown.count(key)) throw ConfigError("unknown synth setting '" + key + "'");
    }
    c.seed = j.value("seed", c.seed);
    c.strengths = j.value("strengths", c.strengths);
    c.tanks_per_treatment = j.value("tanks_per_treatment", c.tanks_per_treatment);
    c.plants_per_tank = j.value("plants_per_tank", c.plants_per_tank);
    c.first_day = j.value("first_day", c.first_day);
    c.last_day = j.value("last_day", c.last_day);
    c.sampling_days = j.value("sampling_days", c.sampling_days);
    c.samples_per_tank_per_day = j.value("samples_per_tank_per_day", c.samples_per_tank_per_day);
    c.tank_effect_sd = j.value("tank_effect_sd", c.tank_effect_sd);
    c.residual_sd = j.value("residual_sd", c.residual_sd);
    c.feature_count = j.value("feature_count", c.feature_count);
    c.feature_noise_sd = j.value("feature_noise_sd", c.feature_noise_sd);
    c.feature_map_seed = j.value("feature_map_seed", c.feature_map_seed);
    if (j.contains("responses")) {
      for (const auto& [name, rj] : j["responses"].items()) {
        auto& r = c.responses[index_of(parse_response(name))];
        if (rj.contains("shape")) r.shape = parse_shape(rj["shape"].get<std::string>());
        r.k_control = rj.value("k_control", r.k_control);
        r.rate = rj.value("rate", r.rate);
        r.midpoint = rj.value("midpoint", r.midpoint);
        r.decline_depth = rj.value("decline_depth", r.decline_depth);
        r.strength_exponent = rj.value("strength_exponent", r.strength_exponent);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed synth config: ") + e.what());
  }
  validate(c);
  return c;
}

double curve(const SynthConfig& c, Response r, Treatment t, double dat) {
  const auto& m = c.responses[index_of(r)];
  const double k = m.k_control * std::pow(c.strengths[index_of(t)], m.strength_exponent);
  const double logistic = 1.0 / (1.0 + std::exp(-m.rate * (dat - m.midpoint)));
  if (m.shape == Shape::growth) return k * logistic;
  return k * (1.0 - m.decline_depth * logistic);
}

std::string tank_label(Treatment t, std::size_t k) {
  return std::string(to_string(t)) + "-" + std::to_string(k + 1);
}

std::string sample_id(Treatment t, std::size_t tank, std::size_t position) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "P%02zu-", position + 1);
  return buf + tank_label(t, tank);
}

std::size_t survivors(const SynthConfig& c, int dat) {
  std::size_t harvested = 0;
  for (int d : c.sampling_days) {
    if (d <= dat) harvested += c.samples_per_tank_per_day;
  }
  return c.plants_per_tank - std::min(harvested, c.plants_per_tank);
}

namespace {

struct FeatureMap {
  std::vector<double> intercept;
  std::vector<std::array<double, kResponseCount>> coef;
};

FeatureMap make_feature_map(const SynthConfig& c) {
  Rng rng(c.feature_map_seed);
  FeatureMap m;
  m.intercept.resize(c.feature_count);
  m.coef.resize(c.feature_count);
  for (std::size_t j = 0; j < c.feature_count; ++j) {
    m.intercept[j] = rng.uniform(-0.2, 0.2);
    for (std::size_t k = 0; k < kResponseCount; ++k) {
      m.coef[j][k] = rng.uniform(-0.15, 0.15);
    }
    const double magnitude = rng.uniform(0.5, 1.0);
    m.coef[j][j % kResponseCount] = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  return m;
}

struct Plant {
  std::size_t position = 0;
  std::array<double, kResponseCount> factor{};
  int harvest_day = -1;  // -1 when never harvested
};

}  // namespace

Dataset generate(const SynthConfig& c) {
  validate(c);
  const FeatureMap fmap = make_feature_map(c);
  const std::size_t n_tanks = 3 * c.tanks_per_treatment;

  // Plant effects.
  std::vector<std::vector<Plant>> tanks(n_tanks);
  {
    Rng rng(derive_seed(c.seed, 1));
    for (std::size_t t = 0; t < n_tanks; ++t) {
      std::array<double, kResponseCount> u{};
      for (double& v : u) v = rng.normal(0.0, c.tank_effect_sd);
      tanks[t].resize(c.plants_per_tank);
      for (std::size_t p = 0; p < c.plants_per_tank; ++p) {
        tanks[t][p].position = p;
        for (std::size_t k = 0; k < kResponseCount; ++k) {
          const double e = rng.normal(0.0, c.residual_sd);
          tanks[t][p].factor[k] = std::max(0.05, 1.0 + u[k] + e);
        }
      }
    }
  }

  // Harvest schedule.
  {
    Rng rng(derive_seed(c.seed, 2));
    for (int day : c.sampling_days) {
      for (auto& plants : tanks) {
        std::vector<std::size_t> alive;
        for (const auto& p : plants) {
          if (p.harvest_day < 0) alive.push_back(p.position);
        }
        rng.shuffle(alive);
        for (std::size_t k = 0; k < c.samples_per_tank_per_day; ++k) {
          plants[alive[k]].harvest_day = day;
        }
      }
    }
  }

  Dataset out;
  out.features.names = indices::feature_names(indices::default_registry(), c.feature_count);
  Rng noise(derive_seed(c.seed, 3));
  for (int day = c.first_day; day <= c.last_day; ++day) {
    for (std::size_t t = 0; t < n_tanks; ++t) {
      const Treatment trt = kTreatments[t / c.tanks_per_treatment];
      const std::size_t k_tank = t % c.tanks_per_treatment;
      std::array<double, kResponseCount> base{};
      for (std::size_t k = 0; k < kResponseCount; ++k) {
        base[k] = curve(c, kResponses[k], trt, day);
      }
      for (const auto& plant : tanks[t]) {
        if (plant.harvest_day >= 0 && plant.harvest_day < day) continue;
        LatentRow row;
        row.sample_id = sample_id(trt, k_tank, plant.position);
        row.tank = tank_label(trt, k_tank);
        row.treatment = trt;
        row.dat = day;
        for (std::size_t k = 0; k < kResponseCount; ++k) {
          row.values[k] = base[k] * plant.factor[k];
        }
        indices::FeatureVector fv;
        fv.sample_id = row.sample_id;
        fv.tank = row.tank;
        fv.treatment = trt;
        fv.dat = day;
        fv.values.resize(c.feature_count);
        for (std::size_t j = 0; j < c.feature_count; ++j) {
          double v = fmap.intercept[j];
          for (std::size_t k = 0; k < kResponseCount; ++k) {
            v += fmap.coef[j][k] * row.values[k] / c.responses[k].k_control;
          }
          fv.values[j] = v + noise.normal(0.0, c.feature_noise_sd);
        }
        if (plant.harvest_day == day) {
          dataset::GroundTruth g;
          g.sample_id = row.sample_id;
          g.tank = row.tank;
          g.treatment = trt;
          g.dat = day;
          g.values = row.values;
          out.ground_truth.push_back(std::move(g));
        }
        out.features.rows.push_back(std::move(fv));
        out.latent.push_back(std::move(row));
      }
    }
  }
  return out;
}

stats::VarianceComponents true_components(const SynthConfig& c, Response r, int dat) {
  validate(c);
  std::array<double, 3> mu{};
  for (std::size_t i = 0; i < 3; ++i) mu[i] = curve(c, r, kTreatments[i], dat);
  const double mean = (mu[0] + mu[1] + mu[2]) / 3.0;
  double ss = 0.0;
  double sq = 0.0;
  for (double m : mu) {
    ss += (m - mean) * (m - mean);
    sq += m * m;
  }
  stats::VarianceComponents vc;
  vc.a = 3;
  vc.b = c.tanks_per_treatment;
  vc.n = c.samples_per_tank_per_day;
  vc.var_treatment = ss / 2.0;
  vc.var_tank = sq / 3.0 * c.tank_effect_sd * c.tank_effect_sd;
  vc.var_residual = sq / 3.0 * c.residual_sd * c.residual_sd;
  return vc;
}

void write_dataset(const SynthConfig& c, const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  indices::write_feature_csv(d.features, dir / "features.csv");
  {
    std::ofstream f(dir / "ground_truth.csv", std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / "ground_truth.csv").string());
    dataset::write_label_csv(d.ground_truth, f);
  }
  {
    std::ofstream f(dir / "latent.csv", std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (dir / "latent.csv").string());
    csv::Writer w(f);
    w.field("sample_id").field("tank").field("treatment").field("dat");
    for (Response r : kResponses) w.field(to_string(r));
    w.end_row();
    for (const auto& row : d.latent) {
      w.field(row.sample_id).field(row.tank).field(to_string(row.treatment)).field(row.dat);
      for (double v : row.values) w.field(v);
      w.end_row();
    }
  }
  json truth;
  truth["config"] = to_json(c);
  json comps = json::array();
  for (Response r : kResponses) {
    for (int day : c.sampling_days) {
      const auto vc = true_components(c, r, day);
      comps.push_back({{"variable", to_string(r)},
                       {"dat", day},
                       {"var_trt", vc.var_treatment},
                       {"var_tank", vc.var_tank},
                       {"var_res", vc.var_residual}});
    }
  }
  truth["true_components"] = comps;
  json surv = json::array();
  for (int day = c.first_day; day <= c.last_day; ++day) {
    surv.push_back({{"dat", day}, {"survivors_per_tank", survivors(c, day)}});
  }
  truth["survivors"] = surv;
  std::ofstream f(dir / "truth.json", std::ios::binary);
  if (!f) throw ConfigError("cannot write " + (dir / "truth.json").string());
  f << truth.dump(2) << '\n';
}

}  // namespace plantmon::synth
