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

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "plantmon/synth.hpp"
#include "test_util.hpp"

namespace plantmon::synth {
namespace {

SynthConfig quiet_config() {
  SynthConfig c;
  c.tank_effect_sd = 0.0;
  c.residual_sd = 0.0;
  c.feature_noise_sd = 0.0;
  c.feature_count = 4;
  return c;
}

TEST(Synth, Survivors) {
  const SynthConfig c;
  EXPECT_EQ(survivors(c, 4), 72u);
  EXPECT_EQ(survivors(c, 10), 72u);
  EXPECT_EQ(survivors(c, 11), 67u);
  EXPECT_EQ(survivors(c, 14), 62u);
  EXPECT_EQ(survivors(c, 26), 37u);
  EXPECT_EQ(survivors(c, 30), 37u);
}

TEST(Synth, RowCountsFollowTheHarvestSchedule) {
  SynthConfig c;
  c.feature_count = 2;
  const Dataset d = generate(c);
  std::map<std::pair<int, Treatment>, std::size_t> per_day;
  for (const auto& r : d.features.rows) ++per_day[{r.dat, r.treatment}];
  for (Treatment t : kTreatments) {
    EXPECT_EQ((per_day[{4, t}]), 216u);
    for (int day = c.first_day; day <= c.last_day; ++day) {
      // Harvested plants are imaged on their harvest day.
      const std::size_t alive = survivors(c, day - 1);
      EXPECT_EQ((per_day[{day, t}]), 3 * alive) << "day " << day;
    }
  }
  EXPECT_EQ(d.latent.size(), d.features.rows.size());
}

TEST(Synth, GroundTruthOnlyOnSamplingDays) {
  SynthConfig c;
  c.feature_count = 2;
  const Dataset d = generate(c);
  EXPECT_EQ(d.ground_truth.size(), 9u * 5 * 7);
  std::map<std::pair<int, std::string>, std::size_t> per;
  const std::set<int> days(c.sampling_days.begin(), c.sampling_days.end());
  for (const auto& g : d.ground_truth) {
    EXPECT_TRUE(days.count(g.dat));
    ++per[{g.dat, g.tank}];
  }
  for (const auto& [key, n] : per) EXPECT_EQ(n, 5u);
  // Each harvested plant is absent afterwards.
  std::map<std::string, int> last_seen;
  for (const auto& r : d.features.rows) last_seen[r.sample_id] = std::max(last_seen[r.sample_id], r.dat);
  for (const auto& g : d.ground_truth) EXPECT_EQ(last_seen[g.sample_id], g.dat);
}

TEST(Synth, NoiseFreeValuesAreTheCurves) {
  const SynthConfig c = quiet_config();
  const Dataset d = generate(c);
  for (const auto& g : d.ground_truth) {
    for (Response r : kResponses) {
      EXPECT_DOUBLE_EQ(g[r], curve(c, r, g.treatment, g.dat));
    }
  }
}

TEST(Synth, ThreePointLogisticFitRecoversParameters) {
  const SynthConfig c = quiet_config();
  for (Response r : {Response::fw, Response::dm}) {
    const auto& m = c.responses[index_of(r)];
    const double t = 12.0, h = 6.0;
    const double y1 = curve(c, r, Treatment::T1, t);
    const double y2 = curve(c, r, Treatment::T1, t + h);
    const double y3 = curve(c, r, Treatment::T1, t + 2 * h);
    const double k = y2 * (y1 * y2 + y2 * y3 - 2 * y1 * y3) / (y2 * y2 - y1 * y3);
    const double rate = std::log((k / y1 - 1) / (k / y2 - 1)) / h;
    const double mid = t + std::log(k / y1 - 1) / rate;
    EXPECT_NEAR(k, m.k_control, 1e-9 * m.k_control);
    EXPECT_NEAR(rate, m.rate, 1e-9);
    EXPECT_NEAR(mid, m.midpoint, 1e-9);
  }
}

TEST(Synth, StrengthScalesCapacity) {
  const SynthConfig c = separated_config();
  const double full = curve(c, Response::fw, Treatment::T1, 40);
  const double half = curve(c, Response::fw, Treatment::T2, 40);
  EXPECT_NEAR(half / full, std::pow(0.5, 1.5), 1e-3);
  const SynthConfig n = null_config();
  for (Response r : kResponses) {
    EXPECT_EQ(curve(n, r, Treatment::T1, 20), curve(n, r, Treatment::T3, 20));
  }
}

TEST(Synth, Deterministic) {
  SynthConfig c;
  c.feature_count = 6;
  c.seed = 12;
  const Dataset a = generate(c);
  const Dataset b = generate(c);
  ASSERT_EQ(a.features.rows.size(), b.features.rows.size());
  for (std::size_t i = 0; i < a.features.rows.size(); ++i) {
    ASSERT_EQ(a.features.rows[i].values, b.features.rows[i].values);
  }
  c.seed = 13;
  const Dataset other = generate(c);
  EXPECT_NE(a.features.rows[0].values, other.features.rows[0].values);
  plantmon::testing::TempDir x, y;
  write_dataset(c, other, x.path());
  write_dataset(c, generate(c), y.path());
  for (const char* f : {"features.csv", "ground_truth.csv", "latent.csv", "truth.json"}) {
    EXPECT_EQ(plantmon::testing::slurp(x / f), plantmon::testing::slurp(y / f)) << f;
  }
}

TEST(Synth, FeatureNoiseDoesNotMoveTheResponses) {
  SynthConfig c;
  c.feature_count = 3;
  const Dataset a = generate(c);
  c.feature_noise_sd = 0.5;
  const Dataset b = generate(c);
  ASSERT_EQ(a.ground_truth.size(), b.ground_truth.size());
  for (std::size_t i = 0; i < a.ground_truth.size(); ++i) {
    EXPECT_EQ(a.ground_truth[i].values, b.ground_truth[i].values);
  }
}

TEST(Synth, TrueComponents) {
  const SynthConfig c = quiet_config();
  const auto vc = true_components(c, Response::fw, 21);
  EXPECT_EQ(vc.var_tank, 0.0);
  EXPECT_EQ(vc.var_residual, 0.0);
  EXPECT_GT(vc.var_treatment, 0.0);
  EXPECT_EQ(true_components(null_config(), Response::fw, 21).var_treatment, 0.0);
}

TEST(Synth, Validation) {
  SynthConfig c;
  c.strengths = {1.0, 1.0, 0.25};
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.plants_per_tank = 30;  // 7 harvests of 5
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.residual_sd = -0.1;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(SynthConfig{}));
}

TEST(Synth, JsonRoundTrip) {
  SynthConfig c = separated_config();
  c.seed = 99;
  c.feature_count = 17;
  const SynthConfig back = from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  const SynthConfig partial = from_json(nlohmann::json{{"plants_per_tank", 40}});
  EXPECT_EQ(partial.plants_per_tank, 40u);
  EXPECT_EQ(partial.feature_count, SynthConfig{}.feature_count);
}

TEST(Synth, Labels) {
  EXPECT_EQ(tank_label(Treatment::T2, 0), "T2-1");
  EXPECT_EQ(sample_id(Treatment::T3, 2, 6), "P07-T3-3");
}

}  // namespace
}  // namespace plantmon::synth
