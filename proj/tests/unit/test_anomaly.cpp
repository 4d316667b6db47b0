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

#include "plantmon/anomaly.hpp"
#include "plantmon/random.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace plantmon::anomaly {
namespace {

using plantmon::testing::oracle_loss;

std::vector<Segment> random_batch(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<Segment> b(n, Segment(dim));
  for (auto& s : b) {
    for (auto& v : s) v = rng.uniform(-0.2, 1.2);
  }
  return b;
}

TEST(Autoencoder, LayerShapes) {
  const AeModel m = AeModel::initialize(7, 1);
  ASSERT_EQ(m.layers().size(), 4u);
  EXPECT_EQ(m.layers()[0].inputs, 7u);
  EXPECT_EQ(m.layers()[0].outputs, 64u);
  EXPECT_EQ(m.layers()[1].outputs, 32u);
  EXPECT_EQ(m.layers()[2].outputs, 64u);
  EXPECT_EQ(m.layers()[3].outputs, 7u);
  EXPECT_EQ(m.parameter_count(), 7u * 64 + 64 + 64 * 32 + 32 + 32 * 64 + 64 + 64 * 7 + 7);
}

TEST(Autoencoder, InitializationIsBoundedAndBiasFree) {
  const AeModel m = AeModel::initialize(10, 5);
  for (const auto& l : m.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.inputs + l.outputs));
    for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(Autoencoder, ForwardMatchesOracle) {
  Rng rng(8);
  const AeModel m = AeModel::initialize(6, 2);
  const auto batch = random_batch(rng, 5, 6);
  EXPECT_NEAR(m.loss(batch), oracle_loss(6, m.parameters(), batch), 1e-14);
}

TEST(Autoencoder, FromLayersRejectsBadShapes) {
  auto layers = AeModel::initialize(6, 2).layers();
  layers[1].weights.pop_back();
  EXPECT_THROW(AeModel::from_layers(layers), Error);
  auto bad = AeModel::initialize(6, 2).layers();
  bad[0].bias[0] = std::nan("");
  EXPECT_THROW(AeModel::from_layers(bad), Error);
}

TEST(Autoencoder, GradientMatchesCentralDifferences) {
  Rng rng(2026);
  for (int model = 0; model < 20; ++model) {
    const std::size_t dim = 2 + rng.below(7);
    AeModel m = AeModel::initialize(dim, 100 + model);
    std::vector<double> params = m.parameters();
    for (auto& p : params) p += rng.uniform(-0.05, 0.05);  // nonzero biases
    m.set_parameters(params);
    const auto batch = random_batch(rng, 2 + rng.below(4), dim);
    std::vector<double> grad;
    m.loss_and_gradient(batch, grad);
    ASSERT_EQ(grad.size(), params.size());
    std::size_t checked = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      double h = 1e-5;
      double numeric = 0.0;
      for (int attempt = 0;; ++attempt) {
        std::vector<double> plus = params, minus = params;
        plus[i] += h;
        minus[i] -= h;
        std::vector<bool> s_plus, s_minus;
        const double lp = oracle_loss(dim, plus, batch, &s_plus);
        const double lm = oracle_loss(dim, minus, batch, &s_minus);
        numeric = (lp - lm) / (2 * h);
        if (s_plus == s_minus) break;
        ASSERT_LT(attempt, 6) << "activation kink at parameter " << i;
        h /= 10;  // step straddles a rectifier kink
      }
      const double scale = std::max({std::abs(grad[i]), std::abs(numeric), 1e-7});
      ASSERT_LE(std::abs(grad[i] - numeric) / scale, 1e-4)
          << "model " << model << " parameter " << i << " analytic " << grad[i]
          << " numeric " << numeric;
      ++checked;
    }
    EXPECT_EQ(checked, params.size());
  }
}

TEST(Autoencoder, ScalerFitsPerPosition) {
  const std::vector<Segment> seg = {{1, 10, 5}, {3, 20, 5}};
  const MinMaxScaler s = MinMaxScaler::fit(seg);
  EXPECT_EQ(s.min, (std::vector<double>{1, 10, 5}));
  EXPECT_EQ(s.range, (std::vector<double>{2, 10, 1}));
  EXPECT_EQ(s.transform(std::vector<double>{2, 15, 7}, false), (Segment{0.5, 0.5, 2.0}));
  EXPECT_EQ(s.transform(std::vector<double>{-9, 15, 7}, true), (Segment{-0.5, 0.5, 1.5}));
}

std::vector<Segment> smooth_segments(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<Segment> out(n, Segment(dim));
  for (auto& s : out) {
    const double level = rng.normal(1.0, 0.1);
    for (std::size_t i = 0; i < dim; ++i) s[i] = level * (1.0 + 0.05 * i) + rng.normal(0, 0.01);
  }
  return out;
}

TEST(Detector, ThresholdIsOneAndAHalfFinalError) {
  Rng rng(4);
  const auto train = smooth_segments(rng, 30, 8);
  AeTrainConfig cfg;
  cfg.seed = 3;
  const DetectorState st = train_detector(train, cfg);
  ASSERT_EQ(st.loss_history.size(), 100u);
  EXPECT_EQ(st.final_train_error, st.loss_history.back());
  EXPECT_EQ(st.threshold, 1.5 * st.final_train_error);
  EXPECT_LT(st.loss_history.back(), st.loss_history.front());
  EXPECT_FALSE(st.degenerate);
  EXPECT_EQ(threshold_from_training_error(0.02), 0.03);
}

TEST(Detector, TrainingIsDeterministic) {
  Rng rng(5);
  const auto train = smooth_segments(rng, 20, 6);
  AeTrainConfig cfg;
  cfg.seed = 77;
  const DetectorState a = train_detector(train, cfg);
  const DetectorState b = train_detector(train, cfg);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
  EXPECT_EQ(a.threshold, b.threshold);
  cfg.seed = 78;
  const DetectorState c = train_detector(train, cfg);
  EXPECT_NE(a.model.parameters(), c.model.parameters());
}

TEST(Detector, UsesAtMostFortySegments) {
  Rng rng(6);
  auto train = smooth_segments(rng, 60, 6);
  AeTrainConfig cfg;
  const DetectorState a = train_detector(train, cfg);
  EXPECT_EQ(a.train_segments, 40u);
  train.resize(40);
  const DetectorState b = train_detector(train, cfg);
  EXPECT_EQ(a.model.parameters(), b.model.parameters());
}

TEST(Detector, ConstantSegmentsAreDegenerate) {
  const std::vector<Segment> train(5, Segment(6, 0.7));
  const DetectorState st = train_detector(train, {});
  EXPECT_TRUE(st.degenerate);
  EXPECT_LE(st.threshold, 1e-12);
  EXPECT_FALSE(detect(st, train[0]).anomalous);
}

TEST(Detector, RejectsBadInput) {
  EXPECT_THROW(train_detector({Segment(6, 1.0)}, {}), ConfigError);
  EXPECT_THROW(train_detector({Segment(6, 1.0), Segment(7, 1.0)}, {}), ConfigError);
  AeTrainConfig cfg;
  cfg.epochs = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
  cfg = {};
  cfg.learning_rate = 0;
  EXPECT_THROW(validate(cfg), ConfigError);
}

TEST(Detector, NonFiniteLossNamesTheEpoch) {
  Rng rng(7);
  const auto train = smooth_segments(rng, 10, 6);
  AeTrainConfig cfg;
  cfg.learning_rate = 1e300;
  try {
    train_detector(train, cfg);
    FAIL() << "expected a non-finite loss";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Detector, StrictThreshold) {
  Rng rng(9);
  const auto train = smooth_segments(rng, 20, 6);
  DetectorState st = train_detector(train, {});
  const auto probe = smooth_segments(rng, 1, 6)[0];
  const double e = detect(st, probe).error;
  EXPECT_EQ(detect(st, probe).error, e);  // pure
  st.threshold = e;
  EXPECT_FALSE(detect(st, probe).anomalous);
  st.threshold = std::nextafter(e, 0.0);
  EXPECT_TRUE(detect(st, probe).anomalous);
  EXPECT_THROW(detect(st, Segment(5, 1.0)), ConfigError);
}

TEST(Detector, NetDetectionIsTprMinusFpr) {
  Rng rng(10);
  const auto train = smooth_segments(rng, 40, 8);
  const DetectorState st = train_detector(train, {});
  const auto healthy = smooth_segments(rng, 38, 8);
  auto anomalous = smooth_segments(rng, 40, 8);
  for (std::size_t i = 0; i < 33; ++i) {
    for (auto& v : anomalous[i]) v *= 0.5;
  }
  std::size_t fp = 0, tp = 0;
  for (const auto& s : healthy) fp += detect(st, s).anomalous;
  for (const auto& s : anomalous) tp += detect(st, s).anomalous;
  const double nd = net_detection(st, healthy, anomalous);
  EXPECT_DOUBLE_EQ(nd, tp / 40.0 - fp / 38.0);
  EXPECT_GE(nd, -1.0);
  EXPECT_LE(nd, 1.0);
  EXPECT_THROW(net_detection(st, {}, anomalous), DataError);
}

TEST(Detector, NetDetectionBoundaryCases) {
  Rng rng(11);
  const auto train = smooth_segments(rng, 20, 6);
  DetectorState st = train_detector(train, {});
  const auto healthy = smooth_segments(rng, 10, 6);
  st.threshold = -1.0;  // flags everything
  EXPECT_EQ(net_detection(st, healthy, healthy), 0.0);
  st.threshold = 1e300;  // flags nothing
  EXPECT_EQ(net_detection(st, healthy, healthy), 0.0);
}

TEST(Detector, SaveLoadRoundTrip) {
  plantmon::testing::TempDir tmp;
  Rng rng(12);
  const auto train = smooth_segments(rng, 20, 7);
  AeTrainConfig cfg;
  cfg.seed = 4;
  const DetectorState st = train_detector(train, cfg);
  save_detector(st, tmp / "ae.json");
  const DetectorState back = load_detector(tmp / "ae.json");
  EXPECT_EQ(back.model.parameters(), st.model.parameters());
  EXPECT_EQ(back.threshold, st.threshold);
  EXPECT_EQ(back.scaler.min, st.scaler.min);
  const auto probe = smooth_segments(rng, 1, 7)[0];
  EXPECT_EQ(detect(back, probe).error, detect(st, probe).error);
  plantmon::testing::spit(tmp / "bad.json", "{\"layers\": 3}");
  EXPECT_THROW(load_detector(tmp / "bad.json"), DataError);
}

std::vector<dataset::Trajectory> cohort(Rng& rng, Treatment t, std::size_t n, int last_day,
                                        double scale) {
  std::vector<dataset::Trajectory> out;
  for (std::size_t i = 0; i < n; ++i) {
    dataset::Trajectory tr;
    char id[32];
    std::snprintf(id, sizeof id, "P%03zu-%s-1", i, std::string(to_string(t)).c_str());
    tr.sample_id = id;
    tr.treatment = t;
    tr.tank = std::string(to_string(t)) + "-1";
    const double level = rng.normal(1.0, 0.05);
    for (int d = 4; d <= last_day; ++d) tr.values.push_back(scale * level * (1 + 0.02 * d));
    out.push_back(std::move(tr));
  }
  return out;
}

TEST(Sweep, ShapeOrderAndTrainingCounts) {
  Rng rng(13);
  SweepSeries s{"x", cohort(rng, Treatment::T1, 60, 25, 1.0)};
  auto t2 = cohort(rng, Treatment::T2, 20, 25, 0.8);
  auto t3 = cohort(rng, Treatment::T3, 20, 25, 0.5);
  s.trajectories.insert(s.trajectories.end(), t2.begin(), t2.end());
  s.trajectories.insert(s.trajectories.end(), t3.begin(), t3.end());
  const std::vector<int> lengths = {6, 7, 22};
  AeTrainConfig cfg;
  cfg.epochs = 5;
  const auto cells = sweep({s, SweepSeries{"y", s.trajectories}}, lengths, cfg, 2);
  ASSERT_EQ(cells.size(), 2u * 3 * 2);
  EXPECT_EQ(cells[0].series, "x");
  EXPECT_EQ(cells[0].length, 6);
  EXPECT_EQ(cells[0].target, Treatment::T2);
  EXPECT_EQ(cells[1].target, Treatment::T3);
  EXPECT_EQ(cells[5].length, 22);
  EXPECT_EQ(cells[6].series, "y");
  for (const auto& c : cells) {
    EXPECT_EQ(c.n_train, 40u);
    EXPECT_EQ(c.n_healthy_test, 20u);
    EXPECT_DOUBLE_EQ(c.net_detection, c.true_rate - c.false_rate);
  }
  // Same cells regardless of thread count.
  const auto serial = sweep({s, SweepSeries{"y", s.trajectories}}, lengths, cfg, 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].net_detection, serial[i].net_detection);
    EXPECT_EQ(cells[i].threshold, serial[i].threshold);
  }
}

TEST(Sweep, TrainingSetShrinksWithDestructiveSampling) {
  Rng rng(14);
  auto t1 = cohort(rng, Treatment::T1, 30, 25, 1.0);
  auto early = cohort(rng, Treatment::T1, 30, 12, 1.0);
  for (auto& t : early) t.sample_id[1] = 'Q';  // sorts after the long ones
  SweepSeries s{"x", t1};
  s.trajectories.insert(s.trajectories.end(), early.begin(), early.end());
  auto t3 = cohort(rng, Treatment::T3, 10, 25, 0.5);
  auto t2 = cohort(rng, Treatment::T2, 10, 25, 0.9);
  s.trajectories.insert(s.trajectories.end(), t2.begin(), t2.end());
  s.trajectories.insert(s.trajectories.end(), t3.begin(), t3.end());
  AeTrainConfig cfg;
  cfg.epochs = 3;
  const std::vector<int> short_window = {6};
  const auto cells = sweep({s}, short_window, cfg, 1);
  EXPECT_EQ(cells[0].n_train, 40u);
  EXPECT_EQ(cells[0].n_healthy_test, 20u);
  const std::vector<int> long_window = {22};
  EXPECT_THROW(sweep({s}, long_window, cfg, 1), DataError);
}

TEST(Sweep, RejectsBadLengths) {
  const std::vector<int> bad = {5};
  EXPECT_THROW(sweep({}, bad, {}, 1), ConfigError);
}

}  // namespace
}  // namespace plantmon::anomaly
