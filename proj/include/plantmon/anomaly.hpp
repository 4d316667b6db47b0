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

// Trajectory autoencoder for anomaly detection.
//
// The network is dense L-64-32-64-L with rectified hidden units and a linear
// output layer. Inputs are scaled per position to [0, 1] using the minimum
// and range of the training segments. A segment's reconstruction error is
// the mean squared residual over its L positions, computed on scaled
// values; it is anomalous when the error strictly exceeds the detector
// threshold, 1.5 times the mean training error of the final epoch.

#ifndef PLANTMON_ANOMALY_HPP_
#define PLANTMON_ANOMALY_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "plantmon/common.hpp"
#include "plantmon/dataset.hpp"

namespace plantmon::anomaly {

using Segment = std::vector<double>;

inline constexpr std::array<std::size_t, 3> kHiddenWidths = {64, 32, 64};
inline constexpr double kThresholdFactor = 1.5;
inline constexpr double kScaledClampLow = -0.5;
inline constexpr double kScaledClampHigh = 1.5;

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;  // outputs x inputs, row-major
  std::vector<double> bias;     // outputs
};

class AeModel {
 public:
  AeModel() = default;

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)) drawn layer by layer
  // in row-major order; biases zero.
  static AeModel initialize(std::size_t input_dim, std::uint64_t seed);
  // Checks shapes against [L, 64, 32, 64, L] and finiteness.
  static AeModel from_layers(std::vector<DenseLayer> layers);

  std::size_t input_dim() const { return layers_.front().inputs; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Segment reconstruct(std::span<const double> x) const;
  // Mean squared residual over the L positions.
  double reconstruction_error(std::span<const double> x) const;

  // Mean over the batch of per-segment reconstruction error.
  double loss(const std::vector<Segment>& batch) const;
  // As loss(); fills `grad` (resized) with d loss / d parameter in the
  // order of parameters().
  double loss_and_gradient(const std::vector<Segment>& batch,
                           std::vector<double>& grad) const;

  // Layer by layer: weights then bias.
  std::size_t parameter_count() const;
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> params);

 private:
  explicit AeModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {}
  std::vector<DenseLayer> layers_;
};

// Per-position min-max scaler fitted on training segments. A position with
// zero range is shifted by its minimum only.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> range;

  static MinMaxScaler fit(const std::vector<Segment>& segments);
  Segment transform(std::span<const double> x, bool clamp) const;
};

struct AeTrainConfig {
  int epochs = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_train_segments = 40;
  std::uint64_t seed = 0;
};

void validate(const AeTrainConfig& config);

inline double threshold_from_training_error(double mean_error) {
  return kThresholdFactor * mean_error;
}

struct DetectorState {
  AeModel model;
  MinMaxScaler scaler;
  double threshold = 0.0;
  double final_train_error = 0.0;
  std::vector<double> loss_history;  // mean training error per epoch
  std::size_t train_segments = 0;
  bool degenerate = false;  // threshold effectively zero
  AeTrainConfig config;
};

// Trains on the first max_train_segments segments with full-batch Adam on
// the mean squared reconstruction error. The threshold uses the training
// error recorded in the final epoch. Deterministic given config.seed.
// Throws ConfigError for fewer than two segments or ragged lengths and
// Error when the loss becomes non-finite.
DetectorState train_detector(const std::vector<Segment>& healthy,
                             const AeTrainConfig& config);

struct DetectionOutcome {
  double error = 0.0;
  bool anomalous = false;
};

// Scales (clamped to [-0.5, 1.5]) and scores one segment.
DetectionOutcome detect(const DetectorState& state, std::span<const double> segment);

// Flagged fraction of `anomalous` minus flagged fraction of `healthy`.
double net_detection(const DetectorState& state,
                     const std::vector<Segment>& healthy,
                     const std::vector<Segment>& anomalous);

void save_detector(const DetectorState& state, const std::filesystem::path& path);
DetectorState load_detector(const std::filesystem::path& path);

// --- window-length sweep ---

struct SweepSeries {
  std::string name;  // feature or response variable
  std::vector<dataset::Trajectory> trajectories;  // all treatments, ordered
};

struct SweepCell {
  std::string series;
  int length = 0;
  Treatment target = Treatment::T2;
  double net_detection = 0.0;
  double true_rate = 0.0;
  double false_rate = 0.0;
  double threshold = 0.0;
  std::size_t n_train = 0;
  std::size_t n_healthy_test = 0;
  std::size_t n_anomalous_test = 0;
};

// For every (series, length): trains on the first <= max_train_segments T1
// segments covering the window and tests the remaining T1 segments against
// the T2 and then the T3 segments. Each cell seeds its detector from
// (config.seed, series name, length), so results do not depend on series
// order or on the schedule. Cells are ordered series-major, then length,
// then target (T2, T3). Throws DataError when no T1 segment remains for
// testing or a target treatment has no segment.
std::vector<SweepCell> sweep(const std::vector<SweepSeries>& series,
                             std::span<const int> lengths,
                             const AeTrainConfig& config,
                             std::size_t threads = 0);

}  // namespace plantmon::anomaly

#endif  // PLANTMON_ANOMALY_HPP_
