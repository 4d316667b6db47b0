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

// Trajectories, ground truth, pseudo-labels and the tank-permutation fold
// scheme.

#ifndef PLANTMON_DATASET_HPP_
#define PLANTMON_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plantmon/common.hpp"
#include "plantmon/indices.hpp"

namespace plantmon::dataset {

// Days on which five plants per tank are harvested for tissue analysis.
inline constexpr std::array<int, 7> kSamplingDays = {11, 14, 18, 21, 23, 25, 26};
inline constexpr int kFirstImagingDay = 4;

using ResponseValues = std::array<double, kResponseCount>;

struct GroundTruth {
  std::string sample_id;
  std::string tank;
  Treatment treatment = Treatment::T1;
  int dat = 0;
  ResponseValues values{};  // fw (g), dm (g), n..s (% of dry mass)

  double operator[](Response r) const { return values[index_of(r)]; }
};

// Throws DataError unless fw > 0, 0 < dm <= fw and concentrations in (0, 100).
void validate(const GroundTruth& gt);

// One value per day over consecutive days starting at start_dat.
struct Trajectory {
  std::string sample_id;
  std::string tank;
  Treatment treatment = Treatment::T1;
  int start_dat = kFirstImagingDay;
  std::vector<double> values;

  int end_dat() const { return start_dat + static_cast<int>(values.size()) - 1; }
};

struct SeriesPoint {
  std::string sample_id;
  std::string tank;
  Treatment treatment = Treatment::T1;
  int dat = 0;
  double value = 0.0;
};

// One trajectory per sample, sorted by sample_id, days ascending. A series
// ends at its first missing day. Throws DataError on a duplicate
// (sample_id, dat).
std::vector<Trajectory> build_trajectories(std::span<const SeriesPoint> points);
std::vector<Trajectory> build_trajectories(const indices::FeatureTable& table,
                                           std::string_view feature);

struct WindowSpec {
  static constexpr int kMinLength = 6;
  static constexpr int kMaxLength = 22;

  int start_dat = kFirstImagingDay;
  int length = kMinLength;

  // Throws ConfigError outside [6, 22].
  static WindowSpec of_length(int length);
  int end_dat() const { return start_dat + length - 1; }
};

// Values for days start..start+length-1. Throws DataError when the
// trajectory does not cover the window.
std::vector<double> window(const Trajectory& traj, const WindowSpec& spec);
bool covers(const Trajectory& traj, const WindowSpec& spec);

struct Tank {
  std::string label;
  Treatment treatment = Treatment::T1;
};

struct Fold {
  int id = 0;
  std::vector<std::string> test_tanks;   // two per treatment
  std::vector<std::string> train_tanks;  // one per treatment, T1..T3

  bool is_test(std::string_view tank) const;
  bool is_train(std::string_view tank) const;
};

inline constexpr std::size_t kFoldCount = 27;

// All 27 choices of one training tank per treatment. Tanks are sorted by
// label within a treatment; the T1 choice varies slowest, so
// fold id = 9*i1 + 3*i2 + i3.
std::vector<Fold> make_folds(const std::vector<Tank>& tanks);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Seeded, stratified split of record positions 0..strata.size()-1. Each
// stratum is shuffled and its first round(fraction*n) records (at most
// n-1) go to training. Output positions are sorted ascending. Throws
// ConfigError for a stratum with fewer than two records.
Split split_train_val(std::span<const Treatment> strata, double fraction,
                      std::uint64_t seed);

enum class LabelKind { gt, pseudo };
std::string_view to_string(LabelKind k);

struct LabeledRecord {
  std::size_t row = 0;  // position in the feature table
  ResponseValues labels{};
  LabelKind kind = LabelKind::gt;
};

// Rows matching a ground-truth (sample_id, dat) keep their own values;
// other rows receive the mean of their tank's ground truth on the same
// day; rows without same-day tank ground truth are left out. Output is in
// table row order.
std::vector<LabeledRecord> pseudo_label(const indices::FeatureTable& table,
                                        std::span<const GroundTruth> gt);

// Columns sample_id,tank,treatment,dat,fw,dm,n,p,k,ca,mg,s,label_kind.
void write_label_csv(std::span<const GroundTruth> gt, std::ostream& out);
void write_label_csv(const indices::FeatureTable& table,
                     std::span<const LabeledRecord> labels, std::ostream& out);
// Ground-truth rows (label_kind == gt) of a label file.
std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path);

// Unique tanks in first-appearance order.
std::vector<Tank> tanks_of(const indices::FeatureTable& table);

}  // namespace plantmon::dataset

#endif  // PLANTMON_DATASET_HPP_
