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
#include <sstream>

#include "plantmon/dataset.hpp"
#include "test_util.hpp"

namespace plantmon::dataset {
namespace {

std::vector<SeriesPoint> days(const std::string& id, std::initializer_list<int> dats) {
  std::vector<SeriesPoint> pts;
  for (int d : dats) pts.push_back({id, "T1-1", Treatment::T1, d, 0.1 * d});
  return pts;
}

std::vector<Tank> nine_tanks() {
  std::vector<Tank> tanks;
  for (Treatment t : kTreatments) {
    for (int k = 1; k <= 3; ++k) {
      tanks.push_back({std::string(to_string(t)) + "-" + std::to_string(k), t});
    }
  }
  return tanks;
}

TEST(Dataset, SamplingDays) {
  EXPECT_EQ(std::vector<int>(kSamplingDays.begin(), kSamplingDays.end()),
            (std::vector<int>{11, 14, 18, 21, 23, 25, 26}));
}

TEST(Dataset, TrajectoryFromConsecutiveDays) {
  const auto pts = days("P01-T1-1", {7, 4, 5, 6, 8, 9, 10});
  const auto tr = build_trajectories(pts);
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr[0].start_dat, 4);
  EXPECT_EQ(tr[0].values.size(), 7u);
  EXPECT_EQ(tr[0].end_dat(), 10);
  EXPECT_DOUBLE_EQ(tr[0].values[3], 0.7);
}

TEST(Dataset, TrajectoryEndsAtFirstGap) {
  const auto tr = build_trajectories(days("a", {4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 15}));
  ASSERT_EQ(tr.size(), 1u);
  EXPECT_EQ(tr[0].end_dat(), 13);
}

TEST(Dataset, EmptyInputGivesNoTrajectories) {
  EXPECT_TRUE(build_trajectories(std::vector<SeriesPoint>{}).empty());
}

TEST(Dataset, DuplicateDayIsRejected) {
  EXPECT_THROW(build_trajectories(days("a", {4, 5, 5})), DataError);
}

TEST(Dataset, TrajectoriesAreSortedBySample) {
  auto pts = days("P02-T1-1", {4, 5});
  auto more = days("P01-T1-1", {4});
  pts.insert(pts.end(), more.begin(), more.end());
  const auto tr = build_trajectories(pts);
  ASSERT_EQ(tr.size(), 2u);
  EXPECT_EQ(tr[0].sample_id, "P01-T1-1");
}

TEST(Dataset, WindowsStartAtFirstImagingDay) {
  Trajectory t;
  t.start_dat = 4;
  for (int d = 4; d <= 25; ++d) t.values.push_back(d);
  const auto w6 = window(t, WindowSpec::of_length(6));
  EXPECT_EQ(w6, (std::vector<double>{4, 5, 6, 7, 8, 9}));
  const auto w22 = window(t, WindowSpec::of_length(22));
  EXPECT_EQ(w22.size(), 22u);
  EXPECT_EQ(w22.back(), 25.0);
  t.values.resize(17);  // ends day 20
  EXPECT_THROW(window(t, WindowSpec::of_length(22)), DataError);
  EXPECT_FALSE(covers(t, WindowSpec::of_length(22)));
  EXPECT_THROW(WindowSpec::of_length(5), ConfigError);
  EXPECT_THROW(WindowSpec::of_length(23), ConfigError);
}

TEST(Dataset, TwentySevenFolds) {
  const auto folds = make_folds(nine_tanks());
  ASSERT_EQ(folds.size(), 27u);
  for (const auto& f : folds) {
    EXPECT_EQ(f.test_tanks.size(), 6u);
    EXPECT_EQ(f.train_tanks.size(), 3u);
    std::map<char, int> per_treatment;
    for (const auto& t : f.test_tanks) per_treatment[t[1]]++;
    EXPECT_EQ(per_treatment['1'], 2);
    EXPECT_EQ(per_treatment['2'], 2);
    EXPECT_EQ(per_treatment['3'], 2);
    std::set<std::string> all(f.test_tanks.begin(), f.test_tanks.end());
    for (const auto& t : f.train_tanks) {
      EXPECT_FALSE(f.is_test(t));
      all.insert(t);
    }
    EXPECT_EQ(all.size(), 9u);
  }
}

TEST(Dataset, FoldsMatchBruteForceEnumeration) {
  const auto tanks = nine_tanks();
  // Oracle: every subset of six tanks holding two per treatment.
  std::set<std::set<std::string>> expected;
  for (unsigned mask = 0; mask < (1u << 9); ++mask) {
    if (__builtin_popcount(mask) != 6) continue;
    std::map<Treatment, int> count;
    std::set<std::string> test;
    for (unsigned i = 0; i < 9; ++i) {
      if (mask & (1u << i)) {
        count[tanks[i].treatment]++;
        test.insert(tanks[i].label);
      }
    }
    if (count[Treatment::T1] == 2 && count[Treatment::T2] == 2 && count[Treatment::T3] == 2) {
      expected.insert(test);
    }
  }
  ASSERT_EQ(expected.size(), 27u);
  std::set<std::set<std::string>> got;
  std::map<std::string, int> tested;
  for (const auto& f : make_folds(tanks)) {
    got.insert(std::set<std::string>(f.test_tanks.begin(), f.test_tanks.end()));
    for (const auto& t : f.test_tanks) tested[t]++;
  }
  EXPECT_EQ(got, expected);
  for (const auto& t : tanks) EXPECT_EQ(tested[t.label], 18) << t.label;
}

TEST(Dataset, FoldOrderIsLexicographic) {
  const auto folds = make_folds(nine_tanks());
  EXPECT_EQ(folds[0].train_tanks, (std::vector<std::string>{"T1-1", "T2-1", "T3-1"}));
  EXPECT_EQ(folds[1].train_tanks, (std::vector<std::string>{"T1-1", "T2-1", "T3-2"}));
  EXPECT_EQ(folds[26].train_tanks, (std::vector<std::string>{"T1-3", "T2-3", "T3-3"}));
  EXPECT_EQ(folds[13].id, 13);
}

TEST(Dataset, FoldsNeedThreeTanksPerTreatment) {
  auto tanks = nine_tanks();
  tanks.pop_back();
  EXPECT_THROW(make_folds(tanks), ConfigError);
}

TEST(Dataset, SplitRounding) {
  const std::vector<Treatment> strata(10, Treatment::T1);
  const Split s = split_train_val(strata, 0.8, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.validation.size(), 2u);
  const Split again = split_train_val(strata, 0.8, 1);
  EXPECT_EQ(s.train, again.train);
  EXPECT_EQ(s.validation, again.validation);
  EXPECT_THROW(split_train_val(std::vector<Treatment>{Treatment::T2}, 0.8, 1), ConfigError);
}

TEST(Dataset, SplitIsStratifiedAndPartitions) {
  std::vector<Treatment> strata;
  for (int i = 0; i < 30; ++i) strata.push_back(kTreatments[i % 3]);
  strata.push_back(Treatment::T1);
  strata.push_back(Treatment::T1);
  const Split s = split_train_val(strata, 0.8, 99);
  std::map<Treatment, int> train;
  for (auto i : s.train) train[strata[i]]++;
  EXPECT_EQ(train[Treatment::T1], 10);  // round(0.8 * 12) = 10
  EXPECT_EQ(train[Treatment::T2], 8);
  EXPECT_EQ(train[Treatment::T3], 8);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.validation) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), strata.size());
  EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST(Dataset, SplitKeepsOneValidationRecord) {
  const std::vector<Treatment> strata(2, Treatment::T3);
  const Split s = split_train_val(strata, 0.8, 5);
  EXPECT_EQ(s.train.size(), 1u);
  EXPECT_EQ(s.validation.size(), 1u);
}

GroundTruth gt(const std::string& id, const std::string& tank, int dat, double fw) {
  GroundTruth g;
  g.sample_id = id;
  g.tank = tank;
  g.treatment = parse_treatment(tank.substr(0, 2));
  g.dat = dat;
  g.values = {fw, fw / 20, 5, 0.8, 7, 1.1, 0.3, 0.3};
  return g;
}

indices::FeatureTable table_of(
    std::initializer_list<std::tuple<const char*, const char*, int>> rows) {
  indices::FeatureTable t;
  t.names = {"x"};
  for (const auto& [id, tank, dat] : rows) {
    t.rows.push_back({id, tank, parse_treatment(std::string(tank).substr(0, 2)), dat, {0.0}});
  }
  return t;
}

TEST(Dataset, PseudoLabelIsTankDayMean) {
  std::vector<GroundTruth> g;
  const double fw[] = {10, 12, 14, 11, 13};
  for (int i = 0; i < 5; ++i) g.push_back(gt("G" + std::to_string(i), "T1-1", 14, fw[i]));
  const auto table = table_of({{"P01-T1-1", "T1-1", 14}, {"P01-T1-1", "T1-1", 15},
                               {"G2", "T1-1", 14}, {"P09-T1-2", "T1-2", 14}});
  const auto rec = pseudo_label(table, g);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_EQ(rec[0].row, 0u);
  EXPECT_EQ(rec[0].kind, LabelKind::pseudo);
  EXPECT_DOUBLE_EQ(rec[0].labels[0], 12.0);
  EXPECT_EQ(rec[1].row, 2u);
  EXPECT_EQ(rec[1].kind, LabelKind::gt);
  EXPECT_EQ(rec[1].labels[0], 14.0);
}

TEST(Dataset, PseudoLabelIsIdempotent) {
  std::vector<GroundTruth> g = {gt("G1", "T2-1", 11, 5), gt("G2", "T2-1", 11, 7)};
  const auto table = table_of({{"P01-T2-1", "T2-1", 11}, {"G1", "T2-1", 11}});
  const auto a = pseudo_label(table, g);
  const auto b = pseudo_label(table, g);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].labels, b[i].labels);
    EXPECT_EQ(a[i].kind, b[i].kind);
  }
  EXPECT_EQ(a[1].labels[0], 5.0);
}

TEST(Dataset, GroundTruthValidation) {
  GroundTruth g = gt("a", "T1-1", 11, 10);
  EXPECT_NO_THROW(validate(g));
  g.values[1] = 11;  // dm > fw
  EXPECT_THROW(validate(g), DataError);
  g = gt("a", "T1-1", 11, 10);
  g.values[2] = 100;
  EXPECT_THROW(validate(g), DataError);
  g = gt("a", "T1-1", 11, 0);
  EXPECT_THROW(validate(g), DataError);
}

TEST(Dataset, LabelCsvRoundTrip) {
  plantmon::testing::TempDir tmp;
  const std::vector<GroundTruth> g = {gt("P01-T1-1", "T1-1", 11, 10.5), gt("P02-T3-2", "T3-2", 14, 3.25)};
  {
    std::ofstream f(tmp / "gt.csv");
    write_label_csv(g, f);
  }
  const auto back = read_ground_truth(tmp / "gt.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].values, g[1].values);
  EXPECT_EQ(back[1].treatment, Treatment::T3);
  EXPECT_EQ(back[1].dat, 14);
}

TEST(Dataset, ReadGroundTruthSkipsPseudoRows) {
  plantmon::testing::TempDir tmp;
  const auto table = table_of({{"P01-T1-1", "T1-1", 11}, {"G1", "T1-1", 11}});
  const std::vector<GroundTruth> g = {gt("G1", "T1-1", 11, 6)};
  const auto rec = pseudo_label(table, g);
  {
    std::ofstream f(tmp / "labels.csv");
    write_label_csv(table, rec, f);
  }
  const auto back = read_ground_truth(tmp / "labels.csv");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].sample_id, "G1");
}

TEST(Dataset, TanksInFirstAppearanceOrder) {
  const auto table = table_of({{"a", "T2-1", 4}, {"b", "T1-1", 4}, {"c", "T2-1", 5}});
  const auto tanks = tanks_of(table);
  ASSERT_EQ(tanks.size(), 2u);
  EXPECT_EQ(tanks[0].label, "T2-1");
  EXPECT_EQ(tanks[0].treatment, Treatment::T2);
}

}  // namespace
}  // namespace plantmon::dataset
