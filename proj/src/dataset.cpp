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

#include "plantmon/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "plantmon/csv.hpp"
#include "plantmon/random.hpp"

namespace plantmon::dataset {

void validate(const GroundTruth& gt) {
  auto fail = [&](const std::string& what) {
    throw DataError("ground truth '" + gt.sample_id + "' day " +
                    std::to_string(gt.dat) + ": " + what);
  };
  for (double v : gt.values) {
    if (!std::isfinite(v)) fail("non-finite value");
  }
  if (!(gt[Response::fw] > 0)) fail("fw must be > 0");
  if (!(gt[Response::dm] > 0) || gt[Response::dm] > gt[Response::fw]) {
    fail("dm must be in (0, fw]");
  }
  for (std::size_t i = index_of(Response::n); i < kResponseCount; ++i) {
    if (!(gt.values[i] > 0 && gt.values[i] < 100)) {
      fail(std::string(to_string(kResponses[i])) + " must be in (0, 100)");
    }
  }
}

std::vector<Trajectory> build_trajectories(std::span<const SeriesPoint> points) {
  std::map<std::string, std::vector<const SeriesPoint*>> by_sample;
  for (const auto& p : points) by_sample[p.sample_id].push_back(&p);

  std::vector<Trajectory> out;
  out.reserve(by_sample.size());
  for (auto& [id, pts] : by_sample) {
    std::sort(pts.begin(), pts.end(),
              [](const SeriesPoint* a, const SeriesPoint* b) {
                return a->dat < b->dat;
              });
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i]->dat == pts[i - 1]->dat) {
        throw DataError("duplicate record for sample '" + id + "' on day " +
                        std::to_string(pts[i]->dat));
      }
    }
    Trajectory t;
    t.sample_id = id;
    t.tank = pts.front()->tank;
    t.treatment = pts.front()->treatment;
    t.start_dat = pts.front()->dat;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i > 0 && pts[i]->dat != pts[i - 1]->dat + 1) break;
      t.values.push_back(pts[i]->value);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Trajectory> build_trajectories(const indices::FeatureTable& table,
                                           std::string_view feature) {
  const std::size_t col = table.require(feature);
  std::vector<SeriesPoint> points;
  points.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    points.push_back(
        {row.sample_id, row.tank, row.treatment, row.dat, row.values[col]});
  }
  return build_trajectories(points);
}

WindowSpec WindowSpec::of_length(int length) {
  if (length < kMinLength || length > kMaxLength) {
    throw ConfigError("window length " + std::to_string(length) +
                      " outside [6, 22]");
  }
  return WindowSpec{kFirstImagingDay, length};
}

bool covers(const Trajectory& traj, const WindowSpec& spec) {
  return traj.start_dat <= spec.start_dat && traj.end_dat() >= spec.end_dat();
}

std::vector<double> window(const Trajectory& traj, const WindowSpec& spec) {
  if (!covers(traj, spec)) {
    throw DataError("trajectory '" + traj.sample_id + "' covers days " +
                    std::to_string(traj.start_dat) + ".." +
                    std::to_string(traj.end_dat()) + ", window needs " +
                    std::to_string(spec.start_dat) + ".." +
                    std::to_string(spec.end_dat()));
  }
  const auto first =
      traj.values.begin() + (spec.start_dat - traj.start_dat);
  return std::vector<double>(first, first + spec.length);
}

bool Fold::is_test(std::string_view tank) const {
  return std::find(test_tanks.begin(), test_tanks.end(), tank) !=
         test_tanks.end();
}

bool Fold::is_train(std::string_view tank) const {
  return std::find(train_tanks.begin(), train_tanks.end(), tank) !=
         train_tanks.end();
}

std::vector<Fold> make_folds(const std::vector<Tank>& tanks) {
  std::array<std::vector<std::string>, 3> groups;
  std::set<std::string> seen;
  for (const auto& t : tanks) {
    if (!seen.insert(t.label).second) {
      throw ConfigError("tank '" + t.label + "' listed twice");
    }
    groups[index_of(t.treatment)].push_back(t.label);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    if (groups[g].size() != 3) {
      throw ConfigError("treatment " + std::string(to_string(kTreatments[g])) +
                        " has " + std::to_string(groups[g].size()) +
                        " tanks; the fold scheme needs exactly 3");
    }
    std::sort(groups[g].begin(), groups[g].end());
  }
  std::vector<Fold> folds;
  folds.reserve(kFoldCount);
  for (std::size_t i1 = 0; i1 < 3; ++i1) {
    for (std::size_t i2 = 0; i2 < 3; ++i2) {
      for (std::size_t i3 = 0; i3 < 3; ++i3) {
        Fold f;
        f.id = static_cast<int>(folds.size());
        const std::array<std::size_t, 3> pick = {i1, i2, i3};
        for (std::size_t g = 0; g < 3; ++g) {
          for (std::size_t k = 0; k < 3; ++k) {
            (k == pick[g] ? f.train_tanks : f.test_tanks).push_back(groups[g][k]);
          }
        }
        folds.push_back(std::move(f));
      }
    }
  }
  return folds;
}

Split split_train_val(std::span<const Treatment> strata, double fraction,
                      std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }
  std::array<std::vector<std::size_t>, 3> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    groups[index_of(strata[i])].push_back(i);
  }
  Split split;
  for (std::size_t g = 0; g < 3; ++g) {
    auto& members = groups[g];
    if (members.empty()) continue;
    if (members.size() < 2) {
      throw ConfigError("stratum " + std::string(to_string(kTreatments[g])) +
                        " has fewer than 2 records");
    }
    Rng rng(derive_seed(seed, g));
    rng.shuffle(members);
    const auto n = static_cast<double>(members.size());
    auto n_train = static_cast<std::size_t>(std::llround(fraction * n));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(),
                       members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.insert(
        split.validation.end(),
        members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

std::string_view to_string(LabelKind k) {
  return k == LabelKind::gt ? "gt" : "pseudo";
}

std::vector<LabeledRecord> pseudo_label(const indices::FeatureTable& table,
                                        std::span<const GroundTruth> gt) {
  std::map<std::pair<std::string, int>, const GroundTruth*> own;
  struct Acc {
    ResponseValues sum{};
    std::size_t count = 0;
  };
  std::map<std::pair<std::string, int>, Acc> tank_day;
  for (const auto& g : gt) {
    own[{g.sample_id, g.dat}] = &g;
    auto& acc = tank_day[{g.tank, g.dat}];
    for (std::size_t i = 0; i < kResponseCount; ++i) acc.sum[i] += g.values[i];
    ++acc.count;
  }
  std::vector<LabeledRecord> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (auto it = own.find({row.sample_id, row.dat}); it != own.end()) {
      out.push_back({r, it->second->values, LabelKind::gt});
      continue;
    }
    auto it = tank_day.find({row.tank, row.dat});
    if (it == tank_day.end()) continue;
    LabeledRecord rec{r, {}, LabelKind::pseudo};
    for (std::size_t i = 0; i < kResponseCount; ++i) {
      rec.labels[i] = it->second.sum[i] / static_cast<double>(it->second.count);
    }
    out.push_back(rec);
  }
  return out;
}

namespace {

void write_label_header(csv::Writer& w) {
  w.field("sample_id").field("tank").field("treatment").field("dat");
  for (Response r : kResponses) w.field(to_string(r));
  w.field("label_kind");
  w.end_row();
}

}  // namespace

void write_label_csv(std::span<const GroundTruth> gt, std::ostream& out) {
  csv::Writer w(out);
  write_label_header(w);
  for (const auto& g : gt) {
    w.field(g.sample_id).field(g.tank).field(to_string(g.treatment)).field(g.dat);
    for (double v : g.values) w.field(v);
    w.field(to_string(LabelKind::gt));
    w.end_row();
  }
}

void write_label_csv(const indices::FeatureTable& table,
                     std::span<const LabeledRecord> labels, std::ostream& out) {
  csv::Writer w(out);
  write_label_header(w);
  for (const auto& rec : labels) {
    const auto& row = table.rows.at(rec.row);
    w.field(row.sample_id).field(row.tank).field(to_string(row.treatment));
    w.field(row.dat);
    for (double v : rec.labels) w.field(v);
    w.field(to_string(rec.kind));
    w.end_row();
  }
}

std::vector<GroundTruth> read_ground_truth(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  const std::size_t c_id = t.require("sample_id");
  const std::size_t c_tank = t.require("tank");
  const std::size_t c_trt = t.require("treatment");
  const std::size_t c_dat = t.require("dat");
  std::array<std::size_t, kResponseCount> c_val{};
  for (Response r : kResponses) c_val[index_of(r)] = t.require(to_string(r));
  const auto c_kind = t.column("label_kind");

  std::vector<GroundTruth> out;
  for (const auto& row : t.rows) {
    if (c_kind && row[*c_kind] != "gt") continue;
    GroundTruth g;
    g.sample_id = row[c_id];
    g.tank = row[c_tank];
    g.treatment = parse_treatment(row[c_trt]);
    g.dat = static_cast<int>(csv::parse_int(row[c_dat]));
    for (std::size_t i = 0; i < kResponseCount; ++i) {
      g.values[i] = csv::parse_double(row[c_val[i]]);
    }
    validate(g);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Tank> tanks_of(const indices::FeatureTable& table) {
  std::vector<Tank> out;
  std::set<std::string> seen;
  for (const auto& row : table.rows) {
    if (seen.insert(row.tank).second) out.push_back({row.tank, row.treatment});
  }
  return out;
}

}  // namespace plantmon::dataset
