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

#include "plantmon/indices.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "plantmon/csv.hpp"

namespace plantmon::indices {

IndexDef IndexDef::normalized_difference(std::string name, std::string a,
                                         std::string b) {
  return IndexDef{std::move(name),
                  {{a, 1.0}, {b, -1.0}},
                  {{a, 1.0}, {b, 1.0}}};
}

IndexDef IndexDef::ratio(std::string name, std::string a, std::string b) {
  return IndexDef{std::move(name), {{std::move(a), 1.0}}, {{std::move(b), 1.0}}};
}

std::string_view to_string(Aggregator a) {
  switch (a) {
    case Aggregator::mean: return "mean";
    case Aggregator::median: return "median";
    case Aggregator::std: return "std";
  }
  return "?";
}

std::vector<IndexDef> default_registry() {
  std::vector<IndexDef> reg = {
      IndexDef::normalized_difference("NDVI", "nir850", "red"),
      IndexDef::normalized_difference("GNDVI", "nir850", "green"),
      IndexDef::normalized_difference("GRVI", "green", "red"),
      IndexDef::normalized_difference("NDRE", "nir850", "far_red"),
      IndexDef::normalized_difference("NDWI", "nir850", "nir940"),
  };
  // Pairs already covered by a named index, in either orientation.
  std::set<std::pair<std::string, std::string>> covered;
  for (const auto& d : reg) {
    const auto& a = d.numerator[0].channel;
    const auto& b = d.numerator[1].channel;
    covered.insert({std::min(a, b), std::max(a, b)});
  }
  const auto& ch = raster::kNamedChannels;
  for (std::size_t hi = 1; hi < ch.size(); ++hi) {
    for (std::size_t lo = 0; lo < hi; ++lo) {
      std::string a(ch[hi]);
      std::string b(ch[lo]);
      if (covered.count({std::min(a, b), std::max(a, b)})) continue;
      reg.push_back(
          IndexDef::normalized_difference("ND_" + a + "_" + b, a, b));
    }
  }
  return reg;
}

void validate_registry(const std::vector<IndexDef>& registry,
                       const std::vector<std::string>& channel_universe) {
  std::set<std::string> universe(channel_universe.begin(),
                                 channel_universe.end());
  std::set<std::string> names;
  for (const auto& def : registry) {
    if (!names.insert(def.name).second) {
      throw ConfigError("duplicate index name '" + def.name + "'");
    }
    for (const auto* side : {&def.numerator, &def.denominator}) {
      for (const auto& t : *side) {
        if (!universe.count(t.channel)) {
          throw ConfigError("index '" + def.name +
                            "' references unknown channel '" + t.channel + "'");
        }
      }
    }
    const bool zero_denominator =
        std::all_of(def.denominator.begin(), def.denominator.end(),
                    [](const LinearTerm& t) { return t.coefficient == 0.0; });
    if (zero_denominator) {
      throw ConfigError("index '" + def.name + "' has a zero denominator");
    }
  }
}

std::vector<std::string> feature_names(const std::vector<IndexDef>& registry,
                                       std::optional<std::size_t> limit) {
  std::vector<std::string> out;
  for (const auto& def : registry) {
    for (Aggregator a : kAggregators) {
      out.push_back(def.name + "_" + std::string(to_string(a)));
    }
  }
  if (limit && *limit < out.size()) out.resize(*limit);
  return out;
}

BoundIndex::BoundIndex(const IndexDef& def,
                       const std::vector<raster::ChannelSpec>& channels)
    : name_(def.name) {
  auto resolve = [&](const std::vector<LinearTerm>& terms) {
    std::vector<Term> out;
    for (const auto& t : terms) {
      auto it = std::find_if(channels.begin(), channels.end(),
                             [&](const auto& c) { return c.name == t.channel; });
      if (it == channels.end()) {
        throw ConfigError("index '" + def.name + "' needs channel '" +
                          t.channel + "'");
      }
      out.push_back({it->index, t.coefficient});
    }
    return out;
  };
  numerator_ = resolve(def.numerator);
  denominator_ = resolve(def.denominator);
}

namespace {

std::optional<double> ratio_of(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

}  // namespace

std::optional<double> BoundIndex::eval(std::span<const float> pixel) const {
  double num = 0.0;
  double den = 0.0;
  for (const auto& t : numerator_) num += t.coefficient * pixel[t.channel];
  for (const auto& t : denominator_) den += t.coefficient * pixel[t.channel];
  return ratio_of(num, den);
}

std::optional<double> eval_index(const IndexDef& def,
                                 const std::map<std::string, double>& pixel) {
  auto combine = [&](const std::vector<LinearTerm>& terms) {
    double sum = 0.0;
    for (const auto& t : terms) {
      auto it = pixel.find(t.channel);
      if (it == pixel.end()) {
        throw ConfigError("pixel lacks channel '" + t.channel + "' for " +
                          def.name);
      }
      sum += t.coefficient * it->second;
    }
    return sum;
  };
  return ratio_of(combine(def.numerator), combine(def.denominator));
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw ConfigError("summarize: empty input");
  // Sums run over the sorted values so that pixel order cannot change a bit.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - mean) * (v - mean);
  return {mean, sorted[(sorted.size() - 1) / 2], std::sqrt(ss / n)};
}

Extraction extract_features(const raster::MaskedSample& sample,
                            const std::vector<IndexDef>& registry,
                            std::optional<std::size_t> limit) {
  if (sample.pixel_count() == 0) {
    throw DataError("sample '" + sample.sample_id + "' has no pixels");
  }
  const std::size_t total = registry.size() * kAggregators.size();
  const std::size_t wanted = limit ? std::min(*limit, total) : total;
  const std::size_t n_indices =
      (wanted + kAggregators.size() - 1) / kAggregators.size();

  Extraction out;
  out.features.sample_id = sample.sample_id;
  out.features.dat = sample.dat;
  out.features.values.reserve(n_indices * kAggregators.size());
  out.skipped_pixels.assign(n_indices, 0);

  std::vector<double> per_pixel;
  per_pixel.reserve(sample.pixel_count());
  for (std::size_t k = 0; k < n_indices; ++k) {
    const BoundIndex index(registry[k], sample.channels);
    per_pixel.clear();
    for (std::size_t i = 0; i < sample.pixel_count(); ++i) {
      if (auto v = index.eval(sample.pixel(i))) {
        per_pixel.push_back(*v);
      } else {
        ++out.skipped_pixels[k];
      }
    }
    if (per_pixel.empty()) {
      throw DataError("sample '" + sample.sample_id + "': index '" +
                      registry[k].name + "' has no usable pixels");
    }
    const Summary s = summarize(per_pixel);
    out.features.values.push_back(s.mean);
    out.features.values.push_back(s.median);
    out.features.values.push_back(s.std);
  }
  out.features.values.resize(wanted);
  return out;
}

std::optional<std::size_t> FeatureTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureTable::require(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw ConfigError("unknown feature '" + std::string(name) + "'");
}

void FeatureTable::validate() const {
  for (const auto& row : rows) {
    if (row.values.size() != names.size()) {
      throw DataError("feature row '" + row.sample_id + "' has " +
                      std::to_string(row.values.size()) + " values, expected " +
                      std::to_string(names.size()));
    }
    for (double v : row.values) {
      if (!std::isfinite(v)) {
        throw DataError("feature row '" + row.sample_id +
                        "' holds a non-finite value");
      }
    }
  }
}

void write_feature_csv(const FeatureTable& table, std::ostream& out) {
  csv::Writer w(out);
  w.field("sample_id").field("tank").field("treatment").field("dat");
  for (const auto& n : table.names) w.field(n);
  w.end_row();
  for (const auto& row : table.rows) {
    w.field(row.sample_id).field(row.tank).field(to_string(row.treatment));
    w.field(row.dat);
    for (double v : row.values) w.field(v);
    w.end_row();
  }
}

void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_feature_csv(table, out);
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read(path);
  static constexpr std::array<std::string_view, 4> kKeys = {
      "sample_id", "tank", "treatment", "dat"};
  if (t.header.size() < kKeys.size()) {
    throw DataError(path.string() + ": not a feature table");
  }
  for (std::size_t i = 0; i < kKeys.size(); ++i) {
    if (t.header[i] != kKeys[i]) {
      throw DataError(path.string() + ": expected column '" +
                      std::string(kKeys[i]) + "' at position " +
                      std::to_string(i));
    }
  }
  FeatureTable table;
  table.names.assign(t.header.begin() + kKeys.size(), t.header.end());
  table.rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    FeatureVector fv;
    fv.sample_id = r[0];
    fv.tank = r[1];
    fv.treatment = parse_treatment(r[2]);
    fv.dat = static_cast<int>(csv::parse_int(r[3]));
    fv.values.reserve(table.names.size());
    for (std::size_t i = kKeys.size(); i < r.size(); ++i) {
      fv.values.push_back(csv::parse_double(r[i]));
    }
    table.rows.push_back(std::move(fv));
  }
  table.validate();
  return table;
}

}  // namespace plantmon::indices
