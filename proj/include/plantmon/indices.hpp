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

#ifndef PLANTMON_INDICES_HPP_
#define PLANTMON_INDICES_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plantmon/common.hpp"
#include "plantmon/raster.hpp"

namespace plantmon::indices {

struct LinearTerm {
  std::string channel;
  double coefficient = 1.0;
};

// A vegetation index numerator / denominator, each a linear combination of
// channel reflectances.
struct IndexDef {
  std::string name;
  std::vector<LinearTerm> numerator;
  std::vector<LinearTerm> denominator;

  // (a - b) / (a + b)
  static IndexDef normalized_difference(std::string name, std::string a,
                                        std::string b);
  // a / b
  static IndexDef ratio(std::string name, std::string a, std::string b);
};

enum class Aggregator { mean, median, std };

inline constexpr std::array<Aggregator, 3> kAggregators = {
    Aggregator::mean, Aggregator::median, Aggregator::std};

std::string_view to_string(Aggregator a);

// The registry over the nine named channels: NDVI, GNDVI, GRVI, NDRE and
// NDWI first, then the normalized difference of every remaining distinct
// channel pair, named ND_<longer>_<shorter> in wavelength order. 36 indices,
// 108 features with three aggregators.
//
//   NDVI  = (nir850 - red)     / (nir850 + red)
//   GNDVI = (nir850 - green)   / (nir850 + green)
//   GRVI  = (green - red)      / (green + red)
//   NDRE  = (nir850 - far_red) / (nir850 + far_red)
//   NDWI  = (nir850 - nir940)  / (nir850 + nir940)
std::vector<IndexDef> default_registry();

// Throws ConfigError when a definition references an unknown channel, has
// an empty or all-zero denominator, or duplicates a name.
void validate_registry(const std::vector<IndexDef>& registry,
                       const std::vector<std::string>& channel_universe);

// `{index}_{aggregator}` in index-major order, truncated to `limit`.
std::vector<std::string> feature_names(const std::vector<IndexDef>& registry,
                                       std::optional<std::size_t> limit = {});

// An index resolved against a concrete channel layout.
class BoundIndex {
 public:
  BoundIndex(const IndexDef& def,
             const std::vector<raster::ChannelSpec>& channels);

  // numerator / denominator; nullopt (pixel skipped) when the denominator
  // is 0.
  std::optional<double> eval(std::span<const float> pixel) const;

  const std::string& name() const { return name_; }

 private:
  struct Term {
    std::size_t channel;
    double coefficient;
  };
  std::string name_;
  std::vector<Term> numerator_;
  std::vector<Term> denominator_;
};

// Evaluates one definition at a pixel given as channel name -> reflectance.
std::optional<double> eval_index(const IndexDef& def,
                                 const std::map<std::string, double>& pixel);

struct FeatureVector {
  std::string sample_id;
  std::string tank;
  Treatment treatment = Treatment::T1;
  int dat = 0;
  std::vector<double> values;  // aligned to the owning table's names
};

// Rows sharing one feature ordering.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<FeatureVector> rows;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t require(std::string_view name) const;
  // Checks row width and finiteness.
  void validate() const;
};

struct Extraction {
  FeatureVector features;
  std::vector<std::size_t> skipped_pixels;  // per index, zero denominators
};

// Per index: per-pixel values, then mean, median (lower-middle element for
// even counts) and population standard deviation. Sums run over the sorted
// values, so pixel order does not change any bit. Throws DataError naming
// the index when no pixel is usable.
Extraction extract_features(const raster::MaskedSample& sample,
                            const std::vector<IndexDef>& registry,
                            std::optional<std::size_t> limit = {});

// mean, lower-middle median and population std of `values` (non-empty).
struct Summary {
  double mean;
  double median;
  double std;
};
Summary summarize(std::span<const double> values);

// Header `sample_id,tank,treatment,dat,<feature...>`.
void write_feature_csv(const FeatureTable& table, std::ostream& out);
void write_feature_csv(const FeatureTable& table,
                       const std::filesystem::path& path);
FeatureTable read_feature_csv(const std::filesystem::path& path);

}  // namespace plantmon::indices

#endif  // PLANTMON_INDICES_HPP_
