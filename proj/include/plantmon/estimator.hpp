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

// Random-forest regression, per-fold feature selection and tank-permutation
// cross-validation.
//
// Trees are CART regressors grown on bootstrap counts: a row drawn k times
// carries weight k, leaf values are weighted target means and
// min_samples_leaf bounds the weighted row count of each child. Splits
// minimize the weighted within-node sum of squares over mtry features
// drawn without replacement per node; features constant within the node do
// not count toward mtry. Candidate thresholds are midpoints between
// consecutive distinct values and x <= threshold routes left.

#ifndef PLANTMON_ESTIMATOR_HPP_
#define PLANTMON_ESTIMATOR_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plantmon/common.hpp"
#include "plantmon/dataset.hpp"
#include "plantmon/indices.hpp"

namespace plantmon::estimator {

// Column-major feature matrix.
struct DesignMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // columns[feature][row]

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t cols() const { return columns.size(); }
  std::vector<double> row(std::size_t i) const;
  std::size_t require(std::string_view name) const;
  // Columns in the order of `names`; throws ConfigError on a missing name.
  DesignMatrix select(const std::vector<std::string>& names) const;
};

// Rows `rows` of the table restricted to `features`.
DesignMatrix design_matrix(const indices::FeatureTable& table,
                           std::span<const std::size_t> rows,
                           const std::vector<std::string>& features);

struct RfConfig {
  std::size_t n_trees = 200;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> mtry;  // default ceil(n_features / 3)
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

void validate(const RfConfig& config, std::size_t n_features);
std::size_t resolved_mtry(const RfConfig& config, std::size_t n_features);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;              // weighted mean target of the node
  double weight = 0.0;             // weighted row count
  double impurity_decrease = 0.0;  // parent SSE minus children SSE
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  std::size_t leaf_count() const;
};

struct Forest {
  std::vector<std::string> features;
  std::vector<RegressionTree> trees;
  RfConfig config;
  bool degenerate = false;  // every tree is a single leaf

  // Mean over trees; `x` is ordered like `features`.
  double predict(std::span<const double> x) const;
  // Looks up the forest's features by name in `x`.
  std::vector<double> predict(const DesignMatrix& x) const;
};

// Tree t draws its bootstrap and feature samples from a stream seeded with
// seed ^ t, so the result does not depend on config.threads. Throws
// ConfigError for fewer than two rows or mismatched lengths and DataError
// for non-finite targets or features.
Forest fit_forest(const DesignMatrix& x, std::span<const double> y,
                  const RfConfig& config);

// Total impurity decrease per feature over all trees, normalized to sum to
// one; all zeros when no tree splits. Ordered like forest.features.
std::vector<double> importance(const Forest& forest);

// Mean increase in RMSE over `repeats` seeded permutations of each column,
// clamped at zero. Ordered like forest.features.
std::vector<double> permutation_importance(const Forest& forest,
                                           const DesignMatrix& x,
                                           std::span<const double> y,
                                           std::uint64_t seed, int repeats = 5);

struct Metrics {
  double r2 = 0.0;
  double rmse = 0.0;
};

double rmse(std::span<const double> pred, std::span<const double> truth);
// Throws DataError when truth is constant.
Metrics evaluate(std::span<const double> pred, std::span<const double> truth);

// --- feature selection ---

struct SelectionConfig {
  std::size_t rfe_target = 30;
  double rfe_drop_fraction = 0.1;
  double min_importance = 0.01;
  double max_abs_corr = 0.95;
  std::size_t final_count = 20;
  RfConfig forest;
};

void validate(const SelectionConfig& config);

struct RankedFeature {
  std::string name;
  double importance = 0.0;
};

struct FoldSelection {
  std::vector<RankedFeature> features;  // importance desc, then name
  std::vector<std::size_t> rfe_counts;  // surviving count at each fit
  std::vector<std::string> pruning_log;
};

// Pearson r of two columns; 0 when either is constant.
double pearson(std::span<const double> a, std::span<const double> b);

// Repeatedly removes the lower-importance member of the most correlated
// pair with |r| >= threshold (ties drop the larger name) until no such
// pair remains. Returns survivors in input order and appends one line per
// removal to `log`.
std::vector<RankedFeature> prune_correlated(const DesignMatrix& x,
                                            std::vector<RankedFeature> features,
                                            double threshold,
                                            std::vector<std::string>& log);

// Three stages on one fold's training rows. RFE refits and removes
// max(1, floor(fraction * n)) of the lowest-importance features, never
// going below the target, until at most rfe_target remain; then features
// below min_importance of the last fit are removed; then correlated pairs
// are pruned. Throws DataError when all features are eliminated.
FoldSelection select_features_fold(const DesignMatrix& x,
                                   std::span<const double> y,
                                   const SelectionConfig& config);

struct AggregateEntry {
  std::string name;
  std::size_t frequency = 0;
  double median_importance = 0.0;  // lower middle for even counts
};

struct AggregatedSelection {
  std::vector<AggregateEntry> ranking;  // all features ever selected
  std::vector<std::string> top;         // first final_count of ranking
  std::vector<std::string> final_features;
  std::vector<std::string> pruning_log;
};

// Ranks by (frequency desc, median importance desc, name asc), keeps the
// top final_count and prunes correlated pairs once more on `x`, using the
// median importances.
AggregatedSelection aggregate_selection(std::span<const FoldSelection> folds,
                                        const DesignMatrix& x,
                                        const SelectionConfig& config);

// --- cross-validation ---

struct CvConfig {
  SelectionConfig selection;
  std::vector<std::size_t> leaf_grid = {1, 3, 5};
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool estimate_all_rows = false;
};

void validate(const CvConfig& config);

struct FoldResult {
  int fold = 0;
  Metrics metrics;
  std::size_t n_test = 0;
  std::size_t min_samples_leaf = 1;
};

struct OofPrediction {
  std::size_t record = 0;  // position in the labeled records
  double truth = 0.0;
  double prediction = 0.0;
  std::size_t n_predictions = 0;
};

struct VariableReport {
  Response variable = Response::fw;
  std::vector<FoldSelection> selections;  // per fold
  AggregatedSelection aggregated;
  std::vector<FoldResult> folds;
  double mean_r2 = 0.0;
  double sd_r2 = 0.0;  // sample sd over folds
  double mean_rmse = 0.0;
  double sd_rmse = 0.0;
  Metrics oof;  // over ground-truth records
  std::vector<OofPrediction> oof_predictions;  // labeled records tested at least once
  // With estimate_all_rows: per table row, the mean prediction over folds
  // testing its tank (NaN for rows never tested).
  std::vector<double> row_estimates;
};

// Per fold: stratified train/validation split of the training tanks'
// labeled records, feature selection on the training part and a
// min_samples_leaf search on the validation part. The fold selections are
// aggregated into one feature set; each fold then refits on all of its
// training records and is scored on the ground-truth records of its test
// tanks. Deterministic given config.seed for any thread count. Throws
// DataError for a fold without ground-truth test records.
VariableReport run_cv(const indices::FeatureTable& table,
                      std::span<const dataset::LabeledRecord> records,
                      std::span<const dataset::Fold> folds, Response variable,
                      const CvConfig& config);

// --- persistence ---

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace plantmon::estimator

#endif  // PLANTMON_ESTIMATOR_HPP_
