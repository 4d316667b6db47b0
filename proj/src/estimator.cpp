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

#include "plantmon/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "plantmon/parallel.hpp"
#include "plantmon/random.hpp"

namespace plantmon::estimator {

std::vector<double> DesignMatrix::row(std::size_t i) const {
  std::vector<double> out(columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) out[j] = columns[j][i];
  return out;
}

std::size_t DesignMatrix::require(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return j;
  }
  throw ConfigError("missing feature '" + std::string(name) + "'");
}

DesignMatrix DesignMatrix::select(const std::vector<std::string>& wanted) const {
  DesignMatrix out;
  out.names = wanted;
  out.columns.reserve(wanted.size());
  for (const auto& n : wanted) out.columns.push_back(columns[require(n)]);
  return out;
}

DesignMatrix design_matrix(const indices::FeatureTable& table,
                           std::span<const std::size_t> rows,
                           const std::vector<std::string>& features) {
  DesignMatrix out;
  out.names = features;
  out.columns.resize(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    const std::size_t col = table.require(features[j]);
    auto& c = out.columns[j];
    c.reserve(rows.size());
    for (std::size_t r : rows) c.push_back(table.rows.at(r).values[col]);
  }
  return out;
}

void validate(const RfConfig& c, std::size_t n_features) {
  if (c.n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (c.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (c.max_depth && *c.max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (n_features == 0) throw ConfigError("forest needs at least one feature");
  if (c.mtry && (*c.mtry < 1 || *c.mtry > n_features)) {
    throw ConfigError("mtry must be in [1, " + std::to_string(n_features) + "]");
  }
}

std::size_t resolved_mtry(const RfConfig& c, std::size_t n_features) {
  if (c.mtry) return *c.mtry;
  return std::max<std::size_t>(1, (n_features + 2) / 3);
}

double RegressionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(
        x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return nodes[i].value;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != features.size()) {
    throw ConfigError("forest expects " + std::to_string(features.size()) +
                      " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : trees) sum += t.predict(x);
  return sum / static_cast<double>(trees.size());
}

std::vector<double> Forest::predict(const DesignMatrix& x) const {
  std::vector<std::size_t> cols;
  cols.reserve(features.size());
  for (const auto& f : features) cols.push_back(x.require(f));
  std::vector<double> out(x.rows());
  std::vector<double> row(features.size());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) row[j] = x.columns[cols[j]][i];
    out[i] = predict(row);
  }
  return out;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const DesignMatrix& x, std::span<const double> y,
              const RfConfig& config, std::size_t mtry)
      : x_(x), y_(y), config_(config), mtry_(mtry) {}

  RegressionTree build(std::vector<std::uint32_t> rows,
                       const std::vector<double>& weights, Rng& rng) {
    RegressionTree tree;
    struct Pending {
      std::size_t node;
      std::size_t begin;
      std::size_t end;
      std::size_t depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, 0, rows.size(), 0});
    std::vector<std::size_t> features(x_.cols());
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      double w = 0.0;
      double s = 0.0;
      for (std::size_t i = p.begin; i < p.end; ++i) {
        w += weights[rows[i]];
        s += weights[rows[i]] * y_[rows[i]];
      }
      const double mean = s / w;
      double sse = 0.0;
      for (std::size_t i = p.begin; i < p.end; ++i) {
        const double d = y_[rows[i]] - mean;
        sse += weights[rows[i]] * d * d;
      }
      TreeNode& node = tree.nodes[p.node];
      node.value = mean;
      node.weight = w;
      const double min_leaf = static_cast<double>(config_.min_samples_leaf);
      if ((config_.max_depth && p.depth >= *config_.max_depth) ||
          w < 2.0 * min_leaf || !(sse > 0.0)) {
        continue;
      }

      std::iota(features.begin(), features.end(), std::size_t{0});
      Best best;
      std::size_t tried = 0;
      for (std::size_t k = 0; k < features.size() && tried < mtry_; ++k) {
        const std::size_t j =
            k + static_cast<std::size_t>(rng.below(features.size() - k));
        std::swap(features[k], features[j]);
        if (scan(features[k], rows, p.begin, p.end, weights, w, s, min_leaf, best)) {
          ++tried;
        }
      }
      if (!(best.gain > 0.0)) continue;

      const auto& col = x_.columns[best.feature];
      const auto mid = std::stable_partition(
          rows.begin() + static_cast<std::ptrdiff_t>(p.begin),
          rows.begin() + static_cast<std::ptrdiff_t>(p.end),
          [&](std::uint32_t r) { return col[r] <= best.threshold; });
      const auto split = static_cast<std::size_t>(mid - rows.begin());
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& parent = tree.nodes[p.node];
      parent.feature = static_cast<int>(best.feature);
      parent.threshold = best.threshold;
      parent.impurity_decrease = best.gain;
      parent.left = left;
      parent.right = left + 1;
      stack.push_back({static_cast<std::size_t>(left + 1), split, p.end, p.depth + 1});
      stack.push_back({static_cast<std::size_t>(left), p.begin, split, p.depth + 1});
    }
    return tree;
  }

 private:
  struct Best {
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
  };

  // Scans one feature; returns false when it is constant within the node.
  bool scan(std::size_t f, const std::vector<std::uint32_t>& rows,
            std::size_t begin, std::size_t end, const std::vector<double>& weights,
            double w, double s, double min_leaf, Best& best) {
    const auto& col = x_.columns[f];
    buf_.clear();
    for (std::size_t i = begin; i < end; ++i) buf_.push_back({col[rows[i]], rows[i]});
    std::sort(buf_.begin(), buf_.end());
    if (buf_.front().first == buf_.back().first) return false;
    const double parent = s * s / w;
    double wl = 0.0;
    double sl = 0.0;
    for (std::size_t i = 0; i + 1 < buf_.size(); ++i) {
      const std::uint32_t r = buf_[i].second;
      wl += weights[r];
      sl += weights[r] * y_[r];
      const double a = buf_[i].first;
      const double b = buf_[i + 1].first;
      if (a == b) continue;
      const double wr = w - wl;
      if (wl < min_leaf || wr < min_leaf) continue;
      const double sr = s - sl;
      const double gain = sl * sl / wl + sr * sr / wr - parent;
      if (gain > best.gain) {
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best = {gain, f, t};
      }
    }
    return true;
  }

  const DesignMatrix& x_;
  std::span<const double> y_;
  const RfConfig& config_;
  std::size_t mtry_;
  std::vector<std::pair<double, std::uint32_t>> buf_;
};

}  // namespace

Forest fit_forest(const DesignMatrix& x, std::span<const double> y,
                  const RfConfig& config) {
  validate(config, x.cols());
  const std::size_t n = x.rows();
  if (n < 2) throw ConfigError("forest needs at least 2 rows, got " + std::to_string(n));
  if (y.size() != n) throw ConfigError("target length does not match feature rows");
  for (double v : y) {
    if (!std::isfinite(v)) throw DataError("non-finite regression target");
  }
  for (const auto& c : x.columns) {
    if (c.size() != n) throw ConfigError("ragged design matrix");
    for (double v : c) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
  }
  const std::size_t mtry = resolved_mtry(config, x.cols());

  Forest forest;
  forest.features = x.names;
  forest.config = config;
  forest.trees.resize(config.n_trees);
  parallel_for(config.n_trees, config.threads, [&](std::size_t t) {
    Rng rng(config.seed ^ static_cast<std::uint64_t>(t));
    std::vector<double> weights(n, config.bootstrap ? 0.0 : 1.0);
    if (config.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) weights[rng.below(n)] += 1.0;
    }
    std::vector<std::uint32_t> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (weights[i] > 0.0) rows.push_back(static_cast<std::uint32_t>(i));
    }
    TreeBuilder builder(x, y, config, mtry);
    forest.trees[t] = builder.build(std::move(rows), weights, rng);
  });
  forest.degenerate = std::all_of(
      forest.trees.begin(), forest.trees.end(),
      [](const RegressionTree& t) { return t.nodes.size() == 1; });
  return forest;
}

std::vector<double> importance(const Forest& forest) {
  std::vector<double> out(forest.features.size(), 0.0);
  for (const auto& t : forest.trees) {
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) out[static_cast<std::size_t>(n.feature)] += n.impurity_decrease;
    }
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
  return out;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw ConfigError("metrics need equal, non-zero lengths");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = truth[i] - pred[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

Metrics evaluate(std::span<const double> pred, std::span<const double> truth) {
  const double e = rmse(pred, truth);
  const double mean =
      std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (!(ss_tot > 0.0)) throw DataError("R^2 is undefined for constant truth");
  return {1.0 - ss_res / ss_tot, e};
}

std::vector<double> permutation_importance(const Forest& forest,
                                           const DesignMatrix& x,
                                           std::span<const double> y,
                                           std::uint64_t seed, int repeats) {
  if (x.rows() < 2) throw ConfigError("permutation importance needs >= 2 rows");
  if (repeats < 1) throw ConfigError("permutation repeats must be >= 1");
  DesignMatrix aligned = x.select(forest.features);
  const double base = rmse(forest.predict(aligned), y);
  std::vector<double> out(forest.features.size(), 0.0);
  for (std::size_t f = 0; f < aligned.cols(); ++f) {
    const std::vector<double> original = aligned.columns[f];
    double total = 0.0;
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, f * static_cast<std::size_t>(repeats) +
                                    static_cast<std::size_t>(r)));
      aligned.columns[f] = original;
      rng.shuffle(aligned.columns[f]);
      total += rmse(forest.predict(aligned), y) - base;
    }
    aligned.columns[f] = original;
    out[f] = std::max(0.0, total / repeats);
  }
  return out;
}

// --- feature selection ---

void validate(const SelectionConfig& c) {
  if (c.rfe_target < 1) throw ConfigError("rfe_target must be >= 1");
  if (!(c.rfe_drop_fraction > 0 && c.rfe_drop_fraction < 1)) {
    throw ConfigError("rfe_drop_fraction must be in (0, 1)");
  }
  if (!(c.min_importance >= 0 && c.min_importance < 1)) {
    throw ConfigError("min_importance must be in [0, 1)");
  }
  if (!(c.max_abs_corr > 0 && c.max_abs_corr <= 1)) {
    throw ConfigError("max_abs_corr must be in (0, 1]");
  }
  if (c.final_count < 1) throw ConfigError("final_count must be >= 1");
}

double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

// A configured mtry larger than the surviving feature count uses them all.
void cap_mtry(RfConfig& rf, std::size_t n_features) {
  if (rf.mtry && *rf.mtry > n_features) rf.mtry = n_features;
}

void sort_ranked(std::vector<RankedFeature>& v) {
  std::sort(v.begin(), v.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.name < b.name;
  });
}

// True when `a` should be removed in favour of `b`.
bool weaker(const RankedFeature& a, const RankedFeature& b) {
  if (a.importance != b.importance) return a.importance < b.importance;
  return a.name > b.name;
}

}  // namespace

std::vector<RankedFeature> prune_correlated(const DesignMatrix& x,
                                            std::vector<RankedFeature> features,
                                            double threshold,
                                            std::vector<std::string>& log) {
  const std::size_t p = features.size();
  std::vector<const std::vector<double>*> cols;
  for (const auto& f : features) cols.push_back(&x.columns[x.require(f.name)]);
  std::vector<double> r(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      r[i * p + j] = std::abs(pearson(*cols[i], *cols[j]));
    }
  }
  std::vector<bool> alive(p, true);
  for (;;) {
    double top = -1.0;
    std::size_t bi = 0;
    std::size_t bj = 0;
    for (std::size_t i = 0; i < p; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < p; ++j) {
        if (alive[j] && r[i * p + j] >= threshold && r[i * p + j] > top) {
          top = r[i * p + j];
          bi = i;
          bj = j;
        }
      }
    }
    if (top < 0.0) break;
    const bool drop_i = weaker(features[bi], features[bj]);
    const std::size_t gone = drop_i ? bi : bj;
    const std::size_t kept = drop_i ? bj : bi;
    alive[gone] = false;
    log.push_back("drop " + features[gone].name + " (|r|=" + std::to_string(top) +
                  " with " + features[kept].name + ")");
  }
  std::vector<RankedFeature> out;
  for (std::size_t i = 0; i < p; ++i) {
    if (alive[i]) out.push_back(std::move(features[i]));
  }
  return out;
}

FoldSelection select_features_fold(const DesignMatrix& x, std::span<const double> y,
                                   const SelectionConfig& config) {
  validate(config);
  if (x.cols() < 2) throw ConfigError("feature selection needs >= 2 features");
  FoldSelection sel;
  std::vector<std::string> survivors = x.names;
  std::vector<RankedFeature> ranked;
  for (std::uint64_t round = 0;; ++round) {
    RfConfig rf = config.forest;
    rf.seed = derive_seed(config.forest.seed, round);
    cap_mtry(rf, survivors.size());
    const Forest forest = fit_forest(x.select(survivors), y, rf);
    const auto imp = importance(forest);
    sel.rfe_counts.push_back(survivors.size());
    ranked.clear();
    for (std::size_t j = 0; j < survivors.size(); ++j) {
      ranked.push_back({survivors[j], imp[j]});
    }
    if (survivors.size() <= config.rfe_target) break;
    const auto n = survivors.size();
    std::size_t drop = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(config.rfe_drop_fraction *
                                                static_cast<double>(n))));
    drop = std::min(drop, n - config.rfe_target);
    std::vector<RankedFeature> order = ranked;
    std::sort(order.begin(), order.end(),
              [](const RankedFeature& a, const RankedFeature& b) { return weaker(a, b); });
    std::set<std::string> removed;
    for (std::size_t k = 0; k < drop; ++k) removed.insert(order[k].name);
    std::erase_if(survivors, [&](const std::string& s) { return removed.count(s) > 0; });
  }

  std::erase_if(ranked, [&](const RankedFeature& f) {
    return f.importance < config.min_importance;
  });
  if (ranked.empty()) {
    throw DataError("feature selection eliminated every feature");
  }
  ranked = prune_correlated(x, std::move(ranked), config.max_abs_corr, sel.pruning_log);
  sort_ranked(ranked);
  sel.features = std::move(ranked);
  return sel;
}

AggregatedSelection aggregate_selection(std::span<const FoldSelection> folds,
                                        const DesignMatrix& x,
                                        const SelectionConfig& config) {
  validate(config);
  std::map<std::string, std::vector<double>> seen;
  for (const auto& f : folds) {
    for (const auto& r : f.features) seen[r.name].push_back(r.importance);
  }
  AggregatedSelection out;
  for (auto& [name, imps] : seen) {
    std::sort(imps.begin(), imps.end());
    out.ranking.push_back({name, imps.size(), imps[(imps.size() - 1) / 2]});
  }
  std::sort(out.ranking.begin(), out.ranking.end(),
            [](const AggregateEntry& a, const AggregateEntry& b) {
              if (a.frequency != b.frequency) return a.frequency > b.frequency;
              if (a.median_importance != b.median_importance) {
                return a.median_importance > b.median_importance;
              }
              return a.name < b.name;
            });
  std::vector<RankedFeature> top;
  for (std::size_t i = 0; i < out.ranking.size() && i < config.final_count; ++i) {
    out.top.push_back(out.ranking[i].name);
    top.push_back({out.ranking[i].name, out.ranking[i].median_importance});
  }
  for (auto& f : prune_correlated(x, std::move(top), config.max_abs_corr,
                                  out.pruning_log)) {
    out.final_features.push_back(std::move(f.name));
  }
  return out;
}

// --- cross-validation ---

void validate(const CvConfig& c) {
  validate(c.selection);
  if (c.leaf_grid.empty()) throw ConfigError("leaf_grid must not be empty");
  for (std::size_t v : c.leaf_grid) {
    if (v < 1) throw ConfigError("leaf_grid values must be >= 1");
  }
  if (!(c.train_fraction > 0 && c.train_fraction < 1)) {
    throw ConfigError("train_fraction must be in (0, 1)");
  }
}

namespace {

struct FoldPlan {
  std::vector<std::size_t> train;  // positions in records
  std::vector<std::size_t> test_gt;
  FoldSelection selection;
  std::size_t leaf = 1;
};

std::vector<double> targets(std::span<const dataset::LabeledRecord> records,
                            std::span<const std::size_t> which, std::size_t var) {
  std::vector<double> y;
  y.reserve(which.size());
  for (std::size_t i : which) y.push_back(records[i].labels[var]);
  return y;
}

std::vector<std::size_t> table_rows(std::span<const dataset::LabeledRecord> records,
                                    std::span<const std::size_t> which) {
  std::vector<std::size_t> rows;
  rows.reserve(which.size());
  for (std::size_t i : which) rows.push_back(records[i].row);
  return rows;
}

void mean_sd(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace

VariableReport run_cv(const indices::FeatureTable& table,
                      std::span<const dataset::LabeledRecord> records,
                      std::span<const dataset::Fold> folds, Response variable,
                      const CvConfig& config) {
  validate(config);
  if (folds.empty()) throw ConfigError("no folds");
  if (records.empty()) throw DataError("no labeled records");
  const std::size_t var = index_of(variable);
  const std::uint64_t var_seed = derive_seed(config.seed, var);

  std::vector<FoldPlan> plans(folds.size());
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& row = table.rows.at(records[i].row);
      if (folds[f].is_train(row.tank)) {
        plans[f].train.push_back(i);
      } else if (folds[f].is_test(row.tank) && records[i].kind == dataset::LabelKind::gt) {
        plans[f].test_gt.push_back(i);
      }
    }
    if (plans[f].test_gt.empty()) {
      throw DataError("fold " + std::to_string(folds[f].id) +
                      " has no ground-truth test records");
    }
    if (plans[f].train.size() < 4) {
      throw DataError("fold " + std::to_string(folds[f].id) +
                      " has too few training records");
    }
  }

  // Stage A: per-fold selection and leaf-size search.
  parallel_for(folds.size(), config.threads, [&](std::size_t f) {
    FoldPlan& plan = plans[f];
    const std::uint64_t fold_seed = derive_seed(var_seed, f);
    std::vector<Treatment> strata;
    for (std::size_t i : plan.train) strata.push_back(table.rows[records[i].row].treatment);
    const auto split = dataset::split_train_val(strata, config.train_fraction,
                                                derive_seed(fold_seed, 0));
    std::vector<std::size_t> fit_idx;
    std::vector<std::size_t> val_idx;
    for (std::size_t k : split.train) fit_idx.push_back(plan.train[k]);
    for (std::size_t k : split.validation) val_idx.push_back(plan.train[k]);

    const DesignMatrix x_fit = design_matrix(table, table_rows(records, fit_idx), table.names);
    const auto y_fit = targets(records, fit_idx, var);
    SelectionConfig sc = config.selection;
    sc.forest.seed = derive_seed(fold_seed, 1);
    sc.forest.threads = 1;
    plan.selection = select_features_fold(x_fit, y_fit, sc);

    std::vector<std::string> chosen;
    for (const auto& r : plan.selection.features) chosen.push_back(r.name);
    const DesignMatrix x_sel = x_fit.select(chosen);
    const DesignMatrix x_val = design_matrix(table, table_rows(records, val_idx), chosen);
    const auto y_val = targets(records, val_idx, var);
    double best = INFINITY;
    for (std::size_t leaf : config.leaf_grid) {
      RfConfig rf = config.selection.forest;
      rf.min_samples_leaf = leaf;
      rf.seed = derive_seed(fold_seed, 2);
      rf.threads = 1;
      cap_mtry(rf, chosen.size());
      const double e = rmse(fit_forest(x_sel, y_fit, rf).predict(x_val), y_val);
      if (e < best) {
        best = e;
        plan.leaf = leaf;
      }
    }
  });

  VariableReport report;
  report.variable = variable;
  for (const auto& p : plans) report.selections.push_back(p.selection);
  {
    std::vector<std::size_t> all(records.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const DesignMatrix x_all = design_matrix(table, table_rows(records, all), table.names);
    report.aggregated = aggregate_selection(report.selections, x_all, config.selection);
  }
  const auto& final_features = report.aggregated.final_features;

  // Stage B: refit on every training record, score the test tanks.
  std::vector<std::vector<double>> gt_pred(folds.size());
  std::vector<std::vector<double>> all_pred(folds.size());
  std::vector<std::vector<double>> record_pred(folds.size());
  std::vector<std::size_t> all_rows(table.rows.size());
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});
  parallel_for(folds.size(), config.threads, [&](std::size_t f) {
    const FoldPlan& plan = plans[f];
    RfConfig rf = config.selection.forest;
    rf.min_samples_leaf = plan.leaf;
    rf.seed = derive_seed(derive_seed(var_seed, f), 3);
    rf.threads = 1;
    cap_mtry(rf, final_features.size());
    const Forest forest =
        fit_forest(design_matrix(table, table_rows(records, plan.train), final_features),
                   targets(records, plan.train, var), rf);
    std::vector<std::size_t> test_records;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (folds[f].is_test(table.rows[records[i].row].tank)) test_records.push_back(i);
    }
    record_pred[f] =
        forest.predict(design_matrix(table, table_rows(records, test_records), final_features));
    gt_pred[f] = forest.predict(
        design_matrix(table, table_rows(records, plan.test_gt), final_features));
    if (config.estimate_all_rows) {
      std::vector<std::size_t> rows;
      for (std::size_t r : all_rows) {
        if (folds[f].is_test(table.rows[r].tank)) rows.push_back(r);
      }
      all_pred[f] = forest.predict(design_matrix(table, rows, final_features));
    }
  });

  std::vector<double> r2s;
  std::vector<double> rmses;
  std::vector<double> sum(records.size(), 0.0);
  std::vector<std::size_t> count(records.size(), 0);
  std::vector<double> row_sum(config.estimate_all_rows ? table.rows.size() : 0, 0.0);
  std::vector<std::size_t> row_count(row_sum.size(), 0);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto truth = targets(records, plans[f].test_gt, var);
    FoldResult fr;
    fr.fold = folds[f].id;
    fr.metrics = evaluate(gt_pred[f], truth);
    fr.n_test = truth.size();
    fr.min_samples_leaf = plans[f].leaf;
    report.folds.push_back(fr);
    r2s.push_back(fr.metrics.r2);
    rmses.push_back(fr.metrics.rmse);
    std::size_t k = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (folds[f].is_test(table.rows[records[i].row].tank)) {
        sum[i] += record_pred[f][k++];
        ++count[i];
      }
    }
    if (config.estimate_all_rows) {
      std::size_t m = 0;
      for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (folds[f].is_test(table.rows[r].tank)) {
          row_sum[r] += all_pred[f][m++];
          ++row_count[r];
        }
      }
    }
  }
  mean_sd(r2s, report.mean_r2, report.sd_r2);
  mean_sd(rmses, report.mean_rmse, report.sd_rmse);

  std::vector<double> oof_pred;
  std::vector<double> oof_truth;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (count[i] == 0) continue;
    OofPrediction o{i, records[i].labels[var],
                    sum[i] / static_cast<double>(count[i]), count[i]};
    if (records[i].kind == dataset::LabelKind::gt) {
      oof_pred.push_back(o.prediction);
      oof_truth.push_back(o.truth);
    }
    report.oof_predictions.push_back(o);
  }
  if (!oof_truth.empty()) report.oof = evaluate(oof_pred, oof_truth);
  if (config.estimate_all_rows) {
    report.row_estimates.resize(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      report.row_estimates[r] = row_count[r] > 0
                                    ? row_sum[r] / static_cast<double>(row_count[r])
                                    : std::nan("");
    }
  }
  return report;
}

// --- persistence ---

namespace {

using nlohmann::json;

json node_to_json(const Forest& forest, const RegressionTree& tree, std::size_t i) {
  const TreeNode& n = tree.nodes[i];
  json j = {{"value", n.value}, {"weight", n.weight}};
  if (n.feature >= 0) {
    j["feature"] = forest.features[static_cast<std::size_t>(n.feature)];
    j["threshold"] = n.threshold;
    j["impurity_decrease"] = n.impurity_decrease;
    j["left"] = node_to_json(forest, tree, static_cast<std::size_t>(n.left));
    j["right"] = node_to_json(forest, tree, static_cast<std::size_t>(n.right));
  }
  return j;
}

int node_from_json(const json& j, const std::map<std::string, int>& index,
                   RegressionTree& tree) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode n;
  n.value = j.at("value").get<double>();
  n.weight = j.at("weight").get<double>();
  if (j.contains("feature")) {
    const auto name = j.at("feature").get<std::string>();
    auto it = index.find(name);
    if (it == index.end()) throw DataError("tree references unknown feature '" + name + "'");
    n.feature = it->second;
    n.threshold = j.at("threshold").get<double>();
    n.impurity_decrease = j.at("impurity_decrease").get<double>();
    n.left = node_from_json(j.at("left"), index, tree);
    n.right = node_from_json(j.at("right"), index, tree);
  }
  tree.nodes[static_cast<std::size_t>(id)] = n;
  return id;
}

}  // namespace

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "plantmon.forest/1";
  doc["features"] = forest.features;
  const auto& c = forest.config;
  doc["config"] = {{"n_trees", c.n_trees},
                   {"min_samples_leaf", c.min_samples_leaf},
                   {"bootstrap", c.bootstrap},
                   {"seed", c.seed}};
  doc["config"]["max_depth"] = c.max_depth ? json(*c.max_depth) : json(nullptr);
  doc["config"]["mtry"] = c.mtry ? json(*c.mtry) : json(nullptr);
  json trees = json::array();
  for (const auto& t : forest.trees) trees.push_back(node_to_json(forest, t, 0));
  doc["trees"] = std::move(trees);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    Forest forest;
    forest.features = doc.at("features").get<std::vector<std::string>>();
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < forest.features.size(); ++i) {
      index[forest.features[i]] = static_cast<int>(i);
    }
    const auto& c = doc.at("config");
    forest.config.n_trees = c.at("n_trees").get<std::size_t>();
    forest.config.min_samples_leaf = c.at("min_samples_leaf").get<std::size_t>();
    forest.config.bootstrap = c.at("bootstrap").get<bool>();
    forest.config.seed = c.at("seed").get<std::uint64_t>();
    if (!c.at("max_depth").is_null()) forest.config.max_depth = c["max_depth"].get<std::size_t>();
    if (!c.at("mtry").is_null()) forest.config.mtry = c["mtry"].get<std::size_t>();
    for (const auto& t : doc.at("trees")) {
      RegressionTree tree;
      node_from_json(t, index, tree);
      forest.trees.push_back(std::move(tree));
    }
    if (forest.trees.empty()) throw DataError("forest has no trees");
    forest.degenerate = std::all_of(
        forest.trees.begin(), forest.trees.end(),
        [](const RegressionTree& t) { return t.nodes.size() == 1; });
    return forest;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed forest: " + e.what());
  }
}

}  // namespace plantmon::estimator
